//! TU benchmark file format: ingestion and the inverse writer.
//!
//! A dataset `DS` in directory `root/DS/` consists of four text files:
//!
//! * `DS_A.txt` — one directed edge per line, `"i, j"`, 1-based global node
//!   ids; every undirected edge appears in both directions,
//! * `DS_graph_indicator.txt` — line v holds the 1-based graph id of node v,
//! * `DS_graph_labels.txt` — line g holds the raw label of graph g,
//! * `DS_node_labels.txt` — line v holds the raw label of node v.
//!
//! Raw labels may be arbitrary integers; they are remapped to contiguous
//! 0-based ranges by sorting the distinct values ascending. Whitespace around
//! commas and trailing blank lines are tolerated.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{DataError, Graph, GraphDataset};

struct SourceFile {
    name: String,
    lines: Vec<String>,
}

impl SourceFile {
    fn load(dir: &Path, name: String) -> Result<Self, DataError> {
        let path = dir.join(&name);
        let text = fs::read_to_string(&path).map_err(|_| DataError::MissingFile {
            path: path.display().to_string(),
        })?;
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        while lines.last().is_some_and(|l| l.trim().is_empty()) {
            lines.pop();
        }
        Ok(Self { name, lines })
    }

    fn parse_ints(&self) -> Result<Vec<i64>, DataError> {
        self.lines
            .iter()
            .enumerate()
            .map(|(i, raw)| {
                raw.trim().parse::<i64>().map_err(|_| DataError::Malformed {
                    file: self.name.clone(),
                    line: i + 1,
                    message: format!("expected an integer, got {raw:?}"),
                })
            })
            .collect()
    }
}

/// Sorted-ascending remap of raw labels to 0-based contiguous indices.
fn remap(raw: &[i64]) -> (Vec<usize>, usize) {
    let distinct: BTreeSet<i64> = raw.iter().copied().collect();
    let index: HashMap<i64, usize> = distinct.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    (raw.iter().map(|v| index[v]).collect(), distinct.len())
}

/// Loads `root/name` into a validated dataset.
pub fn parse_tu_dataset(root: &Path, name: &str) -> Result<GraphDataset, DataError> {
    let dir = root.join(name);
    let adjacency = SourceFile::load(&dir, format!("{name}_A.txt"))?;
    let indicator = SourceFile::load(&dir, format!("{name}_graph_indicator.txt"))?;
    let graph_labels_file = SourceFile::load(&dir, format!("{name}_graph_labels.txt"))?;
    let node_labels_file = SourceFile::load(&dir, format!("{name}_node_labels.txt"))?;

    let indicator_values = indicator.parse_ints()?;
    let raw_graph_labels = graph_labels_file.parse_ints()?;
    let raw_node_labels = node_labels_file.parse_ints()?;

    let total_nodes = indicator_values.len();
    let num_graphs = raw_graph_labels.len();
    if raw_node_labels.len() > total_nodes {
        return Err(DataError::NodeWithoutGraph {
            file: node_labels_file.name,
            line: total_nodes + 1,
            node: total_nodes + 1,
        });
    }
    if raw_node_labels.len() < total_nodes {
        return Err(DataError::Malformed {
            file: node_labels_file.name,
            line: raw_node_labels.len() + 1,
            message: format!(
                "node {} has no label ({} nodes in indicator)",
                raw_node_labels.len() + 1,
                total_nodes
            ),
        });
    }

    // Node -> graph membership, with local indices assigned in global order.
    let mut graph_of_node = vec![0usize; total_nodes];
    let mut local_index = vec![0usize; total_nodes];
    let mut node_counts = vec![0usize; num_graphs];
    for (i, &value) in indicator_values.iter().enumerate() {
        if value < 1 || value > num_graphs as i64 {
            return Err(DataError::DanglingIndicator {
                file: indicator.name,
                line: i + 1,
                value,
            });
        }
        let g = (value - 1) as usize;
        graph_of_node[i] = g;
        local_index[i] = node_counts[g];
        node_counts[g] += 1;
    }
    if let Some(g) = node_counts.iter().position(|&c| c == 0) {
        return Err(DataError::DanglingIndicator {
            file: graph_labels_file.name,
            line: g + 1,
            value: raw_graph_labels[g],
        });
    }

    let (node_labels, num_node_classes) = remap(&raw_node_labels);
    let (graph_labels, num_graph_classes) = remap(&raw_graph_labels);

    // Directed edge lines; each undirected edge must appear exactly twice.
    let mut neighbors: Vec<Vec<Vec<usize>>> = node_counts
        .iter()
        .map(|&c| vec![Vec::new(); c])
        .collect();
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, raw) in adjacency.lines.iter().enumerate() {
        let line = i + 1;
        let err = |message: String| DataError::Malformed {
            file: adjacency.name.clone(),
            line,
            message,
        };
        let mut parts = raw.split(',');
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a.trim(), b.trim()),
            _ => return Err(err(format!("expected \"i, j\", got {raw:?}"))),
        };
        let src: i64 = a
            .parse()
            .map_err(|_| err(format!("bad node id {a:?}")))?;
        let dst: i64 = b
            .parse()
            .map_err(|_| err(format!("bad node id {b:?}")))?;
        for &endpoint in &[src, dst] {
            if endpoint < 1 || endpoint > total_nodes as i64 {
                return Err(DataError::UnknownNode {
                    file: adjacency.name,
                    line,
                    node: endpoint,
                });
            }
        }
        let (u, v) = ((src - 1) as usize, (dst - 1) as usize);
        if u == v {
            return Err(err(format!("self-loop at node {src}")));
        }
        if graph_of_node[u] != graph_of_node[v] {
            return Err(err(format!(
                "edge {src} -> {dst} crosses graphs {} and {}",
                graph_of_node[u] + 1,
                graph_of_node[v] + 1
            )));
        }
        if seen.insert((u, v), line).is_some() {
            return Err(err(format!("duplicate edge {src} -> {dst}")));
        }
        neighbors[graph_of_node[u]][local_index[u]].push(local_index[v]);
    }
    for (&(u, v), &line) in &seen {
        if !seen.contains_key(&(v, u)) {
            return Err(DataError::Malformed {
                file: adjacency.name,
                line,
                message: format!("edge {} -> {} has no reverse direction", u + 1, v + 1),
            });
        }
    }

    let mut per_graph_labels: Vec<Vec<usize>> = node_counts.iter().map(|&c| vec![0; c]).collect();
    for v in 0..total_nodes {
        per_graph_labels[graph_of_node[v]][local_index[v]] = node_labels[v];
    }

    let graphs = neighbors
        .into_iter()
        .zip(per_graph_labels)
        .zip(&graph_labels)
        .enumerate()
        .map(|(g, ((adj, labels), &label))| {
            Graph::new(adj, labels, label, num_node_classes).map_err(|e| match e {
                DataError::InvalidGraph { message, .. } => DataError::InvalidGraph {
                    graph: g + 1,
                    message,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    GraphDataset::new(name, graphs, num_node_classes, num_graph_classes)
}

/// Writes `ds` back out in the TU layout (inverse of [`parse_tu_dataset`],
/// with already-remapped labels as the raw values).
pub fn write_tu_dataset(ds: &GraphDataset, root: &Path) -> Result<(), DataError> {
    let dir = root.join(&ds.name);
    let io_err = |path: &Path, e: std::io::Error| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;

    let mut adjacency = String::new();
    let mut indicator = String::new();
    let mut graph_labels = String::new();
    let mut node_labels = String::new();
    let mut offset = 0usize;
    for (g, graph) in ds.graphs().iter().enumerate() {
        graph_labels.push_str(&format!("{}\n", graph.graph_label()));
        for v in 0..graph.node_count() {
            indicator.push_str(&format!("{}\n", g + 1));
            node_labels.push_str(&format!("{}\n", graph.node_label(v)));
            for &w in graph.neighbors(v) {
                adjacency.push_str(&format!("{}, {}\n", offset + v + 1, offset + w + 1));
            }
        }
        offset += graph.node_count();
    }

    for (name, content) in [
        (format!("{}_A.txt", ds.name), adjacency),
        (format!("{}_graph_indicator.txt", ds.name), indicator),
        (format!("{}_graph_labels.txt", ds.name), graph_labels),
        (format!("{}_node_labels.txt", ds.name), node_labels),
    ] {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        f.write_all(content.as_bytes()).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}
