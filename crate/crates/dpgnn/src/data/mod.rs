//! Graph datasets: validated in-memory graphs, supervision targets, TU-format
//! ingestion, mini-batching, fold splitting, and a synthetic fixture
//! generator.

mod batch;
mod folds;
mod toy;
mod tu;

pub use batch::{make_batch, Batch};
pub use folds::{stratified_kfold, FoldSplit};
pub use toy::{generate_toy_dataset, ToyClassSpec, ToySpec};
pub use tu::{parse_tu_dataset, write_tu_dataset};

use thiserror::Error;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("missing dataset file {path}")]
    MissingFile { path: String },
    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: edge endpoint references unknown node {node}")]
    UnknownNode {
        file: String,
        line: usize,
        node: i64,
    },
    #[error("{file}:{line}: node {node} assigned to no graph")]
    NodeWithoutGraph {
        file: String,
        line: usize,
        node: usize,
    },
    #[error("{file}:{line}: dangling graph indicator {value}")]
    DanglingIndicator {
        file: String,
        line: usize,
        value: i64,
    },
    #[error("graph {graph}: {message}")]
    InvalidGraph { graph: usize, message: String },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("batch ids must be non-empty")]
    EmptyBatch,
    #[error("graph id {id} out of range for {len} graphs")]
    GraphIdOutOfRange { id: usize, len: usize },
    #[error("k-fold split needs k >= 2, got {k}")]
    BadFoldCount { k: usize },
    #[error("class {class} has {members} graphs, fewer than k = {k}")]
    ClassTooSmall {
        class: usize,
        members: usize,
        k: usize,
    },
    #[error("toy dataset spec: {0}")]
    BadToySpec(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

/// Per-graph supervision targets for the two distribution-preserving tasks:
/// node-class counts over the whole graph and over each node's neighborhood.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistributionTargets {
    /// `graph_node_distribution[c]` = number of nodes with label `c`.
    pub graph_node_distribution: Vec<u32>,
    /// Row `v` counts the labels of v's neighbors; the row sums to degree(v).
    pub neighborhood_distributions: Vec<Vec<u32>>,
}

/// Node-labeled undirected graph with symmetric neighbor lists and
/// precomputed distribution targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    neighbors: Vec<Vec<usize>>,
    node_labels: Vec<usize>,
    graph_label: usize,
    num_node_classes: usize,
    targets: DistributionTargets,
}

impl Graph {
    /// Validates symmetry, duplicate entries, self-loops, and label ranges,
    /// then computes the distribution targets. Neighbor lists are stored
    /// sorted ascending.
    pub fn new(
        mut neighbors: Vec<Vec<usize>>,
        node_labels: Vec<usize>,
        graph_label: usize,
        num_node_classes: usize,
    ) -> Result<Self, DataError> {
        let n = node_labels.len();
        let fail = |message: String| DataError::InvalidGraph { graph: 0, message };
        if n == 0 {
            return Err(fail("graph has no nodes".into()));
        }
        if neighbors.len() != n {
            return Err(fail(format!(
                "{} neighbor lists for {} nodes",
                neighbors.len(),
                n
            )));
        }
        for (v, &label) in node_labels.iter().enumerate() {
            if label >= num_node_classes {
                return Err(fail(format!(
                    "node {v} label {label} exceeds {num_node_classes} classes"
                )));
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        for (v, list) in neighbors.iter().enumerate() {
            for pair in list.windows(2) {
                if pair[0] == pair[1] {
                    return Err(fail(format!("duplicate neighbor {} at node {v}", pair[0])));
                }
            }
            for &w in list {
                if w >= n {
                    return Err(fail(format!("neighbor {w} out of range at node {v}")));
                }
                if w == v {
                    return Err(fail(format!("self-loop at node {v}")));
                }
                if neighbors[w].binary_search(&v).is_err() {
                    return Err(fail(format!("asymmetric edge {v} -> {w}")));
                }
            }
        }
        let targets = distribution_targets_of(&neighbors, &node_labels, num_node_classes);
        Ok(Self {
            neighbors,
            node_labels,
            graph_label,
            num_node_classes,
            targets,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_labels.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn node_labels(&self) -> &[usize] {
        &self.node_labels
    }

    pub fn node_label(&self, v: usize) -> usize {
        self.node_labels[v]
    }

    pub fn graph_label(&self) -> usize {
        self.graph_label
    }

    pub fn num_node_classes(&self) -> usize {
        self.num_node_classes
    }

    pub fn targets(&self) -> &DistributionTargets {
        &self.targets
    }

    /// One-hot feature matrix: row v has a single 1 at column node_label(v).
    pub fn one_hot_features<T: Scalar>(&self) -> Tensor<T> {
        let mut out = Tensor::zeros(self.node_count(), self.num_node_classes);
        for (v, &label) in self.node_labels.iter().enumerate() {
            out.set(v, label, T::one());
        }
        out
    }

    /// Relabels nodes: position `v` of `perm` is the new index of old node `v`.
    /// Test support for the permutation-invariance properties.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph, DataError> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(DataError::InvalidGraph {
                graph: 0,
                message: "not a permutation".into(),
            });
        }
        let mut neighbors = vec![Vec::new(); n];
        let mut labels = vec![0; n];
        for v in 0..n {
            labels[perm[v]] = self.node_labels[v];
            neighbors[perm[v]] = self.neighbors[v].iter().map(|&w| perm[w]).collect();
        }
        Graph::new(neighbors, labels, self.graph_label, self.num_node_classes)
    }
}

/// Counts node classes per graph and per neighborhood.
pub fn compute_distribution_targets(g: &Graph) -> DistributionTargets {
    distribution_targets_of(&g.neighbors, &g.node_labels, g.num_node_classes)
}

fn distribution_targets_of(
    neighbors: &[Vec<usize>],
    node_labels: &[usize],
    num_node_classes: usize,
) -> DistributionTargets {
    let mut graph_node_distribution = vec![0u32; num_node_classes];
    for &label in node_labels {
        graph_node_distribution[label] += 1;
    }
    let neighborhood_distributions = neighbors
        .iter()
        .map(|list| {
            let mut row = vec![0u32; num_node_classes];
            for &w in list {
                row[node_labels[w]] += 1;
            }
            row
        })
        .collect();
    DistributionTargets {
        graph_node_distribution,
        neighborhood_distributions,
    }
}

/// A named collection of graphs which share contiguous 0-based label spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphDataset {
    pub name: String,
    graphs: Vec<Graph>,
    num_node_classes: usize,
    num_graph_classes: usize,
}

/// Summary statistics in the layout of the benchmark table.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetStats {
    pub num_graphs: usize,
    pub num_graph_classes: usize,
    pub num_node_classes: usize,
    pub avg_nodes: f64,
    pub avg_edges: f64,
    pub max_degree: usize,
}

impl GraphDataset {
    pub fn new(
        name: impl Into<String>,
        graphs: Vec<Graph>,
        num_node_classes: usize,
        num_graph_classes: usize,
    ) -> Result<Self, DataError> {
        if graphs.is_empty() {
            return Err(DataError::InvalidDataset("no graphs".into()));
        }
        for (i, g) in graphs.iter().enumerate() {
            if g.graph_label >= num_graph_classes {
                return Err(DataError::InvalidDataset(format!(
                    "graph {i} label {} exceeds {num_graph_classes} classes",
                    g.graph_label
                )));
            }
            if g.num_node_classes != num_node_classes {
                return Err(DataError::InvalidDataset(format!(
                    "graph {i} carries {} node classes, dataset has {num_node_classes}",
                    g.num_node_classes
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            graphs,
            num_node_classes,
            num_graph_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graph(&self, i: usize) -> &Graph {
        &self.graphs[i]
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn num_node_classes(&self) -> usize {
        self.num_node_classes
    }

    pub fn num_graph_classes(&self) -> usize {
        self.num_graph_classes
    }

    pub fn total_nodes(&self) -> usize {
        self.graphs.iter().map(Graph::node_count).sum()
    }

    pub fn graph_labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.graphs.iter().map(Graph::graph_label)
    }

    pub fn stats(&self) -> DatasetStats {
        let n = self.graphs.len();
        let total_nodes: usize = self.total_nodes();
        let total_edges: usize = self.graphs.iter().map(Graph::edge_count).sum();
        let max_degree = self
            .graphs
            .iter()
            .flat_map(|g| (0..g.node_count()).map(|v| g.degree(v)))
            .max()
            .unwrap_or(0);
        DatasetStats {
            num_graphs: n,
            num_graph_classes: self.num_graph_classes,
            num_node_classes: self.num_node_classes,
            avg_nodes: total_nodes as f64 / n as f64,
            avg_edges: total_edges as f64 / n as f64,
            max_degree,
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The six-node two-class toy graph used throughout the loss tests:
    /// four class-0 nodes, two class-1 nodes, and node 0 ("A") adjacent to
    /// one class-0 and two class-1 nodes.
    pub fn two_class_toy_graph() -> Graph {
        let edges = [(0, 1), (0, 4), (0, 5), (1, 2), (2, 3), (3, 4)];
        let mut neighbors = vec![Vec::new(); 6];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        Graph::new(neighbors, vec![0, 0, 0, 0, 1, 1], 0, 2).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::two_class_toy_graph;
    use super::*;

    #[test]
    fn toy_graph_distribution_targets() {
        let g = two_class_toy_graph();
        let t = compute_distribution_targets(&g);
        assert_eq!(t.graph_node_distribution, vec![4, 2]);
        assert_eq!(t.neighborhood_distributions[0], vec![1, 2]);
        for v in 0..g.node_count() {
            let row_sum: u32 = t.neighborhood_distributions[v].iter().sum();
            assert_eq!(row_sum as usize, g.degree(v));
        }
        let total: u32 = t.graph_node_distribution.iter().sum();
        assert_eq!(total as usize, g.node_count());
    }

    #[test]
    fn isolated_node_has_zero_neighborhood_row() {
        let g = Graph::new(vec![vec![]], vec![0], 0, 1).unwrap();
        let t = compute_distribution_targets(&g);
        assert_eq!(t.neighborhood_distributions[0], vec![0]);
    }

    #[test]
    fn asymmetric_adjacency_rejected() {
        let err = Graph::new(vec![vec![1], vec![]], vec![0, 0], 0, 1).unwrap_err();
        assert!(err.to_string().contains("asymmetric"));
    }

    #[test]
    fn self_loop_rejected() {
        let err = Graph::new(vec![vec![0]], vec![0], 0, 1).unwrap_err();
        assert!(err.to_string().contains("self-loop"));
    }

    #[test]
    fn one_hot_features_have_single_unit_entry() {
        let g = two_class_toy_graph();
        let f = g.one_hot_features::<f64>();
        for v in 0..g.node_count() {
            let row = f.row(v);
            assert_eq!(row.iter().filter(|&&x| x == 1.0).count(), 1);
            assert_eq!(row[g.node_label(v)], 1.0);
            assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn permuted_preserves_structure() {
        let g = two_class_toy_graph();
        let perm = vec![3, 5, 0, 1, 4, 2];
        let p = g.permuted(&perm).unwrap();
        assert_eq!(p.node_count(), g.node_count());
        assert_eq!(p.edge_count(), g.edge_count());
        for v in 0..g.node_count() {
            assert_eq!(p.node_label(perm[v]), g.node_label(v));
            assert_eq!(p.degree(perm[v]), g.degree(v));
        }
    }
}
