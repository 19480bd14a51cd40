//! Mini-batches as disjoint unions of member graphs.

use std::sync::Arc;

use super::{DataError, GraphDataset};
use crate::scalar::Scalar;
use crate::tensor::{NeighborLists, Tensor};

/// Disjoint union of a set of graphs: node rows are stacked in graph order,
/// edges are re-indexed with per-graph offsets, and all supervision targets
/// are stacked alongside.
#[derive(Clone, Debug)]
pub struct Batch<T> {
    pub graph_ids: Vec<usize>,
    /// (total nodes) x C_N one-hot features.
    pub features: Tensor<T>,
    /// Symmetric neighbor lists over batch-local node indices.
    pub adjacency: Arc<NeighborLists>,
    /// Non-decreasing map from node row to batch-local graph index.
    pub node_to_graph: Vec<usize>,
    pub node_labels: Vec<usize>,
    pub graph_labels: Vec<usize>,
    /// |batch| x C_N node-class counts per graph.
    pub graph_dist_targets: Tensor<T>,
    /// (total nodes) x C_N neighbor-class counts per node.
    pub neigh_dist_targets: Tensor<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn num_graphs(&self) -> usize {
        self.graph_ids.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_to_graph.len()
    }
}

/// Assembles the disjoint-union batch for `ids` (in the given order).
pub fn make_batch<T: Scalar>(ds: &GraphDataset, ids: &[usize]) -> Result<Batch<T>, DataError> {
    if ids.is_empty() {
        return Err(DataError::EmptyBatch);
    }
    for &id in ids {
        if id >= ds.len() {
            return Err(DataError::GraphIdOutOfRange { id, len: ds.len() });
        }
    }
    let c_n = ds.num_node_classes();
    let total_nodes: usize = ids.iter().map(|&id| ds.graph(id).node_count()).sum();

    let mut features = Tensor::zeros(total_nodes, c_n);
    let mut offsets = Vec::with_capacity(total_nodes + 1);
    let mut targets = Vec::new();
    let mut node_to_graph = Vec::with_capacity(total_nodes);
    let mut node_labels = Vec::with_capacity(total_nodes);
    let mut graph_labels = Vec::with_capacity(ids.len());
    let mut graph_dist = Tensor::zeros(ids.len(), c_n);
    let mut neigh_dist = Tensor::zeros(total_nodes, c_n);

    offsets.push(0);
    let mut base = 0usize;
    for (slot, &id) in ids.iter().enumerate() {
        let g = ds.graph(id);
        let t = g.targets();
        graph_labels.push(g.graph_label());
        for (c, &count) in t.graph_node_distribution.iter().enumerate() {
            graph_dist.set(slot, c, T::from_usize(count as usize));
        }
        for v in 0..g.node_count() {
            let row = base + v;
            features.set(row, g.node_label(v), T::one());
            node_to_graph.push(slot);
            node_labels.push(g.node_label(v));
            for &w in g.neighbors(v) {
                targets.push(base + w);
            }
            offsets.push(targets.len());
            for (c, &count) in t.neighborhood_distributions[v].iter().enumerate() {
                neigh_dist.set(row, c, T::from_usize(count as usize));
            }
        }
        base += g.node_count();
    }

    Ok(Batch {
        graph_ids: ids.to_vec(),
        features,
        adjacency: Arc::new(NeighborLists { offsets, targets }),
        node_to_graph,
        node_labels,
        graph_labels,
        graph_dist_targets: graph_dist,
        neigh_dist_targets: neigh_dist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Graph, GraphDataset};

    fn tiny_dataset() -> GraphDataset {
        // Graph 0: path 0-1-2 with labels 0,1,0; graph 1: edge 0-1, labels 1,1.
        let g0 = Graph::new(
            vec![vec![1], vec![0, 2], vec![1]],
            vec![0, 1, 0],
            0,
            2,
        )
        .unwrap();
        let g1 = Graph::new(vec![vec![1], vec![0]], vec![1, 1], 1, 2).unwrap();
        GraphDataset::new("tiny", vec![g0, g1], 2, 2).unwrap()
    }

    #[test]
    fn disjoint_union_layout() {
        let ds = tiny_dataset();
        let b = make_batch::<f64>(&ds, &[0, 1]).unwrap();
        assert_eq!(b.node_to_graph, vec![0, 0, 0, 1, 1]);
        assert_eq!(b.adjacency.neighbors(3), &[4]);
        assert_eq!(b.adjacency.neighbors(4), &[3]);
        assert_eq!(b.graph_labels, vec![0, 1]);
        // No edge crosses the segment boundary at row 3.
        for v in 0..3 {
            assert!(b.adjacency.neighbors(v).iter().all(|&w| w < 3));
        }
    }

    #[test]
    fn features_match_standalone_graphs() {
        let ds = tiny_dataset();
        let b = make_batch::<f64>(&ds, &[1, 0]).unwrap();
        let solo = ds.graph(1).one_hot_features::<f64>();
        for v in 0..2 {
            assert_eq!(b.features.row(v), solo.row(v));
        }
        assert_eq!(b.neigh_dist_targets.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn single_graph_batch_is_the_graph() {
        let ds = tiny_dataset();
        let b = make_batch::<f64>(&ds, &[0]).unwrap();
        assert_eq!(b.node_count(), 3);
        assert_eq!(b.num_graphs(), 1);
        assert_eq!(b.features, ds.graph(0).one_hot_features());
    }

    #[test]
    fn empty_and_out_of_range_rejected() {
        let ds = tiny_dataset();
        assert_eq!(make_batch::<f64>(&ds, &[]).unwrap_err(), DataError::EmptyBatch);
        assert!(matches!(
            make_batch::<f64>(&ds, &[7]),
            Err(DataError::GraphIdOutOfRange { id: 7, .. })
        ));
    }
}
