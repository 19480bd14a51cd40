//! The five task losses, their batch reductions, and the weighted combined
//! objective.
//!
//! Graph-level losses (tasks 1 and 4) average over the graphs in the batch;
//! node-level losses (tasks 2, 3, 5) average over all nodes of all graphs.
//! Distribution targets are raw integer counts, never normalized.

use crate::data::Batch;
use crate::model::ForwardOutput;
use crate::scalar::Scalar;
use crate::tensor::{Tape, Tensor, TensorError, Var};

/// Weights of the four auxiliary tasks in the combined objective. The
/// hyperparameter search only visits {0, 1}, but any non-negative reals are
/// accepted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub lambda5: f64,
}

impl LossWeights {
    pub fn zeros() -> Self {
        Self::from_array([0.0; 4])
    }

    pub fn from_array(values: [f64; 4]) -> Self {
        Self {
            lambda2: values[0],
            lambda3: values[1],
            lambda4: values[2],
            lambda5: values[3],
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.lambda2, self.lambda3, self.lambda4, self.lambda5]
    }

    pub fn is_all_zero(&self) -> bool {
        self.as_array() == [0.0; 4]
    }

    fn validate(&self) -> Result<(), TensorError> {
        for value in self.as_array() {
            if value < 0.0 {
                return Err(TensorError::NegativeWeight { value });
            }
        }
        Ok(())
    }
}

/// The five batch-reduced loss scalars and their weighted combination, as
/// tape variables.
#[derive(Clone, Copy, Debug)]
pub struct LossBreakdown {
    pub l1: Var,
    pub l2: Var,
    pub l3: Var,
    pub l4: Var,
    pub l5: Var,
    pub combined: Var,
}

/// Plain numeric snapshot of a [`LossBreakdown`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossValues {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
    pub combined: f64,
}

impl LossBreakdown {
    pub fn values<T: Scalar>(&self, tape: &Tape<T>) -> LossValues {
        let read = |v: Var| tape.value(v).scalar_value().to_f64();
        LossValues {
            l1: read(self.l1),
            l2: read(self.l2),
            l3: read(self.l3),
            l4: read(self.l4),
            l5: read(self.l5),
            combined: read(self.combined),
        }
    }
}

/// Task 1: cross entropy of graph scores against graph labels, averaged over
/// the batch's graphs.
pub fn loss_graph_classification<T: Scalar>(
    tape: &mut Tape<T>,
    graph_scores: Var,
    graph_labels: &[usize],
) -> Result<Var, TensorError> {
    let rows = tape.softmax_cross_entropy(graph_scores, graph_labels)?;
    tape.mean_rows(rows)
}

/// Task 2: cross entropy of node-label scores, averaged over all nodes.
pub fn loss_node_label<T: Scalar>(
    tape: &mut Tape<T>,
    node_scores: Var,
    node_labels: &[usize],
) -> Result<Var, TensorError> {
    let rows = tape.softmax_cross_entropy(node_scores, node_labels)?;
    tape.mean_rows(rows)
}

/// Task 3: cross entropy of per-node graph-label scores against the label of
/// each node's graph, averaged over all nodes.
pub fn loss_graph_label_on_nodes<T: Scalar>(
    tape: &mut Tape<T>,
    node_graph_scores: Var,
    graph_labels: &[usize],
    node_to_graph: &[usize],
) -> Result<Var, TensorError> {
    let broadcast: Vec<usize> = node_to_graph.iter().map(|&g| graph_labels[g]).collect();
    let rows = tape.softmax_cross_entropy(node_graph_scores, &broadcast)?;
    tape.mean_rows(rows)
}

/// Task 4: row-wise MSE of predicted graph node distributions against the
/// integer count targets, averaged over the batch's graphs.
pub fn loss_graph_distribution<T: Scalar>(
    tape: &mut Tape<T>,
    graph_dist_pred: Var,
    targets: &Tensor<T>,
) -> Result<Var, TensorError> {
    let rows = tape.mse_rowwise(graph_dist_pred, targets)?;
    tape.mean_rows(rows)
}

/// Task 5: row-wise MSE of predicted neighborhood distributions against the
/// integer count targets, averaged over all nodes.
pub fn loss_neighborhood_distribution<T: Scalar>(
    tape: &mut Tape<T>,
    neigh_dist_pred: Var,
    targets: &Tensor<T>,
) -> Result<Var, TensorError> {
    let rows = tape.mse_rowwise(neigh_dist_pred, targets)?;
    tape.mean_rows(rows)
}

/// combined = l1 + lambda2 l2 + lambda3 l3 + lambda4 l4 + lambda5 l5.
///
/// Zero-weight terms still participate as `+ 0 * l_i`, which leaves the
/// value bitwise equal to the partial sum, so the all-zero configuration
/// reproduces l1 exactly.
pub fn combined_loss<T: Scalar>(
    tape: &mut Tape<T>,
    l1: Var,
    l2: Var,
    l3: Var,
    l4: Var,
    l5: Var,
    weights: &LossWeights,
) -> Result<LossBreakdown, TensorError> {
    weights.validate()?;
    let mut combined = l1;
    for (term, weight) in [
        (l2, weights.lambda2),
        (l3, weights.lambda3),
        (l4, weights.lambda4),
        (l5, weights.lambda5),
    ] {
        combined = tape.add_scaled(combined, term, T::from_f64(weight))?;
    }
    Ok(LossBreakdown {
        l1,
        l2,
        l3,
        l4,
        l5,
        combined,
    })
}

/// All five reduced losses plus the combination for one forward pass.
pub fn compute_losses<T: Scalar>(
    tape: &mut Tape<T>,
    output: &ForwardOutput,
    batch: &Batch<T>,
    weights: &LossWeights,
) -> Result<LossBreakdown, TensorError> {
    let l1 = loss_graph_classification(tape, output.graph_scores, &batch.graph_labels)?;
    let l2 = loss_node_label(tape, output.node_label_scores, &batch.node_labels)?;
    let l3 = loss_graph_label_on_nodes(
        tape,
        output.graph_label_scores,
        &batch.graph_labels,
        &batch.node_to_graph,
    )?;
    let l4 = loss_graph_distribution(tape, output.graph_dist_pred, &batch.graph_dist_targets)?;
    let l5 =
        loss_neighborhood_distribution(tape, output.neigh_dist_pred, &batch.neigh_dist_targets)?;
    combined_loss(tape, l1, l2, l3, l4, l5, weights)
}

/// Row-wise argmax with ties broken toward the lowest class index.
pub fn predict<T: Scalar>(scores: &Tensor<T>) -> Vec<usize> {
    (0..scores.rows())
        .map(|i| {
            let row = scores.row(i);
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent scalar-loop cross entropy, kept free of tape code.
    fn oracle_cross_entropy(scores: &[Vec<f64>], labels: &[usize]) -> Vec<f64> {
        scores
            .iter()
            .zip(labels)
            .map(|(row, &y)| {
                let sum: f64 = row.iter().map(|&s| s.exp()).sum();
                -row[y] + sum.ln()
            })
            .collect()
    }

    #[test]
    fn uniform_scores_give_log_classes() {
        let mut tape = Tape::<f64>::new();
        let scores = tape.constant(Tensor::zeros(3, 2));
        let l = loss_graph_classification(&mut tape, scores, &[0, 1, 0]).unwrap();
        assert_relative_eq!(
            tape.value(l).scalar_value(),
            2f64.ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn single_graph_formula() {
        let mut tape = Tape::<f64>::new();
        let scores = tape.constant(Tensor::from_rows(&[vec![2.0, 0.0]]).unwrap());
        let l = loss_graph_classification(&mut tape, scores, &[0]).unwrap();
        let expected = -2.0 + (2f64.exp() + 1.0).ln();
        assert_relative_eq!(tape.value(l).scalar_value(), expected, epsilon = 1e-9);
        assert!((expected - 0.126928).abs() < 1e-6);
    }

    #[test]
    fn batch_mean_matches_scalar_loop() {
        let rows = vec![
            vec![0.3, -1.2, 0.8],
            vec![2.0, 2.0, -0.5],
            vec![-3.0, 0.1, 0.2],
        ];
        let labels = [2, 0, 1];
        let mut tape = Tape::<f64>::new();
        let scores = tape.constant(Tensor::from_rows(&rows).unwrap());
        let l = loss_graph_classification(&mut tape, scores, &labels).unwrap();
        let want = oracle_cross_entropy(&rows, &labels).iter().sum::<f64>() / 3.0;
        assert_relative_eq!(tape.value(l).scalar_value(), want, epsilon = 1e-12);
    }

    #[test]
    fn node_loss_averages_over_all_nodes() {
        // 5 + 3 nodes from two graphs; reduction is by total node count.
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| vec![0.1 * i as f64, -0.2 * i as f64, 0.05])
            .collect();
        let labels = [0, 1, 2, 0, 1, 2, 0, 1];
        let mut tape = Tape::<f64>::new();
        let scores = tape.constant(Tensor::from_rows(&rows).unwrap());
        let l = loss_node_label(&mut tape, scores, &labels).unwrap();
        let want = oracle_cross_entropy(&rows, &labels).iter().sum::<f64>() / 8.0;
        assert_relative_eq!(tape.value(l).scalar_value(), want, epsilon = 1e-12);
    }

    #[test]
    fn graph_label_broadcast_over_nodes() {
        // Two graphs with opposite labels, all score rows identical.
        let row = vec![0.7, -0.4];
        let rows = vec![row.clone(), row.clone(), row.clone(), row.clone()];
        let mut tape = Tape::<f64>::new();
        let scores = tape.constant(Tensor::from_rows(&rows).unwrap());
        let l = loss_graph_label_on_nodes(&mut tape, scores, &[0, 1], &[0, 0, 1, 1]).unwrap();
        let per = oracle_cross_entropy(&rows, &[0, 0, 1, 1]);
        let want = per.iter().sum::<f64>() / 4.0;
        assert_relative_eq!(tape.value(l).scalar_value(), want, epsilon = 1e-12);
    }

    #[test]
    fn distribution_losses_match_arithmetic() {
        let mut tape = Tape::<f64>::new();
        let pred = tape.constant(Tensor::from_rows(&[vec![3.0, 1.0]]).unwrap());
        let target = Tensor::from_rows(&[vec![4.0, 2.0]]).unwrap();
        let l = loss_graph_distribution(&mut tape, pred, &target).unwrap();
        assert_relative_eq!(tape.value(l).scalar_value(), 1.0, epsilon = 1e-12);

        // All-zero prediction against [4, 2]: (16 + 4) / 2 = 10.
        let zeros = tape.constant(Tensor::zeros(1, 2));
        let l = loss_graph_distribution(&mut tape, zeros, &target).unwrap();
        assert_relative_eq!(tape.value(l).scalar_value(), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn neighborhood_loss_zero_prediction() {
        // Zero prediction against [1, 2]: (1 + 4) / 2 = 2.5.
        let mut tape = Tape::<f64>::new();
        let pred = tape.constant(Tensor::zeros(1, 2));
        let target = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let l = loss_neighborhood_distribution(&mut tape, pred, &target).unwrap();
        assert_relative_eq!(tape.value(l).scalar_value(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn combined_weight_arithmetic() {
        let mut tape = Tape::<f64>::new();
        let ones: Vec<Var> = (0..5).map(|_| tape.constant(Tensor::scalar(1.0))).collect();
        let all = combined_loss(
            &mut tape,
            ones[0],
            ones[1],
            ones[2],
            ones[3],
            ones[4],
            &LossWeights::from_array([1.0, 1.0, 1.0, 1.0]),
        )
        .unwrap();
        assert_eq!(tape.value(all.combined).scalar_value(), 5.0);
    }

    #[test]
    fn zero_weights_reproduce_l1_bitwise() {
        let mut tape = Tape::<f64>::new();
        let l1 = tape.constant(Tensor::scalar(0.731_058_578_630_004_9));
        let rest: Vec<Var> = (0..4)
            .map(|i| tape.constant(Tensor::scalar(2.2 + i as f64)))
            .collect();
        let b = combined_loss(
            &mut tape,
            l1,
            rest[0],
            rest[1],
            rest[2],
            rest[3],
            &LossWeights::zeros(),
        )
        .unwrap();
        assert_eq!(
            tape.value(b.combined).scalar_value().to_bits(),
            tape.value(l1).scalar_value().to_bits()
        );
    }

    #[test]
    fn mtrl_reduction_keeps_only_l2() {
        let mut tape = Tape::<f64>::new();
        let vars: Vec<Var> = (0..5)
            .map(|i| tape.constant(Tensor::scalar(1.0 + i as f64)))
            .collect();
        let b = combined_loss(
            &mut tape,
            vars[0],
            vars[1],
            vars[2],
            vars[3],
            vars[4],
            &LossWeights::from_array([1.0, 0.0, 0.0, 0.0]),
        )
        .unwrap();
        assert_eq!(tape.value(b.combined).scalar_value(), 1.0 + 2.0);
    }

    #[test]
    fn negative_weight_rejected() {
        let mut tape = Tape::<f64>::new();
        let v = tape.constant(Tensor::scalar(1.0));
        assert!(matches!(
            combined_loss(
                &mut tape,
                v,
                v,
                v,
                v,
                v,
                &LossWeights::from_array([0.0, -0.1, 0.0, 0.0])
            ),
            Err(TensorError::NegativeWeight { .. })
        ));
    }

    #[test]
    fn predict_argmax_and_ties() {
        let scores = Tensor::from_rows(&[
            vec![0.1, 0.9],
            vec![0.5, 0.5],
            vec![3.0, -1.0],
        ])
        .unwrap();
        assert_eq!(predict(&scores), vec![1, 0, 0]);
    }

    #[test]
    fn shift_invariance_of_cross_entropy() {
        let rows = vec![vec![0.2, -0.7, 1.1], vec![5.0, 4.0, 3.0]];
        let shifted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|v| v + 123.456).collect())
            .collect();
        let labels = [2, 0];
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(Tensor::from_rows(&rows).unwrap());
        let b = tape.constant(Tensor::from_rows(&shifted).unwrap());
        let la = loss_graph_classification(&mut tape, a, &labels).unwrap();
        let lb = loss_graph_classification(&mut tape, b, &labels).unwrap();
        assert_relative_eq!(
            tape.value(la).scalar_value(),
            tape.value(lb).scalar_value(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn overflow_guard_on_large_scores() {
        let mut tape = Tape::<f64>::new();
        let scores = tape.constant(Tensor::from_rows(&[vec![1000.0, 0.0]]).unwrap());
        let l = loss_graph_classification(&mut tape, scores, &[0]).unwrap();
        let v = tape.value(l).scalar_value();
        assert!(v.is_finite());
        assert!(v.abs() < 1e-9);
    }
}
