//! The experimental protocol: mini-batch training with Adam and a halving
//! learning-rate schedule, per-epoch train/validation accuracy recording,
//! cross-validation with cross-fold epoch selection, grid search, and the
//! ablation sweep.

mod ablation;
mod cv;
mod grid;
mod report;

pub use ablation::{ablation_study, combine_helpful, AblationReport, AblationRow, AblationRowKind};
pub use cv::{cross_validate, select_best_epoch, CvResult};
pub use grid::{grid_search, GridPoint, HyperGrid};
pub use report::{format_summary, parse_summary_accuracy, write_curves_csv};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{make_batch, DataError, FoldSplit, GraphDataset};
use crate::loss::{compute_losses, predict, LossValues, LossWeights};
use crate::model::{DpGnnModel, FirstLayerTransform, ModelConfig, ModelError};
use crate::scalar::Scalar;
use crate::tensor::{Mode, ParamStore, Tape, TensorError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid train config: {field}: {message}")]
    BadConfig { field: &'static str, message: String },
    #[error("non-finite loss at epoch {epoch} on batch of graphs {batch_ids:?}")]
    NonFiniteLoss { epoch: usize, batch_ids: Vec<usize> },
    #[error("evaluate called with an empty id list")]
    EmptyEval,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Everything a single training run needs beyond the dataset itself.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_period: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub first_layer_transform: FirstLayerTransform,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 32,
            initial_lr: 0.01,
            lr_decay_factor: 0.5,
            lr_decay_period: 50,
            seed: 0,
            weights: LossWeights::zeros(),
            num_layers: 5,
            hidden_dim: 32,
            first_layer_transform: FirstLayerTransform::Identical,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |field: &'static str, message: String| Err(TrainError::BadConfig { field, message });
        if self.epochs == 0 {
            return bad("epochs", "must be >= 1".into());
        }
        if self.batch_size < 2 {
            return bad("batch_size", "must be >= 2 (batch norm)".into());
        }
        if !(self.initial_lr > 0.0) {
            return bad("initial_lr", format!("must be positive, got {}", self.initial_lr));
        }
        if !(self.lr_decay_factor > 0.0) {
            return bad("lr_decay_factor", "must be positive".into());
        }
        if self.lr_decay_period == 0 {
            return bad("lr_decay_period", "must be >= 1".into());
        }
        if self.num_layers == 0 {
            return bad("num_layers", "must be >= 1".into());
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim", "must be >= 1".into());
        }
        if self.weights.as_array().iter().any(|&w| w < 0.0) {
            return bad("weights", "must be non-negative".into());
        }
        Ok(())
    }

    pub fn model_config(&self, ds: &GraphDataset) -> ModelConfig {
        ModelConfig {
            num_layers: self.num_layers,
            hidden_dim: self.hidden_dim,
            num_node_classes: ds.num_node_classes(),
            num_graph_classes: ds.num_graph_classes(),
            first_layer_transform: self.first_layer_transform,
        }
    }
}

/// initial_lr * decay_factor^(epoch / decay_period), halving every 50 epochs
/// by default.
pub fn lr_at_epoch(cfg: &TrainConfig, epoch: usize) -> f64 {
    cfg.initial_lr * cfg.lr_decay_factor.powi((epoch / cfg.lr_decay_period) as i32)
}

/// Per-epoch record: post-epoch eval-mode accuracies plus the mean training
/// losses observed during the optimizer steps.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
    pub losses: LossValues,
}

/// What the optimizer pass itself observed.
#[derive(Clone, Debug, Default)]
pub struct TrainEpochStats {
    /// Mean of the batch-reduced losses over the epoch's optimizer steps.
    pub losses: LossValues,
    /// Accuracy of task-1 predictions collected during the pass (train mode).
    pub seen_accuracy: f64,
    pub steps: usize,
}

/// One optimization pass over the training ids: shuffle, batch, forward,
/// backward, Adam. The final partial batch is skipped when it has a single
/// graph (batch norm needs two rows).
pub fn train_epoch<T: Scalar>(
    model: &mut DpGnnModel<T>,
    store: &mut ParamStore<T>,
    ds: &GraphDataset,
    train_ids: &[usize],
    cfg: &TrainConfig,
    epoch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TrainEpochStats, TrainError> {
    let lr = lr_at_epoch(cfg, epoch);
    let mut order = train_ids.to_vec();
    order.shuffle(rng);

    let mut sums = LossValues::default();
    let mut steps = 0usize;
    let mut seen = 0usize;
    let mut correct = 0usize;
    for chunk in order.chunks(cfg.batch_size) {
        if chunk.len() == 1 {
            continue;
        }
        let batch = make_batch::<T>(ds, chunk)?;
        let mut tape = Tape::new();
        let output = model.forward(&mut tape, store, &batch, Mode::Train)?;
        let breakdown = compute_losses(&mut tape, &output, &batch, &cfg.weights)?;
        let values = breakdown.values(&tape);
        if !values.combined.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                batch_ids: chunk.to_vec(),
            });
        }
        let predictions = predict(tape.value(output.graph_scores));
        correct += predictions
            .iter()
            .zip(&batch.graph_labels)
            .filter(|(p, y)| p == y)
            .count();
        seen += batch.num_graphs();

        tape.backward(breakdown.combined, store)?;
        store.adam_step(lr);

        sums.l1 += values.l1;
        sums.l2 += values.l2;
        sums.l3 += values.l3;
        sums.l4 += values.l4;
        sums.l5 += values.l5;
        sums.combined += values.combined;
        steps += 1;
    }
    let denom = steps.max(1) as f64;
    Ok(TrainEpochStats {
        losses: LossValues {
            l1: sums.l1 / denom,
            l2: sums.l2 / denom,
            l3: sums.l3 / denom,
            l4: sums.l4 / denom,
            l5: sums.l5 / denom,
            combined: sums.combined / denom,
        },
        seen_accuracy: if seen == 0 { 0.0 } else { correct as f64 / seen as f64 },
        steps,
    })
}

/// Eval-mode accuracy and per-task losses over `ids`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalStats {
    pub accuracy: f64,
    pub losses: LossValues,
}

/// Deterministic eval-mode pass. Batch norm uses running statistics, so the
/// result does not depend on the chunk size used here.
pub fn evaluate<T: Scalar>(
    model: &mut DpGnnModel<T>,
    store: &ParamStore<T>,
    ds: &GraphDataset,
    ids: &[usize],
    batch_size: usize,
    weights: &LossWeights,
) -> Result<EvalStats, TrainError> {
    if ids.is_empty() {
        return Err(TrainError::EmptyEval);
    }
    let mut correct = 0usize;
    let mut graph_weighted = [0.0f64; 2]; // l1, l4 sums weighted by graphs
    let mut node_weighted = [0.0f64; 3]; // l2, l3, l5 sums weighted by nodes
    let mut total_nodes = 0usize;
    for chunk in ids.chunks(batch_size.max(1)) {
        let batch = make_batch::<T>(ds, chunk)?;
        let mut tape = Tape::new();
        let output = model.forward(&mut tape, store, &batch, Mode::Eval)?;
        let breakdown = compute_losses(&mut tape, &output, &batch, weights)?;
        let values = breakdown.values(&tape);
        let predictions = predict(tape.value(output.graph_scores));
        correct += predictions
            .iter()
            .zip(&batch.graph_labels)
            .filter(|(p, y)| p == y)
            .count();
        let g = batch.num_graphs() as f64;
        let n = batch.node_count() as f64;
        graph_weighted[0] += values.l1 * g;
        graph_weighted[1] += values.l4 * g;
        node_weighted[0] += values.l2 * n;
        node_weighted[1] += values.l3 * n;
        node_weighted[2] += values.l5 * n;
        total_nodes += batch.node_count();
    }
    let g = ids.len() as f64;
    let n = total_nodes as f64;
    let losses = LossValues {
        l1: graph_weighted[0] / g,
        l2: node_weighted[0] / n,
        l3: node_weighted[1] / n,
        l4: graph_weighted[1] / g,
        l5: node_weighted[2] / n,
        combined: graph_weighted[0] / g
            + weights.lambda2 * node_weighted[0] / n
            + weights.lambda3 * node_weighted[1] / n
            + weights.lambda4 * graph_weighted[1] / g
            + weights.lambda5 * node_weighted[2] / n,
    };
    Ok(EvalStats {
        accuracy: correct as f64 / g,
        losses,
    })
}

/// Trains a freshly seeded model on one fold for the configured number of
/// epochs, evaluating on the train and validation ids after every epoch.
///
/// The model is re-initialized with `cfg.seed + fold_index` so folds are
/// independent and the whole run is reproducible.
pub fn run_fold<T: Scalar>(
    ds: &GraphDataset,
    fold: &FoldSplit,
    cfg: &TrainConfig,
) -> Result<Vec<EpochRecord>, TrainError> {
    run_fold_with_model::<T>(ds, fold, cfg).map(|(records, _, _)| records)
}

/// `run_fold` plus the trained model, for checkpointing and export.
pub fn run_fold_with_model<T: Scalar>(
    ds: &GraphDataset,
    fold: &FoldSplit,
    cfg: &TrainConfig,
) -> Result<(Vec<EpochRecord>, ParamStore<T>, DpGnnModel<T>), TrainError> {
    cfg.validate()?;
    let fold_seed = cfg.seed.wrapping_add(fold.fold_index as u64);
    let mut store = ParamStore::new();
    let mut model = DpGnnModel::<T>::new(cfg.model_config(ds), &mut store, fold_seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(fold_seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut records = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let stats = train_epoch(&mut model, &mut store, ds, &fold.train_ids, cfg, epoch, &mut rng)?;
        let train = evaluate(&mut model, &store, ds, &fold.train_ids, cfg.batch_size, &cfg.weights)?;
        let validation = evaluate(
            &mut model,
            &store,
            ds,
            &fold.validation_ids,
            cfg.batch_size,
            &cfg.weights,
        )?;
        records.push(EpochRecord {
            epoch,
            lr: lr_at_epoch(cfg, epoch),
            train_accuracy: train.accuracy,
            validation_accuracy: validation.accuracy,
            losses: stats.losses,
        });
    }
    Ok((records, store, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_toy_dataset, stratified_kfold, ToySpec};

    #[test]
    fn lr_schedule_matches_halving() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_at_epoch(&cfg, 0), 0.01);
        assert_eq!(lr_at_epoch(&cfg, 49), 0.01);
        assert_eq!(lr_at_epoch(&cfg, 50), 0.005);
        assert_eq!(lr_at_epoch(&cfg, 100), 0.0025);
        assert!((lr_at_epoch(&cfg, 299) - 0.0003125).abs() < 1e-15);
    }

    #[test]
    fn lr_schedule_is_non_increasing() {
        let cfg = TrainConfig {
            initial_lr: 0.003,
            ..TrainConfig::default()
        };
        let mut prev = f64::INFINITY;
        for epoch in 0..400 {
            let lr = lr_at_epoch(&cfg, epoch);
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn config_validation_names_fields() {
        let cfg = TrainConfig {
            batch_size: 1,
            ..TrainConfig::default()
        };
        match cfg.validate() {
            Err(TrainError::BadConfig { field, .. }) => assert_eq!(field, "batch_size"),
            other => panic!("expected BadConfig, got {other:?}"),
        }
    }

    #[test]
    fn step_count_matches_batching_arithmetic() {
        // 24 graphs, batch 8 -> exactly 3 optimizer steps.
        let ds = generate_toy_dataset(
            &ToySpec {
                graphs_per_class: 12,
                ..ToySpec::two_class_default()
            },
            5,
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 8,
            hidden_dim: 4,
            num_layers: 2,
            ..TrainConfig::default()
        };
        let mut store = ParamStore::new();
        let mut model = DpGnnModel::<f32>::new(cfg.model_config(&ds), &mut store, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ids: Vec<usize> = (0..ds.len()).collect();
        let stats = train_epoch(&mut model, &mut store, &ds, &ids, &cfg, 0, &mut rng).unwrap();
        assert_eq!(stats.steps, 3);
    }

    #[test]
    fn size_one_tail_batch_is_skipped() {
        let ds = generate_toy_dataset(
            &ToySpec {
                graphs_per_class: 5,
                ..ToySpec::two_class_default()
            },
            5,
        )
        .unwrap();
        // 10 graphs, batch 3 -> chunks 3,3,3,1; the final chunk is dropped.
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 3,
            hidden_dim: 4,
            num_layers: 1,
            ..TrainConfig::default()
        };
        let mut store = ParamStore::new();
        let mut model = DpGnnModel::<f32>::new(cfg.model_config(&ds), &mut store, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ids: Vec<usize> = (0..ds.len()).collect();
        let stats = train_epoch(&mut model, &mut store, &ds, &ids, &cfg, 0, &mut rng).unwrap();
        assert_eq!(stats.steps, 3);
    }

    #[test]
    fn zero_weights_make_combined_equal_l1() {
        let ds = generate_toy_dataset(&ToySpec::two_class_default(), 2).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 8,
            hidden_dim: 4,
            num_layers: 2,
            ..TrainConfig::default()
        };
        let folds = stratified_kfold(&ds, 5, 0).unwrap();
        let records = run_fold::<f64>(&ds, &folds[0], &cfg).unwrap();
        for r in &records {
            assert_eq!(r.losses.combined.to_bits(), r.losses.l1.to_bits());
        }
    }

    #[test]
    fn run_fold_is_deterministic() {
        let ds = generate_toy_dataset(&ToySpec::two_class_default(), 9).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            hidden_dim: 4,
            num_layers: 2,
            weights: LossWeights::from_array([1.0, 0.0, 0.0, 1.0]),
            ..TrainConfig::default()
        };
        let folds = stratified_kfold(&ds, 5, 2).unwrap();
        let a = run_fold::<f64>(&ds, &folds[1], &cfg).unwrap();
        let b = run_fold::<f64>(&ds, &folds[1], &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), cfg.epochs);
    }

    #[test]
    fn evaluate_is_batch_size_independent() {
        let ds = generate_toy_dataset(&ToySpec::two_class_default(), 4).unwrap();
        let cfg = TrainConfig {
            hidden_dim: 4,
            num_layers: 2,
            ..TrainConfig::default()
        };
        let mut store = ParamStore::new();
        let mut model = DpGnnModel::<f64>::new(cfg.model_config(&ds), &mut store, 3).unwrap();
        let ids: Vec<usize> = (0..ds.len()).collect();
        let w = LossWeights::from_array([1.0, 1.0, 1.0, 1.0]);
        let a = evaluate(&mut model, &store, &ds, &ids, 3, &w).unwrap();
        let b = evaluate(&mut model, &store, &ds, &ids, 20, &w).unwrap();
        assert_eq!(a.accuracy, b.accuracy);
        assert!((a.losses.combined - b.losses.combined).abs() < 1e-9);
    }

    #[test]
    fn empty_eval_rejected() {
        let ds = generate_toy_dataset(&ToySpec::two_class_default(), 1).unwrap();
        let cfg = TrainConfig {
            hidden_dim: 4,
            num_layers: 1,
            ..TrainConfig::default()
        };
        let mut store = ParamStore::new();
        let mut model = DpGnnModel::<f64>::new(cfg.model_config(&ds), &mut store, 0).unwrap();
        assert!(matches!(
            evaluate(&mut model, &store, &ds, &[], 4, &LossWeights::zeros()),
            Err(TrainError::EmptyEval)
        ));
    }
}
