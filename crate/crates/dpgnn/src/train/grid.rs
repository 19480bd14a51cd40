//! Hyperparameter grid enumeration and search.

use super::{cross_validate, CvResult, TrainConfig, TrainError};
use crate::data::GraphDataset;
use crate::loss::LossWeights;
use crate::model::FirstLayerTransform;
use crate::scalar::Scalar;

/// The search axes. Enumeration order is the nested loop
/// hidden -> learning rate -> first-layer transform -> lambda vector,
/// each axis in its declared order.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperGrid {
    pub hidden_dims: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub first_layer: Vec<FirstLayerTransform>,
    pub lambdas: Vec<[f64; 4]>,
}

impl HyperGrid {
    /// The full search space: hidden {16, 32, 64} x lr {0.01, 0.001} x
    /// first transform {identical, mlp} x lambda in {0, 1}^4.
    pub fn full() -> Self {
        Self {
            hidden_dims: vec![16, 32, 64],
            learning_rates: vec![0.01, 0.001],
            first_layer: vec![FirstLayerTransform::Identical, FirstLayerTransform::Mlp],
            lambdas: Self::all_lambda_combinations(),
        }
    }

    /// All 16 corners of {0, 1}^4, in binary counting order with lambda2 as
    /// the most significant bit.
    pub fn all_lambda_combinations() -> Vec<[f64; 4]> {
        (0..16u8)
            .map(|bits| {
                [
                    f64::from(bits >> 3 & 1),
                    f64::from(bits >> 2 & 1),
                    f64::from(bits >> 1 & 1),
                    f64::from(bits & 1),
                ]
            })
            .collect()
    }

    /// The five probe vectors of the ablation sweep: all-off plus each single
    /// task.
    pub fn ablation_lambdas() -> Vec<[f64; 4]> {
        vec![
            [0.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    pub fn is_empty(&self) -> bool {
        self.hidden_dims.is_empty()
            || self.learning_rates.is_empty()
            || self.first_layer.is_empty()
            || self.lambdas.is_empty()
    }

    /// Deterministic, complete enumeration of configurations derived from
    /// `base`.
    pub fn enumerate(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &hidden in &self.hidden_dims {
            for &lr in &self.learning_rates {
                for &tf in &self.first_layer {
                    for &lambda in &self.lambdas {
                        out.push(TrainConfig {
                            hidden_dim: hidden,
                            initial_lr: lr,
                            first_layer_transform: tf,
                            weights: LossWeights::from_array(lambda),
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

/// One evaluated grid point; failures are recorded, never dropped.
#[derive(Debug)]
pub struct GridPoint {
    /// Position in the grid enumeration.
    pub index: usize,
    pub config: TrainConfig,
    pub outcome: Result<CvResult, String>,
}

impl GridPoint {
    pub fn accuracy(&self) -> Option<f64> {
        self.outcome
            .as_ref()
            .ok()
            .map(|r| r.best_mean_validation_accuracy)
    }
}

/// Cross-validates every grid point and ranks by best mean validation
/// accuracy, descending; ties and failures keep enumeration order, failures
/// ranked last. `completed` lets a caller skip already-finished points (for
/// resume): it receives the enumeration index and config, and may supply a
/// previously measured accuracy.
pub fn grid_search<T: Scalar>(
    ds: &GraphDataset,
    grid: &HyperGrid,
    base: &TrainConfig,
    k: usize,
    workers: usize,
    mut completed: impl FnMut(usize, &TrainConfig) -> Option<f64>,
) -> Result<Vec<GridPoint>, TrainError> {
    if grid.is_empty() {
        return Err(TrainError::BadConfig {
            field: "grid",
            message: "empty grid".into(),
        });
    }
    let mut points = Vec::new();
    for (index, config) in grid.enumerate(base).into_iter().enumerate() {
        if let Some(accuracy) = completed(index, &config) {
            points.push(GridPoint {
                index,
                config,
                outcome: Ok(CvResult {
                    fold_records: Vec::new(),
                    selected_epoch: 0,
                    best_mean_validation_accuracy: accuracy,
                    per_fold_accuracy: Vec::new(),
                    std_dev: 0.0,
                }),
            });
            continue;
        }
        let outcome = cross_validate::<T>(ds, &config, k, workers).map_err(|e| e.to_string());
        points.push(GridPoint {
            index,
            config,
            outcome,
        });
    }
    rank(&mut points);
    Ok(points)
}

fn rank(points: &mut [GridPoint]) {
    points.sort_by(|a, b| match (a.accuracy(), b.accuracy()) {
        (Some(x), Some(y)) => y
            .partial_cmp(&x)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.index.cmp(&b.index)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.index.cmp(&b.index),
    });
}
