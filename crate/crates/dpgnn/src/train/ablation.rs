//! Ablation sweep over the auxiliary-task weights.
//!
//! Probes the all-off baseline and each auxiliary task alone, then combines
//! every individually helpful task (single-task accuracy at least the
//! baseline's) into one final configuration.

use super::{cross_validate, HyperGrid, TrainConfig, TrainError};
use crate::data::GraphDataset;
use crate::loss::LossWeights;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AblationRowKind {
    /// All auxiliary weights zero: the plain expressive backbone.
    Baseline,
    /// Exactly one auxiliary task enabled (0-based task offset: 0 -> task 2).
    SingleTask(usize),
    /// The combination of the individually helpful tasks.
    Combined,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub kind: AblationRowKind,
    pub lambda: [f64; 4],
    pub accuracy: f64,
    pub std_dev: f64,
}

/// Six rows: baseline, the four single-task probes, and the combined run.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn baseline(&self) -> &AblationRow {
        &self.rows[0]
    }

    pub fn combined(&self) -> &AblationRow {
        self.rows.last().expect("report always has a combined row")
    }

    /// Table-shaped text: lambda vector and accuracy per row, baseline first.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str("lambda        accuracy  std     role\n");
        for row in &self.rows {
            let lambda = format!(
                "[{},{},{},{}]",
                row.lambda[0], row.lambda[1], row.lambda[2], row.lambda[3]
            );
            let role = match row.kind {
                AblationRowKind::Baseline => "baseline",
                AblationRowKind::SingleTask(i) => {
                    // Tasks are numbered 2..=5 in the objective.
                    match i {
                        0 => "task 2 only",
                        1 => "task 3 only",
                        2 => "task 4 only",
                        _ => "task 5 only",
                    }
                }
                AblationRowKind::Combined => "combined helpful",
            };
            out.push_str(&format!(
                "{lambda:<13} {:.4}    {:.4}  {role}\n",
                row.accuracy, row.std_dev
            ));
        }
        out
    }
}

/// lambda_i = 1 exactly when the single-task probe for task i reached at
/// least the baseline accuracy.
pub fn combine_helpful(baseline_accuracy: f64, single_accuracies: &[f64; 4]) -> [f64; 4] {
    let mut combined = [0.0; 4];
    for (slot, &acc) in single_accuracies.iter().enumerate() {
        if acc >= baseline_accuracy {
            combined[slot] = 1.0;
        }
    }
    combined
}

/// Runs the six-configuration sweep with `base` fixed except for the
/// auxiliary weights.
pub fn ablation_study<T: Scalar>(
    ds: &GraphDataset,
    base: &TrainConfig,
    k: usize,
    workers: usize,
) -> Result<AblationReport, TrainError> {
    let mut rows = Vec::with_capacity(6);
    let mut single_accuracies = [0.0f64; 4];
    for (i, lambda) in HyperGrid::ablation_lambdas().into_iter().enumerate() {
        let cfg = TrainConfig {
            weights: LossWeights::from_array(lambda),
            ..base.clone()
        };
        let result = cross_validate::<T>(ds, &cfg, k, workers)?;
        let kind = if i == 0 {
            AblationRowKind::Baseline
        } else {
            single_accuracies[i - 1] = result.best_mean_validation_accuracy;
            AblationRowKind::SingleTask(i - 1)
        };
        rows.push(AblationRow {
            kind,
            lambda,
            accuracy: result.best_mean_validation_accuracy,
            std_dev: result.std_dev,
        });
    }
    let combined_lambda = combine_helpful(rows[0].accuracy, &single_accuracies);
    let cfg = TrainConfig {
        weights: LossWeights::from_array(combined_lambda),
        ..base.clone()
    };
    let result = cross_validate::<T>(ds, &cfg, k, workers)?;
    rows.push(AblationRow {
        kind: AblationRowKind::Combined,
        lambda: combined_lambda,
        accuracy: result.best_mean_validation_accuracy,
        std_dev: result.std_dev,
    });
    Ok(AblationReport { rows })
}
