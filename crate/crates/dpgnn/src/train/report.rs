//! Per-run output files: the training-curves CSV and the summary document.

use std::fmt::Write as _;

use super::{CvResult, EpochRecord};

/// Comma-separated curves, one row per (fold, epoch):
/// `fold,epoch,lr,train_acc,val_acc,l1,l2,l3,l4,l5,combined`.
pub fn write_curves_csv(fold_records: &[Vec<EpochRecord>]) -> String {
    let mut out = String::from("fold,epoch,lr,train_acc,val_acc,l1,l2,l3,l4,l5,combined\n");
    for (fold, records) in fold_records.iter().enumerate() {
        for r in records {
            let _ = writeln!(
                out,
                "{fold},{},{},{},{},{},{},{},{},{},{}",
                r.epoch,
                r.lr,
                r.train_accuracy,
                r.validation_accuracy,
                r.losses.l1,
                r.losses.l2,
                r.losses.l3,
                r.losses.l4,
                r.losses.l5,
                r.losses.combined
            );
        }
    }
    out
}

/// Key-value summary: config echo first, then the selection outcome. The
/// key-value layout keeps it machine-parseable for grid-search resume.
pub fn format_summary(config_echo: &str, result: &CvResult, label: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(label) = label {
        let _ = writeln!(out, "# {label}");
    }
    out.push_str(config_echo);
    if !config_echo.ends_with('\n') {
        out.push('\n');
    }
    let _ = writeln!(out, "selected_epoch = {}", result.selected_epoch);
    let _ = writeln!(
        out,
        "best_mean_validation_accuracy = {}",
        result.best_mean_validation_accuracy
    );
    let _ = writeln!(out, "std_dev = {}", result.std_dev);
    let folds: Vec<String> = result
        .per_fold_accuracy
        .iter()
        .map(f64::to_string)
        .collect();
    let _ = writeln!(out, "per_fold_accuracy = {}", folds.join(","));
    let _ = writeln!(
        out,
        "summary = {:.4} +/- {:.4} at epoch {}",
        result.best_mean_validation_accuracy, result.std_dev, result.selected_epoch
    );
    out
}

/// Pulls `best_mean_validation_accuracy` back out of a summary document.
pub fn parse_summary_accuracy(text: &str) -> Option<f64> {
    text.lines().find_map(|line| {
        line.strip_prefix("best_mean_validation_accuracy = ")
            .and_then(|v| v.trim().parse().ok())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossValues;

    fn record(epoch: usize, val: f64) -> EpochRecord {
        EpochRecord {
            epoch,
            lr: 0.01,
            train_accuracy: 0.5,
            validation_accuracy: val,
            losses: LossValues::default(),
        }
    }

    #[test]
    fn curves_row_count_is_folds_times_epochs() {
        let records = vec![
            vec![record(0, 0.5), record(1, 0.6)],
            vec![record(0, 0.4), record(1, 0.7)],
        ];
        let csv = write_curves_csv(&records);
        assert_eq!(csv.lines().count(), 1 + 2 * 2);
        assert!(csv.starts_with("fold,epoch,lr,train_acc,val_acc,l1,"));
    }

    #[test]
    fn summary_round_trips_accuracy() {
        let result = CvResult {
            fold_records: vec![vec![record(0, 0.875)]],
            selected_epoch: 0,
            best_mean_validation_accuracy: 0.875,
            per_fold_accuracy: vec![0.875],
            std_dev: 0.0,
        };
        let text = format_summary("seed = 0\n", &result, Some("test run"));
        assert_eq!(parse_summary_accuracy(&text), Some(0.875));
        assert!(text.contains("selected_epoch = 0"));
    }
}
