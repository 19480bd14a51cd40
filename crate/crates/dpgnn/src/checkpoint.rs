//! Model checkpoints: a self-describing text container.
//!
//! Layout (line oriented, space separated, `#` comments ignored):
//!
//! ```text
//! dpgnn-checkpoint v1
//! meta <key> <value>
//! tensor <name> <rows> <cols>
//! <cols values>        # one line per row, shortest round-trip f64 formatting
//! ```
//!
//! Both trainable parameters and batch-norm running statistics are stored;
//! values are written as 64-bit floats regardless of the training precision.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::model::DpGnnModel;
use crate::scalar::Scalar;
use crate::tensor::{ParamStore, Tensor};

const MAGIC: &str = "dpgnn-checkpoint v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot read checkpoint {path}: {message}")]
    Unreadable { path: String, message: String },
    #[error("cannot write checkpoint {path}: {message}")]
    Unwritable { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Corrupt {
        path: String,
        line: usize,
        message: String,
    },
    #[error("checkpoint is missing tensor {name}")]
    MissingTensor { name: String },
    #[error("checkpoint is missing meta key {key}")]
    MissingMeta { key: String },
    #[error("tensor {name}: expected shape {expected_rows}x{expected_cols}, found {rows}x{cols}")]
    ShapeMismatch {
        name: String,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
}

/// Parsed checkpoint contents.
#[derive(Clone, Debug, Default)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub tensors: BTreeMap<String, (usize, usize, Vec<f64>)>,
}

impl Checkpoint {
    pub fn meta(&self, key: &str) -> Result<&str, CheckpointError> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| CheckpointError::MissingMeta { key: key.into() })
    }
}

/// Serializes the store's parameters plus the model's running statistics.
pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    store: &ParamStore<T>,
    model: &DpGnnModel<T>,
    meta: &[(&str, String)],
) -> Result<(), CheckpointError> {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    for (key, value) in meta {
        out.push_str(&format!("meta {key} {value}\n"));
    }
    let mut write_tensor = |name: &str, rows: usize, cols: usize, values: &[f64]| {
        out.push_str(&format!("tensor {name} {rows} {cols}\n"));
        for row in values.chunks(cols.max(1)) {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    };
    for (_, param) in store.iter() {
        let (rows, cols) = param.value.shape();
        write_tensor(&param.name, rows, cols, &param.value.to_f64_vec());
    }
    for (name, values) in model.buffer_tensors() {
        write_tensor(&name, 1, values.len(), &values);
    }
    fs::write(path, out).map_err(|e| CheckpointError::Unwritable {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Parses a checkpoint file without touching any model.
pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let text = fs::read_to_string(path).map_err(|e| CheckpointError::Unreadable {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let path_str = path.display().to_string();
    let corrupt = |line: usize, message: String| CheckpointError::Corrupt {
        path: path_str.clone(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });
    let (first_no, first) = lines
        .next()
        .ok_or_else(|| corrupt(1, "empty checkpoint".into()))?;
    if first.trim() != MAGIC {
        return Err(corrupt(first_no + 1, format!("bad header {first:?}")));
    }
    let mut ckpt = Checkpoint::default();
    let mut pending: Option<(String, usize, usize, Vec<f64>)> = None;
    for (no, raw) in lines {
        let line = no + 1;
        let text = raw.trim();
        if let Some((name, rows, cols, mut values)) = pending.take() {
            for token in text.split_whitespace() {
                let v: f64 = token
                    .parse()
                    .map_err(|_| corrupt(line, format!("bad value {token:?}")))?;
                values.push(v);
            }
            if values.len() > rows * cols {
                return Err(corrupt(line, format!("too many values for tensor {name}")));
            }
            if values.len() < rows * cols {
                pending = Some((name, rows, cols, values));
            } else {
                ckpt.tensors.insert(name, (rows, cols, values));
            }
            continue;
        }
        let mut parts = text.split_whitespace();
        match parts.next() {
            Some("meta") => {
                let key = parts
                    .next()
                    .ok_or_else(|| corrupt(line, "meta needs a key".into()))?;
                let value: Vec<&str> = parts.collect();
                ckpt.meta.insert(key.to_string(), value.join(" "));
            }
            Some("tensor") => {
                let name = parts
                    .next()
                    .ok_or_else(|| corrupt(line, "tensor needs a name".into()))?;
                let rows: usize = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| corrupt(line, "tensor needs rows".into()))?;
                let cols: usize = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| corrupt(line, "tensor needs cols".into()))?;
                if rows * cols == 0 {
                    return Err(corrupt(line, format!("tensor {name} has zero size")));
                }
                pending = Some((name.to_string(), rows, cols, Vec::with_capacity(rows * cols)));
            }
            Some(other) => {
                return Err(corrupt(line, format!("unexpected directive {other:?}")));
            }
            None => {}
        }
    }
    if let Some((name, ..)) = pending {
        return Err(corrupt(
            text.lines().count(),
            format!("tensor {name} is truncated"),
        ));
    }
    Ok(ckpt)
}

/// Restores every parameter and running-statistics buffer from `ckpt` into
/// an already-constructed model/store pair of matching architecture.
pub fn load_into_model<T: Scalar>(
    ckpt: &Checkpoint,
    store: &mut ParamStore<T>,
    model: &mut DpGnnModel<T>,
) -> Result<(), CheckpointError> {
    let ids: Vec<_> = store.iter().map(|(id, p)| (id, p.name.clone())).collect();
    for (id, name) in ids {
        let (rows, cols, values) = ckpt
            .tensors
            .get(&name)
            .ok_or_else(|| CheckpointError::MissingTensor { name: name.clone() })?;
        let (er, ec) = store.value(id).shape();
        if (*rows, *cols) != (er, ec) {
            return Err(CheckpointError::ShapeMismatch {
                name,
                expected_rows: er,
                expected_cols: ec,
                rows: *rows,
                cols: *cols,
            });
        }
        *store.value_mut(id) = Tensor::from_f64_slice(*rows, *cols, values)
            .expect("shape checked above");
    }
    for (name, expected) in model.buffer_tensors() {
        let (_, _, values) = ckpt
            .tensors
            .get(&name)
            .ok_or_else(|| CheckpointError::MissingTensor { name: name.clone() })?;
        if values.len() != expected.len() {
            return Err(CheckpointError::ShapeMismatch {
                name,
                expected_rows: 1,
                expected_cols: expected.len(),
                rows: 1,
                cols: values.len(),
            });
        }
        model
            .load_buffer(&name, values)
            .map_err(|e| CheckpointError::MissingTensor { name: e.to_string() })?;
    }
    Ok(())
}
