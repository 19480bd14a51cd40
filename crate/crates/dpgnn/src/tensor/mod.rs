//! Dense 2-D tensors and the reverse-mode differentiation machinery built on
//! top of them.
//!
//! The subsystem is deliberately minimal: row-major matrices, a dynamically
//! recorded [`Tape`] of operations, a [`ParamStore`] holding trainable
//! parameters with their Adam state, and exactly the operators the model
//! needs. No broadcasting beyond row-wise bias/scale, no tensors of rank
//! other than 2.

mod store;
mod tape;

pub use store::{ParamId, ParamStore, Parameter, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use tape::{BatchNormState, Mode, Tape, Var};

use std::cmp::Ordering;

use rand::Rng;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("data length {len} does not match shape {rows}x{cols}")]
    BadDataLength { rows: usize, cols: usize, len: usize },
    #[error("batch norm in train mode needs at least 2 rows, got {rows}")]
    BatchTooSmall { rows: usize },
    #[error("segment id {id} out of range for {segments} segments")]
    SegmentOutOfRange { id: usize, segments: usize },
    #[error("segment map must be non-decreasing (row {row})")]
    SegmentNotSorted { row: usize },
    #[error("neighbor index {index} out of range for {rows} rows")]
    NeighborOutOfRange { index: usize, rows: usize },
    #[error("label {label} out of range for {classes} classes (row {row})")]
    LabelOutOfRange {
        label: usize,
        classes: usize,
        row: usize,
    },
    #[error("backward requires a scalar loss, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("tape already consumed by a previous backward pass")]
    TapeConsumed,
    #[error("negative loss weight {value}")]
    NegativeWeight { value: f64 },
}

/// Dense row-major matrix of scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, TensorError> {
        if data.len() != rows * cols {
            return Err(TensorError::BadDataLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: T) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    /// Builds from nested rows; all rows must share a length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, TensorError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(TensorError::BadDataLength {
                    rows: r,
                    cols: c,
                    len: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    /// Glorot-uniform initialization in +-sqrt(6 / (rows + cols)).
    pub fn glorot_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
            .collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: T) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn scalar_value(&self) -> T {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn fill(&mut self, value: T) {
        self.data.fill(value);
    }

    pub fn map<F: Fn(T) -> T>(&self, f: F) -> Tensor<T> {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs().to_f64())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Lossy precision change, used by checkpoint load/save.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.to_f64()).collect()
    }

    pub fn from_f64_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self, TensorError> {
        Self::new(rows, cols, data.iter().map(|&v| T::from_f64(v)).collect())
    }
}

/// out = a * b for (m x k) x (k x n).
pub(crate) fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    debug_assert_eq!(a.cols, b.rows);
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = Tensor::zeros(m, n);
    for i in 0..m {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for (p, &a_ip) in a_row.iter().enumerate().take(k) {
            let b_row = b.row(p);
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += a_ip * bv;
            }
        }
    }
    out
}

/// out = a^T * b for (m x k)^T x (m x n) -> (k x n). Used for weight grads.
pub(crate) fn matmul_at_b<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    debug_assert_eq!(a.rows, b.rows);
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = Tensor::zeros(k, n);
    for i in 0..m {
        let a_row = a.row(i);
        let b_row = b.row(i);
        for (p, &a_ip) in a_row.iter().enumerate().take(k) {
            let out_row = out.row_mut(p);
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += a_ip * bv;
            }
        }
    }
    out
}

/// out = a * b^T for (m x n) x (k x n)^T -> (m x k). Used for input grads.
pub(crate) fn matmul_a_bt<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    debug_assert_eq!(a.cols, b.cols);
    let (m, n, k) = (a.rows, a.cols, b.rows);
    let mut out = Tensor::zeros(m, k);
    for i in 0..m {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for (p, o) in out_row.iter_mut().enumerate().take(k) {
            let b_row = b.row(p);
            let mut acc = T::zero();
            for (&av, &bv) in a_row.iter().zip(b_row).take(n) {
                acc += av * bv;
            }
            *o += acc;
        }
    }
    out
}

/// Sums `values` in a canonical (value-sorted) order, so the result depends
/// only on the multiset of inputs and not on their arrangement. This is what
/// makes the aggregation operators exactly permutation-invariant.
pub(crate) fn canonical_sum<T: Scalar>(values: &mut [T]) -> T {
    values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    values.iter().copied().fold(T::zero(), |acc, v| acc + v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let eye = Tensor::<f64>::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let w = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(matmul(&eye, &w), w);
    }

    #[test]
    fn matmul_transposed_variants_agree_with_naive() {
        let a = Tensor::<f64>::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![1.0, -1.0], vec![0.5, 2.0], vec![-3.0, 0.0]]).unwrap();
        let ab = matmul(&a, &b);
        // a^T * ab == matmul_at_b(a, ab)
        let atab = matmul_at_b(&a, &ab);
        for p in 0..3 {
            for q in 0..2 {
                let mut want = 0.0;
                for i in 0..2 {
                    want += a.get(i, p) * ab.get(i, q);
                }
                assert!((atab.get(p, q) - want).abs() < 1e-12);
            }
        }
        // ab * b^T == matmul_a_bt(ab, b)
        let abbt = matmul_a_bt(&ab, &b);
        for i in 0..2 {
            for p in 0..3 {
                let mut want = 0.0;
                for q in 0..2 {
                    want += ab.get(i, q) * b.get(p, q);
                }
                assert!((abbt.get(i, p) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn canonical_sum_is_order_independent() {
        let mut a = [0.1f64, 1e16, -1e16, 0.2, 7.0];
        let mut b = [7.0f64, -1e16, 0.2, 0.1, 1e16];
        assert_eq!(canonical_sum(&mut a).to_bits(), canonical_sum(&mut b).to_bits());
    }

    #[test]
    fn bad_data_length_rejected() {
        assert!(matches!(
            Tensor::<f64>::new(2, 2, vec![1.0, 2.0, 3.0]),
            Err(TensorError::BadDataLength { .. })
        ));
    }
}
