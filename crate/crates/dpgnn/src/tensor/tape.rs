//! Dynamically recorded computation tape with reverse-mode differentiation.
//!
//! Every forward operator appends one entry holding the produced value plus
//! whatever intermediates its backward rule needs. [`Tape::backward`] walks
//! the record once in reverse, accumulating gradients into the
//! [`ParamStore`]. A tape belongs to a single forward pass; calling
//! `backward` twice is an error.
//!
//! The two aggregation operators (`segment_sum`, `neighbor_sum`) reduce each
//! output cell in a canonical value-sorted order, so their results depend
//! only on the multiset of contributions. Node relabelings therefore permute
//! outputs bitwise instead of merely approximately.

use std::sync::Arc;

use crate::scalar::Scalar;
use crate::tensor::store::{ParamId, ParamStore};
use crate::tensor::{canonical_sum, matmul, matmul_a_bt, matmul_at_b, Tensor, TensorError};

/// Forward/eval switch for batch normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Handle to a value recorded on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Running statistics owned by a batch-norm layer; updated in train mode.
#[derive(Clone, Debug)]
pub struct BatchNormState<T> {
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub eps: f64,
    pub momentum: f64,
}

impl<T: Scalar> BatchNormState<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            running_mean: vec![T::zero(); dim],
            running_var: vec![T::one(); dim],
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    pub fn dim(&self) -> usize {
        self.running_mean.len()
    }
}

/// Compressed neighbor lists for one batch: `targets[offsets[v]..offsets[v+1]]`
/// are the neighbors of node `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborLists {
    pub offsets: Vec<usize>,
    pub targets: Vec<usize>,
}

impl NeighborLists {
    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

enum Op<T> {
    Constant,
    Param(ParamId),
    Affine {
        x: Var,
        w: Var,
        b: Var,
    },
    Relu {
        x: Var,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normalized: Tensor<T>,
        inv_std: Vec<T>,
        train: bool,
    },
    SegmentSum {
        x: Var,
        segments: Vec<usize>,
    },
    NeighborSum {
        x: Var,
        adjacency: Arc<NeighborLists>,
    },
    SoftmaxCrossEntropy {
        scores: Var,
        labels: Vec<usize>,
        probs: Tensor<T>,
    },
    MseRowwise {
        pred: Var,
        target: Tensor<T>,
    },
    ConcatCols {
        left: Var,
        right: Var,
        left_cols: usize,
    },
    MeanRows {
        x: Var,
    },
    AddScaled {
        a: Var,
        b: Var,
        scale: T,
    },
}

struct Entry<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Record of one forward pass.
pub struct Tape<T> {
    entries: Vec<Entry<T>>,
    consumed: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The tensor produced at `v`.
    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.entries[v.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.entries.push(Entry { value, op });
        Var(self.entries.len() - 1)
    }

    /// Records an input that receives no gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Constant)
    }

    /// Records the current value of a trainable parameter; backward
    /// accumulates into its gradient slot in the store.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    /// out = x * w + b, with b (1 x d_out) broadcast over rows.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if xv.cols() != wv.rows() || bv.rows() != 1 || bv.cols() != wv.cols() {
            return Err(TensorError::ShapeMismatch {
                op: "affine",
                expected: format!("x(m x k) w(k x n) b(1 x n), k={}", xv.cols()),
                got: format!(
                    "x{:?} w{:?} b{:?}",
                    xv.shape(),
                    wv.shape(),
                    bv.shape()
                ),
            });
        }
        let mut out = matmul(xv, wv);
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            for (o, &bias) in row.iter_mut().zip(bv.row(0)) {
                *o += bias;
            }
        }
        Ok(self.push(out, Op::Affine { x, w, b }))
    }

    /// Elementwise max(0, x); subgradient at 0 is 0.
    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        self.push(out, Op::Relu { x })
    }

    /// Column-wise batch normalization over the rows of `x`.
    ///
    /// Train mode normalizes by batch statistics and updates `state`'s
    /// running estimates (momentum `state.momentum`, unbiased variance);
    /// eval mode normalizes by the running estimates and touches nothing.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        state: &mut BatchNormState<T>,
        mode: Mode,
    ) -> Result<Var, TensorError> {
        let xv = self.value(x);
        let (m, d) = xv.shape();
        if state.dim() != d || self.value(gamma).cols() != d || self.value(beta).cols() != d {
            return Err(TensorError::ShapeMismatch {
                op: "batch_norm",
                expected: format!("width {}", state.dim()),
                got: format!("x{:?}", xv.shape()),
            });
        }
        if mode == Mode::Train && m < 2 {
            return Err(TensorError::BatchTooSmall { rows: m });
        }
        let eps = T::from_f64(state.eps);
        let (mean, inv_std) = match mode {
            Mode::Train => {
                let count = T::from_usize(m);
                let mut mean = vec![T::zero(); d];
                for r in 0..m {
                    for (s, &v) in mean.iter_mut().zip(xv.row(r)) {
                        *s += v;
                    }
                }
                for s in &mut mean {
                    *s /= count;
                }
                let mut var = vec![T::zero(); d];
                for r in 0..m {
                    for (j, &v) in xv.row(r).iter().enumerate() {
                        let c = v - mean[j];
                        var[j] += c * c;
                    }
                }
                for s in &mut var {
                    *s /= count;
                }
                // Running stats use the unbiased variance.
                let momentum = T::from_f64(state.momentum);
                let keep = T::one() - momentum;
                let unbias = count / (count - T::one());
                for j in 0..d {
                    state.running_mean[j] = keep * state.running_mean[j] + momentum * mean[j];
                    state.running_var[j] = keep * state.running_var[j] + momentum * var[j] * unbias;
                }
                let inv_std = var.iter().map(|&v| (v + eps).sqrt().recip()).collect();
                (mean, inv_std)
            }
            Mode::Eval => {
                let inv_std = state
                    .running_var
                    .iter()
                    .map(|&v| (v + eps).sqrt().recip())
                    .collect();
                (state.running_mean.clone(), inv_std)
            }
        };
        let inv_std: Vec<T> = inv_std;
        let mut normalized = Tensor::zeros(m, d);
        for r in 0..m {
            let src = xv.row(r);
            let dst = normalized.row_mut(r);
            for j in 0..d {
                dst[j] = (src[j] - mean[j]) * inv_std[j];
            }
        }
        let gv = self.value(gamma);
        let bv = self.value(beta);
        let mut out = Tensor::zeros(m, d);
        for r in 0..m {
            let src = normalized.row(r);
            let dst = out.row_mut(r);
            for j in 0..d {
                dst[j] = gv.get(0, j) * src[j] + bv.get(0, j);
            }
        }
        Ok(self.push(
            out,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
                train: mode == Mode::Train,
            },
        ))
    }

    /// out[j] = sum of rows i with segments[i] == j; empty segments give zero
    /// rows. `segments` must be non-decreasing with ids < `num_segments`.
    pub fn segment_sum(
        &mut self,
        x: Var,
        segments: &[usize],
        num_segments: usize,
    ) -> Result<Var, TensorError> {
        let xv = self.value(x);
        let (m, d) = xv.shape();
        if segments.len() != m {
            return Err(TensorError::ShapeMismatch {
                op: "segment_sum",
                expected: format!("{m} segment ids"),
                got: format!("{}", segments.len()),
            });
        }
        for (row, win) in segments.windows(2).enumerate() {
            if win[1] < win[0] {
                return Err(TensorError::SegmentNotSorted { row: row + 1 });
            }
        }
        if let Some(&id) = segments.iter().find(|&&s| s >= num_segments) {
            return Err(TensorError::SegmentOutOfRange {
                id,
                segments: num_segments,
            });
        }
        let mut out = Tensor::zeros(num_segments, d);
        let mut scratch = Vec::new();
        let mut start = 0;
        while start < m {
            let seg = segments[start];
            let mut end = start + 1;
            while end < m && segments[end] == seg {
                end += 1;
            }
            for j in 0..d {
                scratch.clear();
                scratch.extend((start..end).map(|r| xv.get(r, j)));
                out.set(seg, j, canonical_sum(&mut scratch));
            }
            start = end;
        }
        Ok(self.push(
            out,
            Op::SegmentSum {
                x,
                segments: segments.to_vec(),
            },
        ))
    }

    /// out[v] = sum of x rows over the neighbors of v; isolated nodes give
    /// zero rows.
    pub fn neighbor_sum(
        &mut self,
        x: Var,
        adjacency: &Arc<NeighborLists>,
    ) -> Result<Var, TensorError> {
        let xv = self.value(x);
        let (m, d) = xv.shape();
        if adjacency.node_count() != m {
            return Err(TensorError::ShapeMismatch {
                op: "neighbor_sum",
                expected: format!("{m} nodes"),
                got: format!("{}", adjacency.node_count()),
            });
        }
        if let Some(&w) = adjacency.targets.iter().find(|&&w| w >= m) {
            return Err(TensorError::NeighborOutOfRange { index: w, rows: m });
        }
        let mut out = Tensor::zeros(m, d);
        let mut scratch = Vec::new();
        for v in 0..m {
            let neigh = adjacency.neighbors(v);
            if neigh.is_empty() {
                continue;
            }
            for j in 0..d {
                scratch.clear();
                scratch.extend(neigh.iter().map(|&w| xv.get(w, j)));
                out.set(v, j, canonical_sum(&mut scratch));
            }
        }
        Ok(self.push(
            out,
            Op::NeighborSum {
                x,
                adjacency: Arc::clone(adjacency),
            },
        ))
    }

    /// Row-wise cross entropy: out[i] = -scores[i][y_i] + log sum_c exp(scores[i][c]),
    /// computed with max subtraction. Output is m x 1.
    pub fn softmax_cross_entropy(
        &mut self,
        scores: Var,
        labels: &[usize],
    ) -> Result<Var, TensorError> {
        let sv = self.value(scores);
        let (m, c) = sv.shape();
        if labels.len() != m {
            return Err(TensorError::ShapeMismatch {
                op: "softmax_cross_entropy",
                expected: format!("{m} labels"),
                got: format!("{}", labels.len()),
            });
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= c) {
            return Err(TensorError::LabelOutOfRange {
                label,
                classes: c,
                row,
            });
        }
        let mut probs = Tensor::zeros(m, c);
        let mut out = Tensor::zeros(m, 1);
        for i in 0..m {
            let row = sv.row(i);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut denom = T::zero();
            for &s in row {
                denom += (s - max).exp();
            }
            let log_sum = denom.ln() + max;
            out.set(i, 0, log_sum - row[labels[i]]);
            let p = probs.row_mut(i);
            for (j, &s) in row.iter().enumerate() {
                p[j] = (s - max).exp() / denom;
            }
        }
        Ok(self.push(
            out,
            Op::SoftmaxCrossEntropy {
                scores,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    /// Row-wise mean squared error against a constant target: out is m x 1.
    pub fn mse_rowwise(&mut self, pred: Var, target: &Tensor<T>) -> Result<Var, TensorError> {
        let pv = self.value(pred);
        if pv.shape() != target.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "mse_rowwise",
                expected: format!("{:?}", pv.shape()),
                got: format!("{:?}", target.shape()),
            });
        }
        let (m, c) = pv.shape();
        let width = T::from_usize(c);
        let mut out = Tensor::zeros(m, 1);
        for i in 0..m {
            let mut acc = T::zero();
            for (&p, &t) in pv.row(i).iter().zip(target.row(i)) {
                let d = p - t;
                acc += d * d;
            }
            out.set(i, 0, acc / width);
        }
        Ok(self.push(
            out,
            Op::MseRowwise {
                pred,
                target: target.clone(),
            },
        ))
    }

    /// Horizontal concatenation [left, right].
    pub fn concat_cols(&mut self, left: Var, right: Var) -> Result<Var, TensorError> {
        let (lv, rv) = (self.value(left), self.value(right));
        if lv.rows() != rv.rows() {
            return Err(TensorError::ShapeMismatch {
                op: "concat_cols",
                expected: format!("{} rows", lv.rows()),
                got: format!("{} rows", rv.rows()),
            });
        }
        let (m, lc, rc) = (lv.rows(), lv.cols(), rv.cols());
        let mut out = Tensor::zeros(m, lc + rc);
        for i in 0..m {
            let dst = out.row_mut(i);
            dst[..lc].copy_from_slice(lv.row(i));
            dst[lc..].copy_from_slice(rv.row(i));
        }
        Ok(self.push(
            out,
            Op::ConcatCols {
                left,
                right,
                left_cols: lc,
            },
        ))
    }

    /// Mean of an m x 1 column, producing a 1 x 1 scalar.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var, TensorError> {
        let xv = self.value(x);
        if xv.cols() != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "mean_rows",
                expected: "m x 1".into(),
                got: format!("{:?}", xv.shape()),
            });
        }
        let m = xv.rows();
        let sum: T = xv.data().iter().copied().fold(T::zero(), |a, v| a + v);
        let out = Tensor::scalar(sum / T::from_usize(m));
        Ok(self.push(out, Op::MeanRows { x }))
    }

    /// out = a + scale * b, elementwise on equal shapes.
    pub fn add_scaled(&mut self, a: Var, b: Var, scale: T) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "add_scaled",
                expected: format!("{:?}", av.shape()),
                got: format!("{:?}", bv.shape()),
            });
        }
        let mut out = av.clone();
        for (o, &v) in out.data_mut().iter_mut().zip(bv.data()) {
            *o += scale * v;
        }
        Ok(self.push(out, Op::AddScaled { a, b, scale }))
    }

    /// Reverse pass from a scalar loss. Gradients of parameter leaves are
    /// accumulated into `store`; everything else is transient. The tape is
    /// consumed: a second call returns [`TensorError::TapeConsumed`].
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore<T>) -> Result<(), TensorError> {
        if self.consumed {
            return Err(TensorError::TapeConsumed);
        }
        {
            let lv = self.value(loss);
            if !lv.is_scalar() {
                return Err(TensorError::NonScalarLoss {
                    rows: lv.rows(),
                    cols: lv.cols(),
                });
            }
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.entries.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(T::one()));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match &self.entries[idx].op {
                Op::Constant => {}
                Op::Param(id) => store.accumulate_grad(*id, &g),
                Op::Affine { x, w, b } => {
                    let xv = &self.entries[x.0].value;
                    let wv = &self.entries[w.0].value;
                    let dx = matmul_a_bt(&g, wv);
                    let dw = matmul_at_b(xv, &g);
                    let mut db = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        let dst = db.row_mut(0);
                        for (o, &v) in dst.iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc_into(&mut grads, *x, dx);
                    acc_into(&mut grads, *w, dw);
                    acc_into(&mut grads, *b, db);
                }
                Op::Relu { x } => {
                    let xv = &self.entries[x.0].value;
                    let mut dx = g;
                    for (d, &v) in dx.data_mut().iter_mut().zip(xv.data()) {
                        if v <= T::zero() {
                            *d = T::zero();
                        }
                    }
                    acc_into(&mut grads, *x, dx);
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    normalized,
                    inv_std,
                    train,
                } => {
                    let gv = &self.entries[gamma.0].value;
                    let (m, d) = normalized.shape();
                    let mut dgamma = Tensor::zeros(1, d);
                    let mut dbeta = Tensor::zeros(1, d);
                    for r in 0..m {
                        for j in 0..d {
                            dgamma.row_mut(0)[j] += g.get(r, j) * normalized.get(r, j);
                            dbeta.row_mut(0)[j] += g.get(r, j);
                        }
                    }
                    let mut dx = Tensor::zeros(m, d);
                    if *train {
                        // Standard batch-norm backward with biased variance.
                        let count = T::from_usize(m);
                        for j in 0..d {
                            let gamma_j = gv.get(0, j);
                            let mut sum_dn = T::zero();
                            let mut sum_dn_xhat = T::zero();
                            for r in 0..m {
                                let dn = g.get(r, j) * gamma_j;
                                sum_dn += dn;
                                sum_dn_xhat += dn * normalized.get(r, j);
                            }
                            for r in 0..m {
                                let dn = g.get(r, j) * gamma_j;
                                let val = (count * dn - sum_dn
                                    - normalized.get(r, j) * sum_dn_xhat)
                                    * inv_std[j]
                                    / count;
                                dx.set(r, j, val);
                            }
                        }
                    } else {
                        for r in 0..m {
                            for j in 0..d {
                                dx.set(r, j, g.get(r, j) * gv.get(0, j) * inv_std[j]);
                            }
                        }
                    }
                    acc_into(&mut grads, *x, dx);
                    acc_into(&mut grads, *gamma, dgamma);
                    acc_into(&mut grads, *beta, dbeta);
                }
                Op::SegmentSum { x, segments } => {
                    let d = g.cols();
                    let mut dx = Tensor::zeros(segments.len(), d);
                    for (r, &seg) in segments.iter().enumerate() {
                        dx.row_mut(r).copy_from_slice(g.row(seg));
                    }
                    acc_into(&mut grads, *x, dx);
                }
                Op::NeighborSum { x, adjacency } => {
                    let (m, d) = self.entries[x.0].value.shape();
                    let mut dx = Tensor::zeros(m, d);
                    for v in 0..m {
                        let gr = g.row(v);
                        for &w in adjacency.neighbors(v) {
                            let dst = dx.row_mut(w);
                            for (o, &gv_) in dst.iter_mut().zip(gr) {
                                *o += gv_;
                            }
                        }
                    }
                    acc_into(&mut grads, *x, dx);
                }
                Op::SoftmaxCrossEntropy {
                    scores,
                    labels,
                    probs,
                } => {
                    let (m, c) = probs.shape();
                    let mut dscores = Tensor::zeros(m, c);
                    for i in 0..m {
                        let gi = g.get(i, 0);
                        let dst = dscores.row_mut(i);
                        for (j, &p) in probs.row(i).iter().enumerate() {
                            let indicator = if j == labels[i] { T::one() } else { T::zero() };
                            dst[j] = gi * (p - indicator);
                        }
                    }
                    acc_into(&mut grads, *scores, dscores);
                }
                Op::MseRowwise { pred, target } => {
                    let pv = &self.entries[pred.0].value;
                    let (m, c) = pv.shape();
                    let scale = T::from_f64(2.0) / T::from_usize(c);
                    let mut dpred = Tensor::zeros(m, c);
                    for i in 0..m {
                        let gi = g.get(i, 0);
                        let dst = dpred.row_mut(i);
                        for (j, (&p, &t)) in pv.row(i).iter().zip(target.row(i)).enumerate() {
                            dst[j] = gi * scale * (p - t);
                        }
                    }
                    acc_into(&mut grads, *pred, dpred);
                }
                Op::ConcatCols {
                    left,
                    right,
                    left_cols,
                } => {
                    let m = g.rows();
                    let rc = g.cols() - left_cols;
                    let mut dl = Tensor::zeros(m, *left_cols);
                    let mut dr = Tensor::zeros(m, rc);
                    for i in 0..m {
                        dl.row_mut(i).copy_from_slice(&g.row(i)[..*left_cols]);
                        dr.row_mut(i).copy_from_slice(&g.row(i)[*left_cols..]);
                    }
                    acc_into(&mut grads, *left, dl);
                    acc_into(&mut grads, *right, dr);
                }
                Op::MeanRows { x } => {
                    let m = self.entries[x.0].value.rows();
                    let share = g.scalar_value() / T::from_usize(m);
                    acc_into(&mut grads, *x, Tensor::filled(m, 1, share));
                }
                Op::AddScaled { a, b, scale } => {
                    let mut db = g.clone();
                    for v in db.data_mut() {
                        *v *= *scale;
                    }
                    acc_into(&mut grads, *a, g);
                    acc_into(&mut grads, *b, db);
                }
            }
        }
        Ok(())
    }
}

fn acc_into<T: Scalar>(grads: &mut [Option<Tensor<T>>], var: Var, delta: Tensor<T>) {
    match &mut grads[var.0] {
        Some(existing) => existing.add_assign(&delta),
        slot @ None => *slot = Some(delta),
    }
}
