//! Central finite-difference verification of analytic gradients.
//!
//! These helpers only ever call a caller-supplied loss closure; they know
//! nothing about the tape's backward rules, which keeps them an independent
//! oracle for the analytic path.

use crate::scalar::Scalar;
use crate::tensor::{ParamStore, Tensor};

/// One gradient element that failed the comparison.
#[derive(Clone, Debug)]
pub struct GradMismatch {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// |a - b| relative to the larger magnitude.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Central difference (f(x + h) - f(x - h)) / 2h of a scalar function.
pub fn central_diff<F: FnMut(f64) -> f64>(mut f: F, x0: f64, h: f64) -> f64 {
    (f(x0 + h) - f(x0 - h)) / (2.0 * h)
}

/// Checks every element of every parameter's analytic gradient against a
/// central finite difference of `loss`.
///
/// `analytic` must be the gradients produced by one backward pass, snapshotted
/// per parameter in store order. An element passes when the relative error is
/// below `rtol` or the absolute difference is below `atol` (both gradients
/// essentially zero). Returns the failures.
pub fn check_param_gradients<F>(
    store: &mut ParamStore<f64>,
    analytic: &[Tensor<f64>],
    mut loss: F,
    h: f64,
    rtol: f64,
    atol: f64,
) -> Vec<GradMismatch>
where
    F: FnMut(&mut ParamStore<f64>) -> f64,
{
    let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
    assert_eq!(ids.len(), analytic.len(), "one gradient tensor per parameter");
    let mut failures = Vec::new();
    for (slot, &id) in ids.iter().enumerate() {
        for index in 0..store.value(id).len() {
            let original = store.value(id).data()[index];
            let numeric = central_diff(
                |x| {
                    store.value_mut(id).data_mut()[index] = x;
                    loss(store)
                },
                original,
                h,
            );
            store.value_mut(id).data_mut()[index] = original;
            let a = analytic[slot].data()[index];
            if (a - numeric).abs() <= atol {
                continue;
            }
            let rel = relative_error(a, numeric);
            if rel >= rtol {
                failures.push(GradMismatch {
                    param: store.name(id).to_string(),
                    index,
                    analytic: a,
                    numeric,
                    rel_error: rel,
                });
            }
        }
    }
    failures
}

/// Snapshot of the current gradient tensors, in store order.
pub fn grad_snapshot(store: &ParamStore<f64>) -> Vec<Tensor<f64>> {
    store.iter().map(|(_, p)| p.grad.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_diff_of_square() {
        let d = central_diff(|x| x * x, 3.0, 1e-5);
        assert!((d - 6.0).abs() < 1e-8);
    }

    #[test]
    fn detects_wrong_gradient() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::scalar(2.0));
        // Claim gradient 5 for f(w) = w^2 at w = 2 (true gradient 4).
        let analytic = vec![Tensor::scalar(5.0)];
        let fails = check_param_gradients(
            &mut store,
            &analytic,
            |s| {
                let w = s.value(id).scalar_value();
                w * w
            },
            1e-5,
            1e-4,
            1e-9,
        );
        assert_eq!(fails.len(), 1);
        assert!((fails[0].numeric - 4.0).abs() < 1e-6);
    }

    #[test]
    fn accepts_correct_gradient() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::scalar(-1.5));
        let analytic = vec![Tensor::scalar(-3.0)];
        let fails = check_param_gradients(
            &mut store,
            &analytic,
            |s| {
                let w = s.value(id).scalar_value();
                w * w
            },
            1e-5,
            1e-4,
            1e-9,
        );
        assert!(fails.is_empty());
    }
}
