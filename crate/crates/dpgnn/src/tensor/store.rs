//! Trainable parameters and their optimizer state.
//!
//! Parameters live in a flat [`ParamStore`]; the model holds [`ParamId`]
//! handles. Keeping values, gradients, and Adam moments in one place makes
//! backward accumulation, optimizer steps, checkpointing, and
//! finite-difference perturbation all straightforward.

use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Handle into a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

/// A named trainable tensor with its gradient accumulator and Adam moments.
#[derive(Clone, Debug)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    first_moment: Tensor<T>,
    second_moment: Tensor<T>,
    pub step: u64,
}

#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        let (rows, cols) = value.shape();
        self.params.push(Parameter {
            name: name.into(),
            value,
            grad: Tensor::zeros(rows, cols),
            first_moment: Tensor::zeros(rows, cols),
            second_moment: Tensor::zeros(rows, cols),
            step: 0,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].grad
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, delta: &Tensor<T>) {
        self.params[id.0].grad.add_assign(delta);
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
    }

    /// Standard Adam update with bias correction; clears gradients afterwards.
    ///
    /// A parameter whose gradient is exactly zero is left unchanged (its
    /// moments stay zero), only its step counter advances.
    pub fn adam_step(&mut self, lr: f64) {
        let b1 = T::from_f64(ADAM_BETA1);
        let b2 = T::from_f64(ADAM_BETA2);
        let eps = T::from_f64(ADAM_EPS);
        let lr = T::from_f64(lr);
        let one = T::one();
        for p in &mut self.params {
            p.step += 1;
            let corr1 = one - T::from_f64(ADAM_BETA1.powi(p.step as i32));
            let corr2 = one - T::from_f64(ADAM_BETA2.powi(p.step as i32));
            let value = p.value.data_mut();
            let grad = p.grad.data_mut();
            let m = p.first_moment.data_mut();
            let v = p.second_moment.data_mut();
            for i in 0..value.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (one - b1) * g;
                v[i] = b2 * v[i] + (one - b2) * g * g;
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                value[i] = value[i] - lr * m_hat / (v_hat.sqrt() + eps);
                grad[i] = T::zero();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::from_rows(&[vec![1.0, -2.0]]).unwrap());
        store.accumulate_grad(id, &Tensor::from_rows(&[vec![0.3, -0.7]]).unwrap());
        store.adam_step(0.1);
        let v = store.value(id);
        // bias-corrected m_hat / sqrt(v_hat) == sign(g) on the first step
        assert!((v.get(0, 0) - (1.0 - 0.1)).abs() < 1e-6);
        assert!((v.get(0, 1) - (-2.0 + 0.1)).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_leaves_value_unchanged() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::scalar(3.5));
        store.adam_step(0.1);
        assert_eq!(store.value(id).scalar_value(), 3.5);
        assert_eq!(store.params[0].step, 1);
    }

    #[test]
    fn quadratic_descends_below_threshold() {
        // f(w) = w^2, grad = 2w, lr = 0.1, 100 steps from w = 1.
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::scalar(1.0));
        let mut prev = 1.0f64;
        for _ in 0..100 {
            let w = store.value(id).scalar_value();
            store.accumulate_grad(id, &Tensor::scalar(2.0 * w));
            store.adam_step(0.1);
            let now = store.value(id).scalar_value().abs();
            assert!(now <= prev + 1e-12, "|w| should not increase: {now} > {prev}");
            prev = now;
        }
        assert!(store.value(id).scalar_value().abs() < 0.1);
    }
}
