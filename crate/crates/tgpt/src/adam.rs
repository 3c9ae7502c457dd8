//! Adam with bias correction, operating on flat parameter vectors.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct AdamState {
    pub step: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    /// Canonical constants: beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        AdamState {
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn first_moments(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moments(&self) -> &[f64] {
        &self.v
    }

    /// One in-place update. The learning rate can be overridden per call to
    /// support decay schedules.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: Option<f64>) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::SizeMismatch {
                what: "adam parameters",
                expected: self.m.len(),
                got: params.len(),
            });
        }
        if grad.len() != self.m.len() {
            return Err(Error::SizeMismatch {
                what: "adam gradient",
                expected: self.m.len(),
                got: grad.len(),
            });
        }
        if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                what: "gradient entry".into(),
                index,
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let lr = lr.unwrap_or(self.learning_rate);
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Convenience wrapper around one update.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64]) -> Result<()> {
    state.step(params, grad, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut state = AdamState::new(3, 0.1);
        let mut params = vec![1.0, -2.0, 0.5];
        let before = params.clone();
        state.step(&mut params, &[1.0, 1.0, 1.0], None).unwrap();
        let m_after_one = state.first_moments().to_vec();
        for _ in 0..50 {
            state.step(&mut params, &[0.0, 0.0, 0.0], None).unwrap();
        }
        for (m, m0) in state.first_moments().iter().zip(m_after_one.iter()) {
            assert!(m.abs() < m0.abs() * 0.01, "moments should decay toward 0");
        }
        let mut fresh = AdamState::new(3, 0.1);
        let mut p2 = before.clone();
        fresh.step(&mut p2, &[0.0; 3], None).unwrap();
        assert_eq!(p2, before, "zero gradient must not move parameters");
    }

    #[test]
    fn first_step_is_signed_unit_step() {
        let mut state = AdamState::new(2, 0.01);
        let mut params = vec![0.0, 0.0];
        let grad = [3.0, -0.004];
        state.step(&mut params, &grad, None).unwrap();
        for (p, g) in params.iter().zip(grad.iter()) {
            let expected = -0.01 * g / (g.abs() + 1e-8);
            assert!((p - expected).abs() < 1e-12, "{p} vs {expected}");
        }
    }

    #[test]
    fn converges_on_scalar_quadratic() {
        // Independent scalar rerun of the same update rule as the oracle.
        let (lr, b1, b2, eps) = (0.05, 0.9, 0.999, 1e-8);
        let mut p_oracle = 0.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=200 {
            let g = 2.0 * (p_oracle - 3.0);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            p_oracle -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        assert!((p_oracle - 3.0).abs() < 0.1, "oracle run ends at {p_oracle}");

        let mut state = AdamState::new(1, lr);
        let mut params = vec![0.0];
        for _ in 0..200 {
            let g = 2.0 * (params[0] - 3.0);
            state.step(&mut params, &[g], None).unwrap();
        }
        assert_eq!(params[0], p_oracle, "implementation must match the oracle");
        assert_eq!(state.step, 200);
    }

    #[test]
    fn non_finite_gradient_identifies_index() {
        let mut state = AdamState::new(3, 0.1);
        let mut params = vec![0.0; 3];
        let err = state
            .step(&mut params, &[0.0, f64::NAN, 0.0], None)
            .unwrap_err();
        match err {
            Error::NonFinite { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
