//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!(
                "adam learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// First/second moment estimates plus the step counter for bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> AdamState {
        AdamState {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update in place. `lr` is passed explicitly so callers can apply a
    /// decay schedule without touching the moment state.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], p: &AdamParams, lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Config(format!(
                "adam state has {} slots, got params {} / grads {}",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        // f64::max ignores NaN operands, so scan for non-finite explicitly.
        if grads.iter().any(|g| !g.is_finite()) {
            let max_abs = grads
                .iter()
                .filter(|g| g.is_finite())
                .fold(0.0f64, |acc, g| acc.max(g.abs()));
            return Err(Error::Numerical(format!(
                "non-finite gradient at adam step {} (max finite |grad| = {max_abs})",
                self.t + 1
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - p.beta1.powi(self.t as i32);
        let bc2 = 1.0 - p.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = p.beta1 * self.m[i] + (1.0 - p.beta1) * g;
            self.v[i] = p.beta2 * self.v[i] + (1.0 - p.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + p.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut state = AdamState::new(3);
        let mut params = vec![1.0, -2.0, 0.5];
        let before = params.clone();
        state
            .step(&mut params, &[0.0; 3], &AdamParams::default(), 5e-3)
            .unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_moves_by_roughly_the_learning_rate() {
        // With bias correction, m̂/√v̂ = sign(g) on the first step, so the
        // update magnitude is lr up to the ε regularizer.
        let p = AdamParams::default();
        let mut state = AdamState::new(1);
        let mut params = vec![0.0];
        state.step(&mut params, &[3.7], &p, p.lr).unwrap();
        assert!((params[0] + p.lr).abs() < 1e-6, "{}", params[0]);
    }

    #[test]
    fn minimizes_scalar_quadratic_within_budget() {
        // (θ − 3)² from θ = 0 at lr 5e-3 must reach |θ − 3| ≤ 1e-3 in 5000
        // steps.
        let p = AdamParams::default();
        let mut state = AdamState::new(1);
        let mut theta = vec![0.0];
        for _ in 0..5000 {
            let g = 2.0 * (theta[0] - 3.0);
            state.step(&mut theta, &[g], &p, p.lr).unwrap();
            if (theta[0] - 3.0).abs() <= 1e-3 {
                return;
            }
        }
        panic!("did not converge: theta = {}", theta[0]);
    }

    #[test]
    fn non_finite_gradient_aborts_with_step_index() {
        let mut state = AdamState::new(1);
        let mut params = vec![0.0];
        let err = state
            .step(&mut params, &[f64::NAN], &AdamParams::default(), 5e-3)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("non-finite gradient"), "{msg}");
        assert!(msg.contains("step 1"), "{msg}");
    }
}
