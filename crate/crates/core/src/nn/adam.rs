use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl TrainState {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::invalid(format!(
                "optimizer tracks {} parameters but got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!(
                "gradient component {i} is {} at optimizer step {}",
                grads[i],
                self.step + 1
            )));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

pub fn adam_step(state: &mut TrainState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut st = TrainState::new(3, AdamConfig::default());
        let mut p = vec![1.0, -2.0, 0.5];
        adam_step(&mut st, &mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = g, v̂ = g² at t = 1, so the step is lr·g/(|g| + ε).
        let cfg = AdamConfig::default();
        let mut st = TrainState::new(2, cfg);
        let mut p = vec![0.0, 0.0];
        adam_step(&mut st, &mut p, &[0.3, -7.0]).unwrap();
        let expect0 = -cfg.learning_rate * 0.3 / (0.3 + cfg.epsilon);
        let expect1 = cfg.learning_rate * 7.0 / (7.0 + cfg.epsilon);
        assert!((p[0] - expect0).abs() < 1e-18);
        assert!((p[1] - expect1).abs() < 1e-18);
        assert!((p[0].abs() - cfg.learning_rate).abs() < 1e-9);
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let mut st = TrainState::new(2, AdamConfig::default());
            let mut p = vec![0.1, 0.2];
            for k in 0..50 {
                let g = [p[0] * 2.0 + k as f64 * 0.01, (p[1] - 1.0).sin()];
                st.step(&mut p, &g).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }

    #[test]
    fn non_finite_gradient_is_numeric_error() {
        let mut st = TrainState::new(2, AdamConfig::default());
        let mut p = vec![0.0; 2];
        let err = st.step(&mut p, &[0.0, f64::INFINITY]).unwrap_err();
        assert!(matches!(err, Error::Numeric(ref m) if m.contains("component 1")));
        assert_eq!(st.step_count(), 0);
        assert!(st.step(&mut p, &[0.0]).is_err());
    }
}
