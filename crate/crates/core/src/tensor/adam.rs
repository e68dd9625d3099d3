use serde::{Deserialize, Serialize};

use super::{ParamSet, Result, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

/// Adam with bias correction, one [`AdamState`] per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let states = params
            .tensors()
            .iter()
            .map(|p| AdamState {
                m: vec![0.0; p.len()],
                v: vec![0.0; p.len()],
                t: 0,
            })
            .collect();
        Adam { config, states }
    }

    pub fn states(&self) -> &[AdamState] {
        &self.states
    }

    pub fn steps(&self) -> u64 {
        self.states.first().map_or(0, |s| s.t)
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        if self.states.len() != params.len() {
            return Err(TensorError::Contract(format!(
                "optimizer tracks {} params, got {}",
                self.states.len(),
                params.len()
            )));
        }
        for (i, (p, s)) in params.tensors().iter().zip(&self.states).enumerate() {
            if p.grad().is_none() {
                return Err(TensorError::Contract(format!(
                    "parameter {i} has no gradient"
                )));
            }
            if s.m.len() != p.len() {
                return Err(TensorError::Shape {
                    op: "adam_step",
                    left: p.shape().to_vec(),
                    right: vec![s.m.len()],
                });
            }
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        for (p, s) in params.tensors_mut().iter_mut().zip(&mut self.states) {
            let g = p.take_grad().expect("checked above");
            s.t += 1;
            let c1 = 1.0 - beta1.powi(s.t as i32);
            let c2 = 1.0 - beta2.powi(s.t as i32);
            for (((w, gi), m), v) in p
                .values_mut()
                .iter_mut()
                .zip(&g)
                .zip(&mut s.m)
                .zip(&mut s.v)
            {
                *m = beta1 * *m + (1.0 - beta1) * gi;
                *v = beta2 * *v + (1.0 - beta2) * gi * gi;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
