use super::params::ParamSet;
use crate::error::{QppError, Result};

/// Linear warmup to `base_lr` over `warmup_steps`, then linear decay to 0 at
/// `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearWarmupDecay {
    pub base_lr: f64,
    pub total_steps: usize,
    pub warmup_steps: usize,
}

impl LinearWarmupDecay {
    /// Warmup covers ⌈fraction·total⌉ steps.
    pub fn new(base_lr: f64, total_steps: usize, warmup_fraction: f64) -> Self {
        let warmup_steps = ((warmup_fraction * total_steps as f64).ceil() as usize).max(1);
        Self {
            base_lr,
            total_steps,
            warmup_steps,
        }
    }

    pub fn lr(&self, t: usize) -> f64 {
        let (w, total) = (self.warmup_steps, self.total_steps);
        if t <= w {
            self.base_lr * t as f64 / w as f64
        } else if t >= total {
            0.0
        } else {
            self.base_lr * (total - t) as f64 / (total - w) as f64
        }
    }
}

/// Bias-corrected Adam driven by a [`LinearWarmupDecay`] schedule.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    schedule: LinearWarmupDecay,
    t: usize,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ParamSet, schedule: LinearWarmupDecay) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            schedule,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step_count(&self) -> usize {
        self.t
    }

    pub fn schedule(&self) -> &LinearWarmupDecay {
        &self.schedule
    }

    /// Learning rate that the next step will use.
    pub fn next_lr(&self) -> f64 {
        self.schedule.lr(self.t + 1)
    }

    /// Apply one update. `grads[i]` belongs to parameter `i`; `None` means zero.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Option<Vec<f64>>]) -> Result<()> {
        if self.t >= self.schedule.total_steps {
            return Err(QppError::Contract(format!(
                "optimizer already took all {} steps",
                self.schedule.total_steps
            )));
        }
        if grads.len() != params.len() {
            return Err(QppError::Contract("gradient count mismatch".into()));
        }
        self.t += 1;
        let lr = self.schedule.lr(self.t);
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let p = params.tensor_mut(i).data_mut();
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                p[j] -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
