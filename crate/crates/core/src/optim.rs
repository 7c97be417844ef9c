//! Adam with a piecewise-constant learning-rate schedule, plus an exponential
//! moving average of parameters.

use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};

/// `(first_step, rate)` segments; the rate of the last segment whose start is
/// `<= step` applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LrSchedule(pub Vec<(u64, f64)>);

impl LrSchedule {
    pub fn constant(rate: f64) -> Self {
        LrSchedule(vec![(0, rate)])
    }

    pub fn validate(&self) -> Result<()> {
        let segs = &self.0;
        if segs.is_empty() || segs[0].0 != 0 {
            return Err(FusionError::Config("lr schedule must start at step 0".into()));
        }
        if segs.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(FusionError::Config("lr schedule steps must be strictly increasing".into()));
        }
        if segs.iter().any(|&(_, r)| !(r.is_finite() && r >= 0.0)) {
            return Err(FusionError::Config("learning rates must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn rate_at(&self, step: u64) -> f64 {
        self.0
            .iter()
            .take_while(|&&(start, _)| start <= step)
            .last()
            .map(|&(_, r)| r)
            .unwrap_or(0.0)
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moments for one flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Adam { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }

    /// Applies one bias-corrected update at learning rate `lr` and advances the step counter.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }

    /// Update with the rate the schedule assigns to the current step.
    pub fn scheduled_step(&mut self, params: &mut [f64], grads: &[f64], schedule: &LrSchedule) {
        let lr = schedule.rate_at(self.step);
        self.step(params, grads, lr);
    }
}

/// `shadow <- decay * shadow + (1 - decay) * params`.
pub fn ema_update(shadow: &mut [f64], params: &[f64], decay: f64) {
    for (s, &p) in shadow.iter_mut().zip(params) {
        *s = decay * *s + (1.0 - decay) * p;
    }
}
