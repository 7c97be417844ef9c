//! Finite-difference verification of the full pair-loss gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};
use crate::signal::FeatureVector12;

use super::config::DnnConfig;
use super::model::DnnModel;

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;
/// Denominator floor of the relative error, so that coordinates whose true
/// gradient is essentially zero are judged on absolute error instead.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub checks: usize,
    pub max_relative_error: f64,
    pub worst_parameter: usize,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs().max(numeric.abs())).max(GRADCHECK_FLOOR)
}

/// Compares the analytic gradient of one random coordinate against a central
/// difference, `draws` times, each on a fresh random feature vector and label.
pub fn gradcheck(config: &DnnConfig, draws: usize, seed: u64) -> Result<GradcheckReport> {
    if config.dropout_rate != 0.0 {
        return Err(FusionError::Config("gradcheck needs dropout_rate = 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = DnnModel::init(config, seed, &mut rng)?;
    let mut params = model.params.clone();
    // Perturb gains and offsets away from 1 and 0 so every tensor carries signal.
    for p in params.iter_mut() {
        *p += rng.random_range(-0.1..0.1);
    }
    let mut worst = (0.0, 0);
    for _ in 0..draws {
        let mut v = [0.0; 12];
        for x in &mut v {
            *x = rng.random_range(-1.0..1.0);
        }
        let fv = FeatureVector12(v);
        let label = rng.random_range(0..2u8);
        let (_, grad) = model.loss_and_gradient(&params, &fv, label, 1.0);
        let k = rng.random_range(0..params.len());
        let mut shifted = params.clone();
        shifted[k] = params[k] + GRADCHECK_STEP;
        let up = model.loss_and_gradient(&shifted, &fv, label, 1.0).0;
        shifted[k] = params[k] - GRADCHECK_STEP;
        let down = model.loss_and_gradient(&shifted, &fv, label, 1.0).0;
        let numeric = (up - down) / (2.0 * GRADCHECK_STEP);
        let err = relative_error(grad[k], numeric);
        if err > worst.0 {
            worst = (err, k);
        }
    }
    Ok(GradcheckReport {
        checks: draws,
        max_relative_error: worst.0,
        worst_parameter: worst.1,
        tolerance: GRADCHECK_TOLERANCE,
        passed: worst.0 < GRADCHECK_TOLERANCE,
    })
}
