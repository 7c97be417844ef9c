use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};
use crate::math::sigmoid;
use crate::signal::{build_feature_vector, FeatureVector12, NormConfig, PairSample, PAIR_FEATURES};

use super::calibrator::Calibrator;
use super::submodel::{InterpScratch, LatticeSubmodel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeEnsembleModel {
    pub calibrators: Vec<Calibrator>,
    pub submodels: Vec<LatticeSubmodel>,
    pub norm_config: NormConfig,
    pub seed: u64,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct ForwardTrace {
    pub calibrated: Vec<f64>,
    pub raw: Vec<f64>,
    pub member_probs: Vec<f64>,
    pub probability: f64,
}

impl LatticeEnsembleModel {
    pub fn validate(&self) -> Result<()> {
        if self.calibrators.len() != PAIR_FEATURES {
            return Err(FusionError::Config(format!(
                "expected {PAIR_FEATURES} calibrators, found {}",
                self.calibrators.len()
            )));
        }
        if self.submodels.is_empty() {
            return Err(FusionError::Config("lattice ensemble has no submodels".into()));
        }
        for (i, c) in self.calibrators.iter().enumerate() {
            if c.feature_index != i || c.input_keypoints.len() != c.output_values.len() || c.input_keypoints.len() < 2 {
                return Err(FusionError::Config(format!("calibrator {i} is malformed")));
            }
        }
        for s in &self.submodels {
            s.validate()?;
            if s.feature_subset.iter().any(|&f| f >= PAIR_FEATURES) {
                return Err(FusionError::Config("feature subset index out of range".into()));
            }
        }
        self.norm_config.validate()
    }

    pub fn calibrate_all(&self, fv: &FeatureVector12) -> Vec<f64> {
        self.calibrators.iter().zip(fv.as_slice()).map(|(c, &x)| c.calibrate(x)).collect()
    }

    /// Mean over submodels of `sigmoid(scale * lattice(calibrated subset) + bias)`.
    pub fn forward(&self, fv: &FeatureVector12) -> f64 {
        self.forward_traced(fv, &mut Vec::new(), &mut InterpScratch::default()).probability
    }

    pub(crate) fn forward_traced(
        &self,
        fv: &FeatureVector12,
        u_buf: &mut Vec<f64>,
        scratch: &mut InterpScratch,
    ) -> ForwardTrace {
        let calibrated = self.calibrate_all(fv);
        let mut raw = Vec::with_capacity(self.submodels.len());
        let mut member_probs = Vec::with_capacity(self.submodels.len());
        for sub in &self.submodels {
            u_buf.clear();
            u_buf.extend(sub.feature_subset.iter().map(|&f| calibrated[f]));
            let y = sub.interpolate_with(u_buf, scratch);
            raw.push(y);
            member_probs.push(sigmoid(sub.scale * y + sub.bias));
        }
        let probability = member_probs.iter().sum::<f64>() / member_probs.len() as f64;
        ForwardTrace { calibrated, raw, member_probs, probability }
    }

    /// `(f(a,b) + 1 - f(b,a)) / 2`, which satisfies `f'(a,b) = 1 - f'(b,a)`.
    pub fn predict_symmetrized_fv(&self, fv: &FeatureVector12) -> f64 {
        symmetrize(self.forward(fv), self.forward(&fv.flip()))
    }

    pub fn predict_symmetrized(&self, pair: &PairSample) -> Result<f64> {
        let fv = build_feature_vector(pair, &self.norm_config)?;
        Ok(self.predict_symmetrized_fv(&fv))
    }
}

/// Combines the forward and reversed-order probabilities into one that is
/// complementary under swapping.
pub fn symmetrize(f_ab: f64, f_ba: f64) -> f64 {
    (f_ab + (1.0 - f_ba)) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::tests::test_norm;

    use super::super::submodel::tests::oracle_interpolate;

    fn one_submodel_model(params: Vec<f64>, scale: f64, bias: f64) -> LatticeEnsembleModel {
        let calibrators = (0..PAIR_FEATURES).map(|i| Calibrator::uniform(i, 10)).collect();
        let mut sub = LatticeSubmodel::new(vec![0, 1, 2, 3, 6, 7, 8, 9], vec![3, 2, 2, 2, 3, 2, 2, 2], params).unwrap();
        sub.scale = scale;
        sub.bias = bias;
        LatticeEnsembleModel { calibrators, submodels: vec![sub], norm_config: test_norm(), seed: 0 }
    }

    #[test]
    fn zero_lattice_gives_one_half() {
        let m = one_submodel_model(vec![0.0; 9 * 64], 1.0, 0.0);
        let fv = FeatureVector12([0.3; PAIR_FEATURES]);
        assert_eq!(m.forward(&fv), 0.5);
    }

    #[test]
    fn single_submodel_matches_oracle() {
        let params: Vec<f64> = (0..9 * 64).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
        let m = one_submodel_model(params, 0.7, -0.2);
        let fv = FeatureVector12([0.1, -0.4, 0.9, 0.2, -0.8, 0.5, -0.3, 0.6, -0.1, 0.0, 0.7, -0.9]);
        let cal = m.calibrate_all(&fv);
        let sub = &m.submodels[0];
        let u: Vec<f64> = sub.feature_subset.iter().map(|&f| cal[f]).collect();
        let expected = sigmoid(0.7 * oracle_interpolate(sub, &u) - 0.2);
        assert!((m.forward(&fv) - expected).abs() < 1e-12);
    }

    #[test]
    fn symmetrization_formula() {
        assert!((symmetrize(0.7, 0.4) - 0.65).abs() < 1e-15);
        let (ab, ba) = (0.123_456, 0.987_654);
        assert!((symmetrize(ab, ba) + symmetrize(ba, ab) - 1.0).abs() < 1e-15);
        // Already complementary inputs pass through.
        assert!((symmetrize(0.8, 0.2) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn ensemble_output_is_between_member_extremes() {
        let mut m = one_submodel_model(vec![0.5; 9 * 64], 1.0, 0.0);
        let mut second = m.submodels[0].clone();
        second.params.iter_mut().for_each(|p| *p = -2.0);
        m.submodels.push(second);
        let fv = FeatureVector12([0.0; PAIR_FEATURES]);
        let p = m.forward(&fv);
        assert!(p > sigmoid(-2.0) && p < sigmoid(0.5));
        m.validate().unwrap();
    }
}
