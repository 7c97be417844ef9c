use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};
use crate::signal::{build_feature_vector, FeatureVector12, NormConfig, PairSample};

use super::config::Combine;
use super::model::DnnModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleRepr")]
pub struct DnnEnsemble {
    pub members: Vec<DnnModel>,
    pub combine: Combine,
    pub norm_config: NormConfig,
}

#[derive(Deserialize)]
struct EnsembleRepr {
    members: Vec<DnnModel>,
    combine: Combine,
    norm_config: NormConfig,
}

impl TryFrom<EnsembleRepr> for DnnEnsemble {
    type Error = FusionError;

    fn try_from(r: EnsembleRepr) -> Result<Self> {
        DnnEnsemble::new(r.members, r.combine, r.norm_config)
    }
}

impl DnnEnsemble {
    pub fn new(members: Vec<DnnModel>, combine: Combine, norm_config: NormConfig) -> Result<Self> {
        if members.is_empty() {
            return Err(FusionError::Config("dnn ensemble has no members".into()));
        }
        norm_config.validate()?;
        Ok(DnnEnsemble { members, combine, norm_config })
    }

    pub fn member_probabilities(&self, fv: &FeatureVector12) -> Vec<f64> {
        self.members.iter().map(|m| m.predict_fv(fv)).collect()
    }

    pub fn predict_fv(&self, fv: &FeatureVector12) -> f64 {
        combine(self.combine, &self.member_probabilities(fv))
    }

    pub fn predict(&self, pair: &PairSample) -> Result<f64> {
        Ok(self.predict_fv(&build_feature_vector(pair, &self.norm_config)?))
    }
}

/// Mean of the member probabilities, or the fraction of members above 0.5.
pub fn combine(how: Combine, probs: &[f64]) -> f64 {
    let n = probs.len() as f64;
    match how {
        Combine::MeanProbability => probs.iter().sum::<f64>() / n,
        Combine::MajorityVote => probs.iter().filter(|&&p| p > 0.5).count() as f64 / n,
    }
}
