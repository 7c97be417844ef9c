//! A trained (or trivial) pairwise classifier behind one interface, and its
//! on-disk format: a JSON object tagged by `"backend"`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dnn::DnnEnsemble;
use crate::error::Result;
use crate::lattice::LatticeEnsembleModel;
use crate::signal::PairSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum Backend {
    /// Compares the two LangID scores and nothing else.
    Baseline,
    Lattice { model: LatticeEnsembleModel },
    Dnn { model: DnnEnsemble },
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Baseline => "baseline",
            Backend::Lattice { .. } => "lattice",
            Backend::Dnn { .. } => "dnn",
        }
    }

    /// Probability that language a is the spoken one. Every backend satisfies
    /// `predict(a, b) + predict(b, a) = 1`.
    pub fn predict(&self, pair: &PairSample) -> Result<f64> {
        match self {
            Backend::Baseline => Ok(baseline_probability(pair.a.langid_score, pair.b.langid_score)),
            Backend::Lattice { model } => model.predict_symmetrized(pair),
            Backend::Dnn { model } => model.predict(pair),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("backend serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Backend::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `la / (la + lb)`, or 0.5 when both scores are zero.
pub fn baseline_probability(la: f64, lb: f64) -> f64 {
    let total = la + lb;
    if total > 0.0 {
        la / total
    } else {
        0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::tests::{full_side, pair};

    #[test]
    fn baseline_follows_langid() {
        let p = pair(full_side(0.9), full_side(0.3));
        let b = Backend::Baseline;
        assert!((b.predict(&p).unwrap() - 0.75).abs() < 1e-15);
        assert!((b.predict(&p).unwrap() + b.predict(&p.swapped()).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(baseline_probability(0.0, 0.0), 0.5);
    }

    #[test]
    fn tagged_json() {
        let json = Backend::Baseline.to_json();
        assert_eq!(json, r#"{"backend":"baseline"}"#);
        assert_eq!(Backend::from_json(&json).unwrap(), Backend::Baseline);
        assert!(Backend::from_json(r#"{"backend":"svm"}"#).is_err());
    }
}
