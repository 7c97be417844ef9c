use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};
use crate::optim::LrSchedule;
use crate::signal::PAIR_FEATURES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Tanh,
}

pub const LEAKY_SLOPE: f64 = 0.01;

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative at pre-activation `z`, given the activation output `a`.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// How the two tower embeddings become a probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// `w * ĥ1ᵀ (M - Mᵀ) ĥ2`: antisymmetric, so p(a,b) + p(b,a) = 1.
    SkewBilinear,
    /// `w * (u·ĥ1 - u·ĥ2)`: antisymmetric.
    ScoreDifference,
    /// `w * ĥ1ᵀ AᵀA ĥ2`: symmetric in its arguments; predictions are
    /// symmetrized after the fact.
    PaperLiteral,
}

impl HeadKind {
    pub fn is_antisymmetric(self) -> bool {
        !matches!(self, HeadKind::PaperLiteral)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    MeanProbability,
    MajorityVote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DnnConfig {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub dropout_rate: f64,
    pub layer_norm: bool,
    pub layer_norm_eps: f64,
    /// Identity skip around every layer whose input and output widths match.
    pub residual: bool,
    pub head_kind: HeadKind,
    /// Standard deviation of the initial skew-head matrix and score vector.
    pub head_init_std: f64,
    pub ensemble_size: usize,
    pub combine: Combine,
    pub batch_size: usize,
    pub lr_schedule: LrSchedule,
    pub max_steps: u64,
    pub ema_decay: Option<f64>,
    /// Evaluate with the EMA shadow parameters instead of the live ones.
    pub eval_with_ema: bool,
    pub seed: u64,
}

impl Default for DnnConfig {
    fn default() -> Self {
        DnnConfig {
            layer_sizes: vec![12, 128, 64, 32, 16, 8],
            activation: Activation::Relu,
            dropout_rate: 0.5,
            layer_norm: true,
            layer_norm_eps: 1e-10,
            residual: false,
            head_kind: HeadKind::SkewBilinear,
            head_init_std: 0.01,
            ensemble_size: 11,
            combine: Combine::MeanProbability,
            batch_size: 128,
            lr_schedule: LrSchedule(vec![
                (0, 0.01),
                (10_000, 0.005),
                (20_000, 0.001),
                (30_000, 0.0005),
                (40_000, 0.0001),
            ]),
            max_steps: 50_000,
            ema_decay: None,
            eval_with_ema: false,
            seed: 0,
        }
    }
}

impl DnnConfig {
    /// Smooth configuration for finite-difference checks: tanh, no dropout and
    /// a head large enough that every tensor receives a visible gradient.
    pub fn gradcheck_default() -> Self {
        DnnConfig { activation: Activation::Tanh, dropout_rate: 0.0, head_init_std: 0.5, ..Default::default() }
    }

    pub fn embedding_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FusionError::Config(m));
        if self.layer_sizes.len() < 2 || self.layer_sizes[0] != PAIR_FEATURES {
            return bad(format!("layer_sizes must start with {PAIR_FEATURES} and have at least one layer"));
        }
        if self.layer_sizes.contains(&0) {
            return bad("layer sizes must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate must be in [0,1), got {}", self.dropout_rate));
        }
        if !(self.layer_norm_eps >= 0.0) {
            return bad("layer_norm_eps must be nonnegative".into());
        }
        if self.residual && self.layer_sizes[1..].windows(2).any(|w| w[0] != w[1]) {
            return bad("residual connections need equal-width hidden layers".into());
        }
        if self.ensemble_size == 0 || self.batch_size == 0 {
            return bad("ensemble_size and batch_size must be positive".into());
        }
        if let Some(d) = self.ema_decay {
            if !(0.0..1.0).contains(&d) {
                return bad(format!("ema_decay must be in [0,1), got {d}"));
            }
        }
        if self.eval_with_ema && self.ema_decay.is_none() {
            return bad("eval_with_ema requires ema_decay".into());
        }
        self.lr_schedule.validate()
    }
}
