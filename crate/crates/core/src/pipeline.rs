//! The whole experiment from one config: generate, split, train each backend,
//! evaluate on the held-out utterances and compare.

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::dnn::{train_ensemble, DnnConfig};
use crate::error::{FusionError, Result};
use crate::eval::{compare_backends, evaluate, Comparison, EvalReport, NeitherPolicy, Router, DEFAULT_TOP_K};
use crate::hash::sha256_hex;
use crate::lattice::{self, LatticeConfig};
use crate::signal::{NormConfig, PairSample};
use crate::synthgen::{generate, prepare_training_set, split_by_utterance, GeneratorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Baseline,
    Lattice,
    Dnn,
}

impl BackendKind {
    pub const ALL: [BackendKind; 3] = [BackendKind::Baseline, BackendKind::Lattice, BackendKind::Dnn];

    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Baseline => "baseline",
            BackendKind::Lattice => "lattice",
            BackendKind::Dnn => "dnn",
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self> {
        BackendKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| FusionError::Config(format!("unknown backend {s:?}")))
    }
}

/// Training options of all backends. Each backend reads its own section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lattice: LatticeConfig,
    pub dnn: DnnConfig,
    /// Add recognizer-masked copies of Both samples to the training set.
    pub lattice_mask_augment: bool,
    pub dnn_mask_augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lattice: LatticeConfig::default(),
            dnn: DnnConfig::default(),
            lattice_mask_augment: false,
            dnn_mask_augment: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        self.dnn.validate()
    }
}

/// Trains `kind` on a raw training split (reweighting, augmentation and
/// mirroring happen here).
pub fn train_backend(kind: BackendKind, train: &[PairSample], norm: &NormConfig, config: &TrainConfig) -> Result<Backend> {
    match kind {
        BackendKind::Baseline => Ok(Backend::Baseline),
        BackendKind::Lattice => {
            let set = prepare_training_set(train, config.lattice_mask_augment)?;
            Ok(Backend::Lattice { model: lattice::train(&set, norm, &config.lattice)? })
        }
        BackendKind::Dnn => {
            let set = prepare_training_set(train, config.dnn_mask_augment)?;
            Ok(Backend::Dnn { model: train_ensemble(&set, norm, &config.dnn)? })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    pub split_ratio: f64,
    pub split_seed: u64,
    pub train: TrainConfig,
    pub backends: Vec<BackendKind>,
    pub neither_policy: NeitherPolicy,
    pub top_k: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            generator: GeneratorConfig::default(),
            split_ratio: 0.8,
            split_seed: 0,
            train: TrainConfig::default(),
            backends: BackendKind::ALL.to_vec(),
            neither_policy: NeitherPolicy::LangidCompare,
            top_k: DEFAULT_TOP_K,
        }
    }
}

impl ExperimentConfig {
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub corpus_hash: String,
    pub models: Vec<Backend>,
    pub reports: Vec<EvalReport>,
    pub comparison: Comparison,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.train.validate()?;
    let corpus = generate(&config.generator)?;
    let corpus_hash = sha256_hex(corpus.to_jsonl().as_bytes());
    let (train, test) = split_by_utterance(&corpus.samples, config.split_ratio, config.split_seed)?;
    let mut models = Vec::new();
    let mut reports = Vec::new();
    for &kind in &config.backends {
        let backend = train_backend(kind, &train, &corpus.norm_config, &config.train)?;
        let router = Router { backend: &backend, neither_policy: config.neither_policy };
        reports.push(evaluate(&router, &test, config.top_k)?);
        models.push(backend);
    }
    let comparison = compare_backends(&reports)?;
    Ok(ExperimentResult { config_hash: config.hash(), corpus_hash, models, reports, comparison })
}
