//! Synthetic pairwise corpus generation and training-set transforms.
//!
//! Each utterance draws a true language, a latent difficulty and a shared
//! log-length, then pairs the correct language against one to
//! `max_pairs_per_utterance` competitors. The correct side's raw signals are
//! drawn once per utterance and reused across its pairs; competitors are
//! drawn per pair. Missingness is drawn per pair.
//!
//! Randomness: utterance `i` uses `ChaCha8Rng::seed_from_u64(seed)` with
//! stream `i`, so output does not depend on platform or on how many
//! utterances precede it.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};
use crate::hash::sha256_hex;
use crate::math::sigmoid;
use crate::signal::{MissingnessClass, NormConfig, PairSample, RecognizerSignals, SignalVector};

/// Language codes used for generated corpora, most popular first.
pub const LANGUAGE_CODES: [&str; 24] = [
    "en", "es", "hi", "pt", "fr", "de", "ja", "id", "ru", "ar", "it", "ko", "tr", "nl", "pl", "th",
    "vi", "zh", "sv", "uk", "ro", "el", "cs", "he",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissingnessProbs {
    pub both: f64,
    pub either: f64,
    pub neither: f64,
}

impl Default for MissingnessProbs {
    fn default() -> Self {
        MissingnessProbs { both: 0.117, either: 0.529, neither: 0.354 }
    }
}

/// A probability-valued signal: `sigmoid(N(mean, spread))`, with a different
/// mean for the correct and incorrect language.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogitSignal {
    pub correct_mean: f64,
    pub incorrect_mean: f64,
    pub spread: f64,
}

/// A positive cost-like signal: `exp(ln(center) + length_coupling * len + N(0, spread))`,
/// shifted up by `incorrect_shift` in log space for the incorrect language.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogSignal {
    pub center: f64,
    pub incorrect_shift: f64,
    pub spread: f64,
    pub length_coupling: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalDistributions {
    /// Shared logit offset of both sides' `langid_score`.
    pub langid_offset: f64,
    /// Correct-minus-incorrect logit gap for the easiest utterance (difficulty 0).
    pub langid_gap_easy: f64,
    /// Gap for the hardest utterance (difficulty 1); the gap is linear in difficulty.
    pub langid_gap_hard: f64,
    pub langid_noise: f64,
    /// Spread of the per-utterance log-length shared by both sides' costs.
    pub length_spread: f64,
    /// Recognizer noise is multiplied by `exp(-length_reliability * len)`:
    /// short utterances give noisier recognizer signals.
    pub length_reliability: f64,
    pub am_cost: LogSignal,
    pub lm_cost: LogSignal,
    pub confidence_score: LogitSignal,
    pub entropy_score: LogSignal,
    pub text_langid_score: LogitSignal,
}

impl Default for SignalDistributions {
    fn default() -> Self {
        SignalDistributions {
            langid_offset: -1.0,
            langid_gap_easy: 4.5,
            langid_gap_hard: 1.0,
            langid_noise: 1.0,
            length_spread: 0.5,
            length_reliability: 2.5,
            am_cost: LogSignal { center: 3000.0, incorrect_shift: 0.12, spread: 0.12, length_coupling: 1.0 },
            lm_cost: LogSignal { center: 80.0, incorrect_shift: 0.5, spread: 0.35, length_coupling: 1.0 },
            confidence_score: LogitSignal { correct_mean: 1.0, incorrect_mean: -0.5, spread: 1.2 },
            entropy_score: LogSignal { center: 0.15, incorrect_shift: 0.6, spread: 0.6, length_coupling: 0.0 },
            text_langid_score: LogitSignal { correct_mean: 1.5, incorrect_mean: -1.0, spread: 1.6 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub language_count: usize,
    pub sample_count: usize,
    pub max_pairs_per_utterance: usize,
    /// Zipf exponent of language popularity; drives pair volume skew.
    pub popularity_exponent: f64,
    pub missingness_probs: MissingnessProbs,
    pub either_match_bias: f64,
    pub signals: SignalDistributions,
    pub rng_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            language_count: 20,
            sample_count: 100_000,
            max_pairs_per_utterance: 3,
            popularity_exponent: 0.8,
            missingness_probs: MissingnessProbs::default(),
            either_match_bias: 0.60,
            signals: SignalDistributions::default(),
            rng_seed: 42,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let m = &self.missingness_probs;
        let probs = [m.both, m.either, m.neither];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(FusionError::Config(format!(
                "missingness_probs must be in [0,1] and sum to 1, got {probs:?}"
            )));
        }
        if !(self.either_match_bias > 0.0 && self.either_match_bias < 1.0) {
            return Err(FusionError::Config(format!(
                "either_match_bias must be in (0,1), got {}",
                self.either_match_bias
            )));
        }
        if self.language_count < 2 || self.language_count > LANGUAGE_CODES.len() {
            return Err(FusionError::Config(format!(
                "language_count must be in 2..={}, got {}",
                LANGUAGE_CODES.len(),
                self.language_count
            )));
        }
        if self.max_pairs_per_utterance == 0 || self.max_pairs_per_utterance >= self.language_count {
            return Err(FusionError::Config(
                "max_pairs_per_utterance must be in 1..language_count".into(),
            ));
        }
        if self.sample_count == 0 {
            return Err(FusionError::Config("sample_count must be positive".into()));
        }
        let s = &self.signals;
        let spreads = [
            s.langid_noise,
            s.length_spread,
            s.am_cost.spread,
            s.lm_cost.spread,
            s.confidence_score.spread,
            s.entropy_score.spread,
            s.text_langid_score.spread,
        ];
        if spreads.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(FusionError::Config("signal spreads must be finite and nonnegative".into()));
        }
        if [s.am_cost.center, s.lm_cost.center, s.entropy_score.center].iter().any(|c| !(*c > 0.0)) {
            return Err(FusionError::Config("cost centers must be positive".into()));
        }
        if !s.length_reliability.is_finite() {
            return Err(FusionError::Config("length_reliability must be finite".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn languages(&self) -> Vec<String> {
        LANGUAGE_CODES[..self.language_count].iter().map(|s| s.to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMetadata {
    pub seed: u64,
    pub config_hash: String,
    pub utterance_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub samples: Vec<PairSample>,
    pub norm_config: NormConfig,
    pub metadata: CorpusMetadata,
}

impl Corpus {
    pub fn to_jsonl(&self) -> String {
        samples_to_jsonl(&self.samples)
    }
}

pub fn samples_to_jsonl(samples: &[PairSample]) -> String {
    let mut out = String::with_capacity(samples.len() * 400);
    for s in samples {
        out.push_str(&s.to_json_line());
        out.push('\n');
    }
    out
}

pub fn samples_from_jsonl(text: &str) -> Result<Vec<PairSample>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| FusionError::Input(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

struct Draw<'a> {
    rng: &'a mut ChaCha8Rng,
    std_normal: Normal<f64>,
}

impl Draw<'_> {
    fn normal(&mut self) -> f64 {
        self.std_normal.sample(self.rng)
    }

    fn logit(&mut self, s: &LogitSignal, correct: bool, noise: f64) -> f64 {
        let mean = if correct { s.correct_mean } else { s.incorrect_mean };
        sigmoid(mean + noise * s.spread * self.normal())
    }

    fn cost(&mut self, s: &LogSignal, correct: bool, log_len: f64, noise: f64) -> f64 {
        let shift = if correct { 0.0 } else { s.incorrect_shift };
        (s.center.ln() + s.length_coupling * log_len + shift + noise * s.spread * self.normal()).exp()
    }

    fn recognizer(&mut self, d: &SignalDistributions, correct: bool, log_len: f64) -> RecognizerSignals {
        let noise = (-d.length_reliability * log_len).exp();
        RecognizerSignals {
            am_cost: self.cost(&d.am_cost, correct, log_len, noise),
            lm_cost: self.cost(&d.lm_cost, correct, log_len, noise),
            confidence_score: self.logit(&d.confidence_score, correct, noise),
            entropy_score: self.cost(&d.entropy_score, correct, log_len, noise),
            text_langid_score: self.logit(&d.text_langid_score, correct, noise),
        }
    }
}

/// Generates a corpus of `config.sample_count` pairs.
pub fn generate(config: &GeneratorConfig) -> Result<Corpus> {
    config.validate()?;
    let langs = config.languages();
    let popularity: Vec<f64> = (0..langs.len())
        .map(|i| 1.0 / ((i + 1) as f64).powf(config.popularity_exponent))
        .collect();
    let m = &config.missingness_probs;
    let class_dist = WeightedIndex::new([m.both, m.either, m.neither])
        .map_err(|e| FusionError::Config(e.to_string()))?;
    let sd = &config.signals;

    let mut samples = Vec::with_capacity(config.sample_count);
    let mut utterance = 0u64;
    while samples.len() < config.sample_count {
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        rng.set_stream(utterance);
        let remaining = config.sample_count - samples.len();
        let pairs = rng.random_range(1..=config.max_pairs_per_utterance).min(remaining);

        // True language followed by distinct competitors, popularity-weighted.
        let mut chosen: Vec<usize> = Vec::with_capacity(pairs + 1);
        while chosen.len() < pairs + 1 {
            let weights: Vec<f64> = popularity
                .iter()
                .enumerate()
                .map(|(i, &w)| if chosen.contains(&i) { 0.0 } else { w })
                .collect();
            let idx = WeightedIndex::new(&weights)
                .map_err(|e| FusionError::Internal(e.to_string()))?
                .sample(&mut rng);
            chosen.push(idx);
        }

        let mut draw = Draw { rng: &mut rng, std_normal: Normal::new(0.0, 1.0).unwrap() };
        let difficulty: f64 = draw.rng.random();
        let gap = sd.langid_gap_easy + (sd.langid_gap_hard - sd.langid_gap_easy) * difficulty;
        let log_len = sd.length_spread * draw.normal();
        let correct_langid = sigmoid(sd.langid_offset + gap / 2.0 + sd.langid_noise * draw.normal());
        let correct_rec = draw.recognizer(sd, true, log_len);
        let utterance_id = format!("utt{utterance:07}");

        for &competitor in &chosen[1..] {
            let wrong_langid = sigmoid(sd.langid_offset - gap / 2.0 + sd.langid_noise * draw.normal());
            let wrong_rec = draw.recognizer(sd, false, log_len);
            let class = MissingnessClass::ALL[class_dist.sample(draw.rng)];
            let (correct_avail, wrong_avail) = match class {
                MissingnessClass::Both => (true, true),
                MissingnessClass::Neither => (false, false),
                MissingnessClass::Either => {
                    let c = draw.rng.random_bool(config.either_match_bias);
                    (c, !c)
                }
            };
            let correct = SignalVector {
                langid_score: correct_langid,
                recognizer: correct_avail.then_some(correct_rec),
            };
            let wrong = SignalVector { langid_score: wrong_langid, recognizer: wrong_avail.then_some(wrong_rec) };
            let correct_on_a = draw.rng.random_bool(0.5);
            let (a, b, lang_a, lang_b) = if correct_on_a {
                (correct, wrong, chosen[0], competitor)
            } else {
                (wrong, correct, competitor, chosen[0])
            };
            samples.push(PairSample {
                utterance_id: utterance_id.clone(),
                lang_a: langs[lang_a].clone(),
                lang_b: langs[lang_b].clone(),
                label: correct_on_a as u8,
                weight: 1.0,
                a,
                b,
            });
        }
        utterance += 1;
    }

    let norm_config = NormConfig::fit(&samples)?;
    Ok(Corpus {
        samples,
        norm_config,
        metadata: CorpusMetadata {
            seed: config.rng_seed,
            config_hash: config.hash(),
            utterance_count: utterance as usize,
        },
    })
}

/// Partitions samples so that no utterance appears on both sides.
/// `round(ratio * n_utterances)` utterances go to the training side.
pub fn split_by_utterance(
    samples: &[PairSample],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<PairSample>, Vec<PairSample>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(FusionError::Config(format!("split ratio must be in (0,1), got {ratio}")));
    }
    let mut ids: Vec<&str> = samples
        .iter()
        .map(|s| s.utterance_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_train = (ratio * ids.len() as f64).round() as usize;
    let train_ids: BTreeSet<&str> = ids[..n_train].iter().copied().collect();
    let (train, test) = samples
        .iter()
        .cloned()
        .partition(|s| train_ids.contains(s.utterance_id.as_str()));
    Ok((train, test))
}

/// Appends the side-swapped, label-flipped copy of every sample.
pub fn mirror(samples: &[PairSample]) -> Vec<PairSample> {
    samples.iter().flat_map(|s| [s.clone(), s.swapped()]).collect()
}

/// Whether the label points at the only side whose recognizer finished.
/// `None` outside the Either slice.
pub fn label_matches_recognizer_side(s: &PairSample) -> Option<bool> {
    match (s.a.recognizer_available(), s.b.recognizer_available()) {
        (true, false) => Some(s.label == 1),
        (false, true) => Some(s.label == 0),
        _ => None,
    }
}

/// Removes the Either-slice label bias: with `p` the unweighted fraction of
/// Either samples whose label matches the recognizer side, matching samples
/// get weight `0.5 / p` and the rest `0.5 / (1 - p)`.
pub fn reweight_either(train: &[PairSample]) -> Result<Vec<PairSample>> {
    let (matches, total) = train
        .iter()
        .filter_map(label_matches_recognizer_side)
        .fold((0usize, 0usize), |(m, t), hit| (m + hit as usize, t + 1));
    let mut out = train.to_vec();
    if total == 0 {
        return Ok(out);
    }
    let p = matches as f64 / total as f64;
    if matches == 0 || matches == total {
        return Err(FusionError::DegenerateSlice(format!(
            "either-slice match fraction is {p}; cannot rebalance"
        )));
    }
    let (w_match, w_other) = either_weights(p);
    for s in &mut out {
        match label_matches_recognizer_side(s) {
            Some(true) => s.weight = w_match,
            Some(false) => s.weight = w_other,
            None => s.weight = 1.0,
        }
    }
    Ok(out)
}

/// Weights for matching and non-matching Either samples at match fraction `p`.
pub fn either_weights(p: f64) -> (f64, f64) {
    (0.5 / p, 0.5 / (1.0 - p))
}

/// Keeps every sample and adds, for each Both sample, one copy with side a's
/// recognizer signals masked and one with side b's masked.
pub fn augment_mask_both(train: &[PairSample]) -> Vec<PairSample> {
    let mut out = Vec::with_capacity(train.len() * 2);
    for s in train {
        out.push(s.clone());
        if s.missingness() == MissingnessClass::Both {
            let mut mask_a = s.clone();
            mask_a.a = s.a.masked();
            let mut mask_b = s.clone();
            mask_b.b = s.b.masked();
            out.push(mask_a);
            out.push(mask_b);
        }
    }
    out
}

/// Standard preparation of a training split: rebalance the Either slice,
/// optionally add masked copies of Both samples, then mirror.
pub fn prepare_training_set(train: &[PairSample], mask_augment: bool) -> Result<Vec<PairSample>> {
    let weighted = reweight_either(train)?;
    let augmented = if mask_augment { augment_mask_both(&weighted) } else { weighted };
    Ok(mirror(&augmented))
}
