//! Signal vocabulary, normalization and pairing shared by every backend.
//!
//! A candidate language contributes six signals: the acoustic language-id
//! probability, which is always present, and five recognizer-derived signals
//! that only exist when that language's recognizer finished in time. A pair
//! of candidates is flattened into a [`FeatureVector12`] with side a's six
//! normalized signals followed by side b's.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};

/// Number of signals per candidate language.
pub const SIGNALS_PER_SIDE: usize = 6;
/// Width of a pair feature vector.
pub const PAIR_FEATURES: usize = 2 * SIGNALS_PER_SIDE;
/// Normalized value written into slots whose recognizer signal is missing.
pub const IMPUTED_VALUE: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalName {
    LangidScore,
    AmCost,
    LmCost,
    ConfidenceScore,
    EntropyScore,
    TextLangidScore,
}

impl SignalName {
    /// Slot order within one side of a feature vector.
    pub const ALL: [SignalName; SIGNALS_PER_SIDE] = [
        SignalName::LangidScore,
        SignalName::AmCost,
        SignalName::LmCost,
        SignalName::ConfidenceScore,
        SignalName::EntropyScore,
        SignalName::TextLangidScore,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SignalName::LangidScore => "langid_score",
            SignalName::AmCost => "am_cost",
            SignalName::LmCost => "lm_cost",
            SignalName::ConfidenceScore => "confidence_score",
            SignalName::EntropyScore => "entropy_score",
            SignalName::TextLangidScore => "text_langid_score",
        }
    }

    /// Position of this signal within one side (0..6).
    pub fn slot(self) -> usize {
        Self::ALL.iter().position(|&s| s == self).unwrap()
    }

    /// Whether a larger raw value is evidence *for* the language.
    pub fn higher_is_better(self) -> bool {
        matches!(
            self,
            SignalName::LangidScore | SignalName::ConfidenceScore | SignalName::TextLangidScore
        )
    }

    /// Probability-valued signals use the affine map; wide-span costs use the log map.
    pub fn default_kind(self) -> NormKind {
        if self.higher_is_better() {
            NormKind::Affine
        } else {
            NormKind::Log
        }
    }
}

impl fmt::Display for SignalName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignalName {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self> {
        SignalName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| FusionError::Config(format!("unknown signal name `{s}`")))
    }
}

/// The five signals produced by a language's recognizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecognizerSignals {
    pub am_cost: f64,
    pub lm_cost: f64,
    pub confidence_score: f64,
    pub entropy_score: f64,
    pub text_langid_score: f64,
}

/// One language side's signals. `recognizer` is `None` when the recognizer
/// did not finish before the decision deadline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSignals", into = "RawSignals")]
pub struct SignalVector {
    pub langid_score: f64,
    pub recognizer: Option<RecognizerSignals>,
}

impl SignalVector {
    pub fn langid_only(langid_score: f64) -> Self {
        Self { langid_score, recognizer: None }
    }

    pub fn recognizer_available(&self) -> bool {
        self.recognizer.is_some()
    }

    pub fn get(&self, name: SignalName) -> Option<f64> {
        let r = self.recognizer.as_ref();
        match name {
            SignalName::LangidScore => Some(self.langid_score),
            SignalName::AmCost => r.map(|r| r.am_cost),
            SignalName::LmCost => r.map(|r| r.lm_cost),
            SignalName::ConfidenceScore => r.map(|r| r.confidence_score),
            SignalName::EntropyScore => r.map(|r| r.entropy_score),
            SignalName::TextLangidScore => r.map(|r| r.text_langid_score),
        }
    }

    /// Drops the recognizer signals, as if the recognizer missed the deadline.
    pub fn masked(&self) -> Self {
        Self::langid_only(self.langid_score)
    }

    fn check_domains(&self) -> Result<()> {
        let unit = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(FusionError::Input(format!("{name} = {v} outside [0,1]")))
            }
        };
        let nonneg = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(FusionError::Input(format!("{name} = {v} must be finite and nonnegative")))
            }
        };
        unit("langid_score", self.langid_score)?;
        if let Some(r) = &self.recognizer {
            nonneg("am_cost", r.am_cost)?;
            nonneg("lm_cost", r.lm_cost)?;
            unit("confidence_score", r.confidence_score)?;
            nonneg("entropy_score", r.entropy_score)?;
            unit("text_langid_score", r.text_langid_score)?;
        }
        Ok(())
    }
}

/// Wire form of [`SignalVector`]: the six named fields, recognizer fields nullable.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSignals {
    pub langid_score: f64,
    #[serde(default)]
    pub am_cost: Option<f64>,
    #[serde(default)]
    pub lm_cost: Option<f64>,
    #[serde(default)]
    pub confidence_score: Option<f64>,
    #[serde(default)]
    pub entropy_score: Option<f64>,
    #[serde(default)]
    pub text_langid_score: Option<f64>,
}

impl TryFrom<RawSignals> for SignalVector {
    type Error = FusionError;

    fn try_from(raw: RawSignals) -> Result<Self> {
        let fields = [
            raw.am_cost,
            raw.lm_cost,
            raw.confidence_score,
            raw.entropy_score,
            raw.text_langid_score,
        ];
        let present = fields.iter().filter(|f| f.is_some()).count();
        let recognizer = match present {
            0 => None,
            5 => Some(RecognizerSignals {
                am_cost: raw.am_cost.unwrap(),
                lm_cost: raw.lm_cost.unwrap(),
                confidence_score: raw.confidence_score.unwrap(),
                entropy_score: raw.entropy_score.unwrap(),
                text_langid_score: raw.text_langid_score.unwrap(),
            }),
            _ => {
                return Err(FusionError::Input(
                    "recognizer signals must be all present or all null".into(),
                ))
            }
        };
        let v = SignalVector { langid_score: raw.langid_score, recognizer };
        v.check_domains()?;
        Ok(v)
    }
}

impl From<SignalVector> for RawSignals {
    fn from(v: SignalVector) -> Self {
        let r = v.recognizer;
        RawSignals {
            langid_score: v.langid_score,
            am_cost: r.map(|r| r.am_cost),
            lm_cost: r.map(|r| r.lm_cost),
            confidence_score: r.map(|r| r.confidence_score),
            entropy_score: r.map(|r| r.entropy_score),
            text_langid_score: r.map(|r| r.text_langid_score),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingnessClass {
    Both,
    Either,
    Neither,
}

impl MissingnessClass {
    pub const ALL: [MissingnessClass; 3] =
        [MissingnessClass::Both, MissingnessClass::Either, MissingnessClass::Neither];

    pub fn as_str(self) -> &'static str {
        match self {
            MissingnessClass::Both => "both",
            MissingnessClass::Either => "either",
            MissingnessClass::Neither => "neither",
        }
    }
}

/// A labeled pair of candidate languages. `label == 1` means language a is correct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPair")]
pub struct PairSample {
    pub utterance_id: String,
    pub lang_a: String,
    pub lang_b: String,
    pub label: u8,
    pub weight: f64,
    pub a: SignalVector,
    pub b: SignalVector,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    utterance_id: String,
    lang_a: String,
    lang_b: String,
    label: u8,
    #[serde(default = "default_weight")]
    weight: f64,
    a: SignalVector,
    b: SignalVector,
}

fn default_weight() -> f64 {
    1.0
}

impl TryFrom<RawPair> for PairSample {
    type Error = FusionError;

    fn try_from(r: RawPair) -> Result<Self> {
        let p = PairSample {
            utterance_id: r.utterance_id,
            lang_a: r.lang_a,
            lang_b: r.lang_b,
            label: r.label,
            weight: r.weight,
            a: r.a,
            b: r.b,
        };
        p.validate()?;
        Ok(p)
    }
}

impl PairSample {
    pub fn validate(&self) -> Result<()> {
        if self.lang_a == self.lang_b {
            return Err(FusionError::Input(format!(
                "pair for utterance {} uses {} on both sides",
                self.utterance_id, self.lang_a
            )));
        }
        if self.label > 1 {
            return Err(FusionError::Input(format!("label {} is not 0 or 1", self.label)));
        }
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(FusionError::Input(format!("weight {} must be positive", self.weight)));
        }
        Ok(())
    }

    /// The same comparison with the sides exchanged and the label flipped.
    pub fn swapped(&self) -> PairSample {
        PairSample {
            utterance_id: self.utterance_id.clone(),
            lang_a: self.lang_b.clone(),
            lang_b: self.lang_a.clone(),
            label: 1 - self.label,
            weight: self.weight,
            a: self.b,
            b: self.a,
        }
    }

    pub fn missingness(&self) -> MissingnessClass {
        classify_missingness(self)
    }

    pub fn true_language(&self) -> &str {
        if self.label == 1 {
            &self.lang_a
        } else {
            &self.lang_b
        }
    }

    pub fn to_json_line(&self) -> String {
        // Field order is fixed by the struct, so the line is byte-stable.
        serde_json::to_string(self).expect("pair sample serializes")
    }
}

pub fn classify_missingness(pair: &PairSample) -> MissingnessClass {
    match (pair.a.recognizer_available(), pair.b.recognizer_available()) {
        (true, true) => MissingnessClass::Both,
        (false, false) => MissingnessClass::Neither,
        _ => MissingnessClass::Either,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Affine,
    Log,
}

/// Per-signal normalization: `affine` maps `[lo, hi]` linearly onto `[-1, 1]`,
/// `log` does the same in log space. Both clamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub kind: NormKind,
    pub lo: f64,
    pub hi: f64,
}

impl NormSpec {
    pub fn affine_unit() -> Self {
        NormSpec { kind: NormKind::Affine, lo: 0.0, hi: 1.0 }
    }

    fn validate(&self, name: SignalName) -> Result<()> {
        let ok = self.lo.is_finite()
            && self.hi.is_finite()
            && self.hi > self.lo
            && (self.kind == NormKind::Affine || self.lo > 0.0);
        if ok {
            Ok(())
        } else {
            Err(FusionError::Config(format!(
                "invalid bounds for {name}: lo={}, hi={}",
                self.lo, self.hi
            )))
        }
    }

    fn apply(&self, x: f64) -> f64 {
        let y = match self.kind {
            NormKind::Affine => 2.0 * (x - self.lo) / (self.hi - self.lo) - 1.0,
            NormKind::Log => {
                // Values at or below the floor saturate at -1.
                let x = x.max(self.lo);
                2.0 * (x.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln()) - 1.0
            }
        };
        y.clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormConfig {
    pub signals: BTreeMap<SignalName, NormSpec>,
}

impl NormConfig {
    pub fn new(signals: BTreeMap<SignalName, NormSpec>) -> Result<Self> {
        let cfg = NormConfig { signals };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for name in SignalName::ALL {
            self.spec(name)?.validate(name)?;
        }
        Ok(())
    }

    pub fn spec(&self, name: SignalName) -> Result<&NormSpec> {
        self.signals
            .get(&name)
            .ok_or_else(|| FusionError::Config(format!("no normalization entry for {name}")))
    }

    /// Affine `t(x) = 2x - 1` for probabilities; log bounds at the 1st/99th
    /// percentile of the observed positive values for cost-like signals.
    pub fn fit<'a, I>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a PairSample>,
    {
        let log_signals: Vec<SignalName> = SignalName::ALL
            .into_iter()
            .filter(|s| s.default_kind() == NormKind::Log)
            .collect();
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); log_signals.len()];
        for p in samples {
            for side in [&p.a, &p.b] {
                for (col, &s) in columns.iter_mut().zip(&log_signals) {
                    if let Some(v) = side.get(s) {
                        if v > 0.0 {
                            col.push(v);
                        }
                    }
                }
            }
        }
        let mut signals = BTreeMap::new();
        for s in SignalName::ALL {
            if s.default_kind() == NormKind::Affine {
                signals.insert(s, NormSpec::affine_unit());
            }
        }
        for (mut col, s) in columns.into_iter().zip(log_signals) {
            if col.is_empty() {
                return Err(FusionError::Input(format!(
                    "cannot fit log bounds for {s}: no positive observations"
                )));
            }
            col.sort_by(f64::total_cmp);
            let mut lo = percentile(&col, 0.01);
            let mut hi = percentile(&col, 0.99);
            if hi <= lo {
                lo /= 2.0;
                hi = hi * 2.0 + f64::MIN_POSITIVE;
            }
            signals.insert(s, NormSpec { kind: NormKind::Log, lo, hi });
        }
        NormConfig::new(signals)
    }
}

/// Nearest-rank percentile of an ascending slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Maps a raw signal value into `[-1, 1]`.
pub fn normalize(signal: SignalName, raw_value: f64, norm: &NormConfig) -> Result<f64> {
    if !raw_value.is_finite() {
        return Err(FusionError::Input(format!("{signal} value {raw_value} is not finite")));
    }
    Ok(norm.spec(signal)?.apply(raw_value))
}

/// [`normalize`] keyed by the signal's wire name.
pub fn normalize_named(signal_name: &str, raw_value: f64, norm: &NormConfig) -> Result<f64> {
    normalize(signal_name.parse()?, raw_value, norm)
}

/// Twelve normalized features: side a's six signals, then side b's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector12(pub [f64; PAIR_FEATURES]);

impl FeatureVector12 {
    /// Exchanges the two halves.
    pub fn flip(&self) -> Self {
        let mut out = [0.0; PAIR_FEATURES];
        out[..SIGNALS_PER_SIDE].copy_from_slice(&self.0[SIGNALS_PER_SIDE..]);
        out[SIGNALS_PER_SIDE..].copy_from_slice(&self.0[..SIGNALS_PER_SIDE]);
        FeatureVector12(out)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn write_side(out: &mut [f64], side: &SignalVector, norm: &NormConfig) -> Result<()> {
    for (slot, name) in SignalName::ALL.into_iter().enumerate() {
        out[slot] = match side.get(name) {
            Some(v) => normalize(name, v, norm)?,
            None => IMPUTED_VALUE,
        };
    }
    Ok(())
}

pub fn build_feature_vector(pair: &PairSample, norm: &NormConfig) -> Result<FeatureVector12> {
    let mut out = [0.0; PAIR_FEATURES];
    write_side(&mut out[..SIGNALS_PER_SIDE], &pair.a, norm)?;
    write_side(&mut out[SIGNALS_PER_SIDE..], &pair.b, norm)?;
    Ok(FeatureVector12(out))
}

pub fn featurize(samples: &[PairSample], norm: &NormConfig) -> Result<Vec<FeatureVector12>> {
    samples.iter().map(|s| build_feature_vector(s, norm)).collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn test_norm() -> NormConfig {
        let mut m = BTreeMap::new();
        for s in SignalName::ALL {
            let spec = match s.default_kind() {
                NormKind::Affine => NormSpec::affine_unit(),
                NormKind::Log => NormSpec { kind: NormKind::Log, lo: 1.0, hi: 100.0 },
            };
            m.insert(s, spec);
        }
        NormConfig::new(m).unwrap()
    }

    pub(crate) fn full_side(langid: f64) -> SignalVector {
        SignalVector {
            langid_score: langid,
            recognizer: Some(RecognizerSignals {
                am_cost: 20.0,
                lm_cost: 3.0,
                confidence_score: 0.8,
                entropy_score: 2.0,
                text_langid_score: 0.7,
            }),
        }
    }

    pub(crate) fn pair(a: SignalVector, b: SignalVector) -> PairSample {
        PairSample {
            utterance_id: "u0".into(),
            lang_a: "en".into(),
            lang_b: "fr".into(),
            label: 1,
            weight: 1.0,
            a,
            b,
        }
    }

    #[test]
    fn affine_signals_use_two_x_minus_one() {
        let n = test_norm();
        assert_eq!(normalize(SignalName::ConfidenceScore, 0.5, &n).unwrap(), 0.0);
        assert_eq!(normalize(SignalName::LangidScore, 1.0, &n).unwrap(), 1.0);
        assert_eq!(normalize(SignalName::TextLangidScore, 0.0, &n).unwrap(), -1.0);
    }

    #[test]
    fn log_midpoint_maps_to_zero() {
        let n = test_norm();
        let (lo, hi) = (1.0_f64, 100.0_f64);
        // 2 * (ln(lo * sqrt(hi/lo)) - ln lo) / (ln hi - ln lo) - 1 = 2 * 0.5 - 1 = 0
        let x = lo * (hi / lo).sqrt();
        let y = normalize(SignalName::AmCost, x, &n).unwrap();
        assert!(y.abs() < 1e-15, "{y}");
    }

    #[test]
    fn log_signals_clamp_and_floor() {
        let n = test_norm();
        assert_eq!(normalize(SignalName::LmCost, 1e6, &n).unwrap(), 1.0);
        assert_eq!(normalize(SignalName::LmCost, 0.0, &n).unwrap(), -1.0);
        assert_eq!(normalize(SignalName::EntropyScore, 0.5, &n).unwrap(), -1.0);
    }

    #[test]
    fn unknown_name_and_non_finite_input_fail() {
        let n = test_norm();
        assert!(matches!(normalize_named("pitch", 0.1, &n), Err(FusionError::Config(_))));
        assert!(matches!(
            normalize(SignalName::AmCost, f64::NAN, &n),
            Err(FusionError::Input(_))
        ));
        let mut partial = n.clone();
        partial.signals.remove(&SignalName::AmCost);
        assert!(matches!(normalize(SignalName::AmCost, 1.0, &partial), Err(FusionError::Config(_))));
    }

    #[test]
    fn missing_side_b_is_imputed() {
        let n = test_norm();
        let p = pair(full_side(0.9), SignalVector::langid_only(0.2));
        let fv = build_feature_vector(&p, &n).unwrap();
        assert_eq!(fv.0[6], normalize(SignalName::LangidScore, 0.2, &n).unwrap());
        assert!(fv.0[7..].iter().all(|&v| v == IMPUTED_VALUE));
        assert!(fv.0[..6].iter().all(|&v| v != IMPUTED_VALUE));
    }

    #[test]
    fn missingness_classes() {
        let full = full_side(0.5);
        let bare = SignalVector::langid_only(0.5);
        assert_eq!(classify_missingness(&pair(full, full)), MissingnessClass::Both);
        assert_eq!(classify_missingness(&pair(full, bare)), MissingnessClass::Either);
        assert_eq!(classify_missingness(&pair(bare, full)), MissingnessClass::Either);
        assert_eq!(classify_missingness(&pair(bare, bare)), MissingnessClass::Neither);
    }

    #[test]
    fn jsonl_record_round_trips_with_nulls() {
        let p = pair(full_side(0.9), SignalVector::langid_only(0.2));
        let line = p.to_json_line();
        assert!(line.contains("\"am_cost\":null"));
        let back: PairSample = serde_json::from_str(&line).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn partial_recognizer_fields_are_rejected() {
        let bad = r#"{"utterance_id":"u","lang_a":"en","lang_b":"fr","label":1,"weight":1.0,
            "a":{"langid_score":0.5,"am_cost":3.0},"b":{"langid_score":0.5}}"#;
        assert!(serde_json::from_str::<PairSample>(bad).is_err());
        let same_lang = r#"{"utterance_id":"u","lang_a":"en","lang_b":"en","label":1,
            "a":{"langid_score":0.5},"b":{"langid_score":0.5}}"#;
        assert!(serde_json::from_str::<PairSample>(same_lang).is_err());
    }

    #[test]
    fn norm_config_serializes_per_signal() {
        let js = serde_json::to_value(test_norm()).unwrap();
        assert_eq!(js["am_cost"]["kind"], "log");
        assert_eq!(js["confidence_score"]["kind"], "affine");
        assert_eq!(js["confidence_score"]["hi"], 1.0);
    }

    #[test]
    fn fitted_bounds_follow_percentiles() {
        let samples: Vec<PairSample> = (1..=100)
            .map(|i| {
                let mut s = full_side(0.5);
                let r = s.recognizer.as_mut().unwrap();
                r.am_cost = i as f64;
                r.lm_cost = i as f64;
                r.entropy_score = i as f64;
                pair(s, SignalVector::langid_only(0.5))
            })
            .collect();
        let n = NormConfig::fit(&samples).unwrap();
        let am = n.spec(SignalName::AmCost).unwrap();
        assert_eq!((am.lo, am.hi), (1.0, 99.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_side() -> impl Strategy<Value = SignalVector> {
            (
                0.0..=1.0f64,
                prop::option::of((0.0..500.0f64, 0.0..500.0f64, 0.0..=1.0f64, 0.0..50.0f64, 0.0..=1.0f64)),
            )
                .prop_map(|(l, r)| SignalVector {
                    langid_score: l,
                    recognizer: r.map(|(am, lm, c, e, t)| RecognizerSignals {
                        am_cost: am,
                        lm_cost: lm,
                        confidence_score: c,
                        entropy_score: e,
                        text_langid_score: t,
                    }),
                })
        }

        proptest! {
            #[test]
            fn swap_flips_feature_vector(a in arb_side(), b in arb_side()) {
                let n = test_norm();
                let p = pair(a, b);
                let fv = build_feature_vector(&p, &n).unwrap();
                let fv_swapped = build_feature_vector(&p.swapped(), &n).unwrap();
                prop_assert_eq!(fv_swapped, fv.flip());
                prop_assert!(fv.0.iter().all(|v| (-1.0..=1.0).contains(v)));
            }

            #[test]
            fn normalize_is_monotone(x1 in 0.0..1000.0f64, x2 in 0.0..1000.0f64) {
                let n = test_norm();
                let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
                for s in SignalName::ALL {
                    let (lo, hi) = if s.default_kind() == NormKind::Affine {
                        (lo / 1000.0, hi / 1000.0)
                    } else {
                        (lo, hi)
                    };
                    prop_assert!(normalize(s, lo, &n).unwrap() <= normalize(s, hi, &n).unwrap());
                }
            }
        }
    }
}
