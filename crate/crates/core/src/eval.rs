//! Decision routing, slice-wise error reports, multiway aggregation and
//! backend comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::error::{FusionError, Result};
use crate::hash::sha256_hex;
use crate::signal::{MissingnessClass, PairSample};

pub const DEFAULT_TOP_K: usize = 15;
pub const SLICE_ALL: &str = "all";
/// Tolerance on `f(a,b) + f(b,a) = 1` when aggregating.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeitherPolicy {
    /// Without recognizer signals, pick the higher LangID score.
    #[default]
    LangidCompare,
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

pub struct Router<'a> {
    pub backend: &'a Backend,
    pub neither_policy: NeitherPolicy,
}

impl<'a> Router<'a> {
    pub fn new(backend: &'a Backend) -> Self {
        Router { backend, neither_policy: NeitherPolicy::default() }
    }

    /// Picks a side. Ties, in LangID score or at probability 0.5, go to the
    /// lexicographically first language, so a decision and its mirror agree.
    pub fn decide(&self, pair: &PairSample) -> Result<Side> {
        let tie = if pair.lang_a <= pair.lang_b { Side::A } else { Side::B };
        if self.neither_policy == NeitherPolicy::LangidCompare && pair.missingness() == MissingnessClass::Neither {
            return Ok(match pair.a.langid_score.total_cmp(&pair.b.langid_score) {
                std::cmp::Ordering::Greater => Side::A,
                std::cmp::Ordering::Less => Side::B,
                std::cmp::Ordering::Equal => tie,
            });
        }
        let p = self.backend.predict(pair)?;
        Ok(if p == 0.5 { tie } else { side_for(p) })
    }
}

/// Side for a bare probability; 0.5 goes to side a.
pub fn side_for(probability: f64) -> Side {
    if probability >= 0.5 {
        Side::A
    } else {
        Side::B
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SliceStats {
    /// Weighted error fraction; `None` when the slice is empty.
    pub error_rate: Option<f64>,
    pub count: usize,
    pub errors: usize,
    pub weighted_count: f64,
    pub weighted_errors: f64,
}

impl SliceStats {
    fn add(&mut self, wrong: bool, weight: f64) {
        self.count += 1;
        self.weighted_count += weight;
        if wrong {
            self.errors += 1;
            self.weighted_errors += weight;
        }
    }

    fn finish(&mut self) {
        self.error_rate = (self.count > 0).then(|| self.weighted_errors / self.weighted_count);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    /// Unordered pair, lexicographically first language first: `en-es`.
    pub pair: String,
    pub count: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub backend: String,
    pub neither_policy: NeitherPolicy,
    pub test_set_hash: String,
    /// Keys `both`, `either`, `neither` and `all`.
    pub slices: BTreeMap<String, SliceStats>,
    /// Sorted by count, descending, then by pair name.
    pub pairs: Vec<PairStats>,
    pub top_k: usize,
    pub top_k_pair_average: Option<f64>,
}

impl EvalReport {
    pub fn error_rate(&self, slice: &str) -> Option<f64> {
        self.slices.get(slice).and_then(|s| s.error_rate)
    }
}

pub fn pair_key(pair: &PairSample) -> String {
    let (x, y) = if pair.lang_a <= pair.lang_b { (&pair.lang_a, &pair.lang_b) } else { (&pair.lang_b, &pair.lang_a) };
    format!("{x}-{y}")
}

fn sorted_lines(samples: &[PairSample]) -> Vec<(String, usize)> {
    let mut lines: Vec<(String, usize)> = samples.par_iter().map(|s| s.to_json_line()).zip(0..samples.len()).collect();
    lines.par_sort();
    lines
}

/// Hash of the test set as a multiset of samples, so reordering the file
/// does not change it.
pub fn test_set_hash(samples: &[PairSample]) -> String {
    hash_lines(&sorted_lines(samples))
}

fn hash_lines(lines: &[(String, usize)]) -> String {
    let mut text = String::new();
    for (l, _) in lines {
        text.push_str(l);
        text.push('\n');
    }
    sha256_hex(text.as_bytes())
}

/// Error rates per missingness slice and per language pair. Samples are
/// accumulated in a canonical order, so the report does not depend on the
/// order of `test_set`.
pub fn evaluate(router: &Router, test_set: &[PairSample], top_k: usize) -> Result<EvalReport> {
    let lines = sorted_lines(test_set);
    let wrong: Vec<bool> = lines
        .par_iter()
        .map(|&(_, i)| {
            let s = &test_set[i];
            let correct = if s.label == 1 { Side::A } else { Side::B };
            router.decide(s).map(|d| d != correct)
        })
        .collect::<Result<_>>()?;

    let mut slices: BTreeMap<String, SliceStats> = MissingnessClass::ALL
        .iter()
        .map(|c| (c.as_str().to_string(), SliceStats::default()))
        .chain([(SLICE_ALL.to_string(), SliceStats::default())])
        .collect();
    let mut per_pair: BTreeMap<String, SliceStats> = BTreeMap::new();
    for (&(_, i), &w) in lines.iter().zip(&wrong) {
        let s = &test_set[i];
        slices.get_mut(s.missingness().as_str()).unwrap().add(w, s.weight);
        slices.get_mut(SLICE_ALL).unwrap().add(w, s.weight);
        per_pair.entry(pair_key(s)).or_default().add(w, s.weight);
    }
    slices.values_mut().for_each(SliceStats::finish);

    let mut pairs: Vec<PairStats> = per_pair
        .into_iter()
        .map(|(pair, st)| PairStats { pair, count: st.count, accuracy: 1.0 - st.weighted_errors / st.weighted_count })
        .collect();
    pairs.sort_by(|x, y| y.count.cmp(&x.count).then_with(|| x.pair.cmp(&y.pair)));
    let top: Vec<f64> = pairs.iter().take(top_k).map(|p| p.accuracy).collect();
    let top_k_pair_average = (!top.is_empty()).then(|| top.iter().sum::<f64>() / top.len() as f64);

    Ok(EvalReport {
        backend: router.backend.name().to_string(),
        neither_policy: router.neither_policy,
        test_set_hash: hash_lines(&lines),
        slices,
        pairs,
        top_k,
        top_k_pair_average,
    })
}

/// Scores `f(a, b)` for every ordered pair of `languages`; the diagonal is unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub languages: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

impl ScoreTable {
    /// Fills the table from a pairwise predictor.
    pub fn from_fn<F>(languages: Vec<String>, mut f: F) -> Result<Self>
    where
        F: FnMut(&str, &str) -> Result<f64>,
    {
        let n = languages.len();
        let mut scores = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    scores[i][j] = f(&languages[i], &languages[j])?;
                }
            }
        }
        Ok(ScoreTable { languages, scores })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    /// `(language, g)` by descending `g`.
    pub ranked: Vec<(String, f64)>,
}

impl Ranking {
    pub fn winner(&self) -> &str {
        &self.ranked[0].0
    }
}

/// Ranks languages by `g(a) = Σ_{b≠a} f(a, b)`; equal totals are ordered by
/// language id.
pub fn aggregate_multiway(table: &ScoreTable) -> Result<Ranking> {
    let n = table.languages.len();
    if n < 2 || table.scores.len() != n || table.scores.iter().any(|r| r.len() != n) {
        return Err(FusionError::Input(format!("score table must be n×n with n ≥ 2, got {n} languages")));
    }
    for i in 0..n {
        for j in i + 1..n {
            let s = table.scores[i][j] + table.scores[j][i];
            if !((s - 1.0).abs() <= CONSISTENCY_TOLERANCE) {
                return Err(FusionError::Input(format!(
                    "f({0},{1}) + f({1},{0}) = {s}, expected 1",
                    table.languages[i], table.languages[j]
                )));
            }
        }
    }
    let mut ranked: Vec<(String, f64)> = (0..n)
        .map(|i| (table.languages[i].clone(), (0..n).filter(|&j| j != i).map(|j| table.scores[i][j]).sum()))
        .collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    Ok(Ranking { ranked })
}

/// `(base - new) / base`; `None` when the baseline error is zero or absent.
pub fn relative_reduction(base: Option<f64>, new: Option<f64>) -> Option<f64> {
    match (base, new) {
        (Some(b), Some(n)) if b > 0.0 => Some((b - n) / b),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub backend: String,
    pub error_rates: BTreeMap<String, Option<f64>>,
    pub relative_reduction: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub test_set_hash: String,
    pub reference: String,
    pub rows: Vec<ComparisonRow>,
}

pub const SLICE_ORDER: [&str; 4] = ["both", "either", "neither", SLICE_ALL];

/// Relative reductions against the baseline report (or the first report when
/// none is a baseline). All reports must share a test set.
pub fn compare_backends(reports: &[EvalReport]) -> Result<Comparison> {
    let first = reports.first().ok_or_else(|| FusionError::Input("no reports to compare".into()))?;
    if let Some(r) = reports.iter().find(|r| r.test_set_hash != first.test_set_hash) {
        return Err(FusionError::Input(format!(
            "reports were computed on different test sets ({} vs {})",
            first.test_set_hash, r.test_set_hash
        )));
    }
    let reference = reports.iter().find(|r| r.backend == "baseline").unwrap_or(first);
    let rows = reports
        .iter()
        .map(|r| ComparisonRow {
            backend: r.backend.clone(),
            error_rates: SLICE_ORDER.iter().map(|&s| (s.to_string(), r.error_rate(s))).collect(),
            relative_reduction: SLICE_ORDER
                .iter()
                .map(|&s| (s.to_string(), relative_reduction(reference.error_rate(s), r.error_rate(s))))
                .collect(),
        })
        .collect();
    Ok(Comparison { test_set_hash: first.test_set_hash.clone(), reference: reference.backend.clone(), rows })
}

impl Comparison {
    /// Aligned text table: error rates in percent, reductions in parentheses.
    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}%", 100.0 * x));
        let mut out = format!("{:<10}", "backend");
        for s in SLICE_ORDER {
            let _ = write!(out, " {:>20}", s);
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<10}", row.backend);
            for s in SLICE_ORDER {
                let cell = format!("{} ({})", fmt(row.error_rates[s]), fmt(row.relative_reduction[s]));
                let _ = write!(out, " {:>20}", cell);
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::tests::{full_side, pair};
    use crate::signal::SignalVector;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(la: f64, lb: f64, label: u8, recognizer: bool, langs: (&str, &str)) -> PairSample {
        let side = |l: f64| if recognizer { full_side(l) } else { SignalVector::langid_only(l) };
        let mut p = pair(side(la), side(lb));
        p.label = label;
        p.lang_a = langs.0.into();
        p.lang_b = langs.1.into();
        p
    }

    #[test]
    fn routing_and_ties() {
        let base = Backend::Baseline;
        let r = Router::new(&base);
        assert_eq!(r.decide(&sample(0.9, 0.3, 1, false, ("en", "es"))).unwrap(), Side::A);
        assert_eq!(r.decide(&sample(0.4, 0.4, 1, false, ("en", "es"))).unwrap(), Side::A);
        assert_eq!(r.decide(&sample(0.4, 0.4, 1, false, ("es", "en"))).unwrap(), Side::B);
        let model = Router { backend: &base, neither_policy: NeitherPolicy::Model };
        assert_eq!(model.decide(&sample(0.4, 0.4, 1, true, ("en", "es"))).unwrap(), Side::A);
        assert_eq!(model.decide(&sample(0.4, 0.4, 1, true, ("es", "en"))).unwrap(), Side::B);
        assert_eq!(side_for(0.49), Side::B);
        assert_eq!(side_for(0.5), Side::A);
    }

    #[test]
    fn perfect_classifier_and_empty_slices() {
        let base = Backend::Baseline;
        let test: Vec<_> = (0..20).map(|i| sample(0.9, 0.1, 1, i % 2 == 0, ("en", "es"))).collect();
        let rep = evaluate(&Router::new(&base), &test, DEFAULT_TOP_K).unwrap();
        assert_eq!(rep.error_rate("both"), Some(0.0));
        assert_eq!(rep.error_rate("neither"), Some(0.0));
        assert_eq!(rep.error_rate("either"), None);
        let counts: usize = ["both", "either", "neither"].iter().map(|s| rep.slices[*s].count).sum();
        assert_eq!(counts, rep.slices["all"].count);
        assert_eq!(rep.top_k_pair_average, Some(1.0));
        assert_eq!(rep.pairs[0].pair, "en-es");
    }

    #[test]
    fn coin_flip_on_mirrored_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut test = Vec::new();
        for _ in 0..5000 {
            let (la, lb) = (rng.random::<f64>(), rng.random::<f64>());
            let s = sample(la, lb, rng.random_range(0..2), false, ("fr", "de"));
            test.push(s.swapped());
            test.push(s);
        }
        // The baseline is independent of the label here, so it behaves as a coin flip.
        let base = Backend::Baseline;
        let rep = evaluate(&Router::new(&base), &test, DEFAULT_TOP_K).unwrap();
        assert!((rep.error_rate("all").unwrap() - 0.5).abs() < 0.03);
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let langs = [("en", "es"), ("hi", "en"), ("fr", "de"), ("ja", "ko")];
        let mut test: Vec<_> = (0..300)
            .map(|i| {
                let mut s = sample(rng.random(), rng.random(), rng.random_range(0..2), i % 3 != 0, langs[i % 4]);
                s.weight = rng.random_range(0.1..3.0);
                s
            })
            .collect();
        let base = Backend::Baseline;
        let a = evaluate(&Router::new(&base), &test, 2).unwrap();
        test.shuffle(&mut rng);
        let b = evaluate(&Router::new(&base), &test, 2).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.top_k, 2);
    }

    #[test]
    fn multiway_examples() {
        let langs: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let f = |x: &str, y: &str| -> Result<f64> {
            Ok(match (x, y) {
                ("a", _) => 0.9,
                (_, "a") => 0.1,
                _ => 0.5,
            })
        };
        let r = aggregate_multiway(&ScoreTable::from_fn(langs, f).unwrap()).unwrap();
        assert_eq!(r.winner(), "a");
        let g: Vec<f64> = r.ranked.iter().map(|x| x.1).collect();
        for (x, y) in g.iter().zip([1.8, 0.6, 0.6]) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(r.ranked[1].0, "b");

        let bad = ScoreTable { languages: vec!["x".into(), "y".into()], scores: vec![vec![0.0, 0.7], vec![0.7, 0.0]] };
        assert!(matches!(aggregate_multiway(&bad), Err(FusionError::Input(_))));
    }

    #[test]
    fn reductions() {
        let r = relative_reduction(Some(0.055), Some(0.043)).unwrap();
        assert!((100.0 * r - 21.8).abs() < 0.05);
        let r = relative_reduction(Some(0.042), Some(0.020)).unwrap();
        assert!((100.0 * r - 52.4).abs() < 0.05);
        assert_eq!(relative_reduction(Some(0.0), Some(0.1)), None);
    }

    #[test]
    fn comparison_requires_shared_test_set() {
        let base = Backend::Baseline;
        let test: Vec<_> = (0..10).map(|i| sample(0.2 + 0.05 * i as f64, 0.5, 1, true, ("en", "es"))).collect();
        let rep = evaluate(&Router::new(&base), &test, DEFAULT_TOP_K).unwrap();
        let cmp = compare_backends(&[rep.clone(), rep.clone()]).unwrap();
        assert!(cmp.rows.iter().all(|r| r.relative_reduction["all"] == Some(0.0)));
        assert!(cmp.to_text().contains("baseline"));
        let mut other = rep.clone();
        other.test_set_hash = "x".into();
        assert!(compare_backends(&[rep, other]).is_err());
    }
}
