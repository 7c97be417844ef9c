use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use langid_fusion::backend::Backend;
use langid_fusion::dnn::{Combine, DnnConfig, DnnEnsemble, DnnModel, HeadKind};
use langid_fusion::eval::{aggregate_multiway, evaluate, NeitherPolicy, Router, ScoreTable};
use langid_fusion::lattice::{init_model, LatticeConfig};
use langid_fusion::signal::{
    build_feature_vector, FeatureVector12, MissingnessClass, NormConfig, PairSample, RecognizerSignals, SignalVector,
};
use langid_fusion::synthgen::{generate, samples_from_jsonl, split_by_utterance, Corpus, GeneratorConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| generate(&GeneratorConfig { sample_count: 3_000, rng_seed: 77, ..Default::default() }).unwrap())
}

fn norm() -> &'static NormConfig {
    &corpus().norm_config
}

fn arb_side() -> impl Strategy<Value = SignalVector> {
    (
        0.0..=1.0f64,
        prop::option::of((0.0..1e5f64, 0.0..1e3f64, 0.0..=1.0f64, 0.0..20.0f64, 0.0..=1.0f64)),
    )
        .prop_map(|(langid_score, r)| SignalVector {
            langid_score,
            recognizer: r.map(|(am_cost, lm_cost, confidence_score, entropy_score, text_langid_score)| {
                RecognizerSignals { am_cost, lm_cost, confidence_score, entropy_score, text_langid_score }
            }),
        })
}

fn arb_pair() -> impl Strategy<Value = PairSample> {
    (arb_side(), arb_side(), 0u8..=1).prop_map(|(a, b, label)| PairSample {
        utterance_id: "u".into(),
        lang_a: "en".into(),
        lang_b: "fr".into(),
        label,
        weight: 1.0,
        a,
        b,
    })
}

fn arb_fv() -> impl Strategy<Value = FeatureVector12> {
    prop::array::uniform12(-1.0..=1.0f64).prop_map(FeatureVector12)
}

fn random_dnn(head_kind: HeadKind, seed: u64) -> DnnModel {
    let config = DnnConfig { head_kind, head_init_std: 1.0, ..Default::default() };
    DnnModel::init(&config, seed, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn test_split() -> Vec<PairSample> {
    split_by_utterance(&corpus().samples, 0.7, 3).unwrap().1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feature_vectors_stay_in_range_and_flip_under_swap(pair in arb_pair()) {
        let fv = build_feature_vector(&pair, norm()).unwrap();
        prop_assert!(fv.0.iter().all(|x| (-1.0..=1.0).contains(x)));
        prop_assert_eq!(build_feature_vector(&pair.swapped(), norm()).unwrap(), fv.flip());
    }

    #[test]
    fn dnn_heads_are_antisymmetric(seed in 0u64..1_000, fv in arb_fv()) {
        for head in [HeadKind::SkewBilinear, HeadKind::ScoreDifference] {
            let m = random_dnn(head, seed);
            let s = m.predict_fv(&fv) + m.predict_fv(&fv.flip());
            prop_assert!((s - 1.0).abs() < 1e-9, "{:?}: {}", head, s);
        }
    }

    #[test]
    fn eval_mode_prediction_is_pure(seed in 0u64..1_000, fv in arb_fv()) {
        let m = random_dnn(HeadKind::SkewBilinear, seed);
        let before = serde_json::to_string(&m).unwrap();
        let p = m.predict_fv(&fv);
        prop_assert_eq!(p.to_bits(), m.predict_fv(&fv).to_bits());
        prop_assert_eq!(before, serde_json::to_string(&m).unwrap());
    }

    #[test]
    fn symmetrized_lattice_is_antisymmetric(seed in 0u64..1_000, fv in arb_fv()) {
        let config = LatticeConfig { seed, init_noise: 0.5, ..Default::default() };
        let m = init_model(norm(), &config).unwrap();
        let s = m.predict_symmetrized_fv(&fv) + m.predict_symmetrized_fv(&fv.flip());
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multiway_scores_sum_to_pair_count(n in 2usize..=6, raw in prop::collection::vec(0.0..=1.0f64, 15)) {
        let languages: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let mut k = 0;
        let mut upper = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                upper[i][j] = raw[k];
                k += 1;
            }
        }
        let index = |s: &str| s[1..].parse::<usize>().unwrap();
        let table = ScoreTable::from_fn(languages, |a, b| {
            let (i, j) = (index(a), index(b));
            Ok(if i < j { upper[i][j] } else { 1.0 - upper[j][i] })
        })
        .unwrap();
        let ranking = aggregate_multiway(&table).unwrap();
        let total: f64 = ranking.ranked.iter().map(|(_, g)| g).sum();
        prop_assert!((total - (n * (n - 1)) as f64 / 2.0).abs() < 1e-9);
        prop_assert!(ranking.ranked.windows(2).all(|w| w[0].1 >= w[1].1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn generated_corpora_keep_their_invariants(seed in any::<u64>(), n in 1usize..400, pairs in 1usize..=3) {
        let config = GeneratorConfig { sample_count: n, rng_seed: seed, max_pairs_per_utterance: pairs, ..Default::default() };
        let c = generate(&config).unwrap();
        prop_assert_eq!(c.samples.len(), n);
        prop_assert_eq!(c.to_jsonl(), generate(&config).unwrap().to_jsonl());
        // Reparsing checks every value against its declared domain.
        prop_assert_eq!(&samples_from_jsonl(&c.to_jsonl()).unwrap(), &c.samples);

        let mut truth: BTreeMap<&str, &str> = BTreeMap::new();
        for s in &c.samples {
            prop_assert_ne!(&s.lang_a, &s.lang_b);
            let t = s.true_language();
            prop_assert_eq!(*truth.entry(&s.utterance_id).or_insert(t), t);
            let available = [s.a.recognizer_available(), s.b.recognizer_available()];
            let expected = match available.iter().filter(|&&x| x).count() {
                2 => MissingnessClass::Both,
                1 => MissingnessClass::Either,
                _ => MissingnessClass::Neither,
            };
            prop_assert_eq!(s.missingness(), expected);
        }
    }

    #[test]
    fn splits_partition_utterances(ratio in 0.05..0.95f64, seed in any::<u64>()) {
        let (train, test) = split_by_utterance(&corpus().samples, ratio, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), corpus().samples.len());
        let ids = |s: &[PairSample]| s.iter().map(|p| p.utterance_id.clone()).collect::<BTreeSet<_>>();
        prop_assert!(ids(&train).is_disjoint(&ids(&test)));
    }

    #[test]
    fn evaluation_ignores_test_set_order(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let test = test_split();
        let mut shuffled = test.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let config = LatticeConfig { seed, init_noise: 0.3, ..Default::default() };
        let backend = Backend::Lattice { model: init_model(norm(), &config).unwrap() };
        let router = Router::new(&backend);
        prop_assert_eq!(evaluate(&router, &test, 15).unwrap(), evaluate(&router, &shuffled, 15).unwrap());
    }

    #[test]
    fn mirrored_test_set_gives_the_same_error(seed in 0u64..1_000) {
        let test = test_split();
        let mirrored: Vec<PairSample> = test.iter().map(PairSample::swapped).collect();
        let model = DnnEnsemble::new(vec![random_dnn(HeadKind::SkewBilinear, seed)], Combine::MeanProbability, norm().clone()).unwrap();
        let backend = Backend::Dnn { model };
        for policy in [NeitherPolicy::LangidCompare, NeitherPolicy::Model] {
            let router = Router { backend: &backend, neither_policy: policy };
            let x = evaluate(&router, &test, 15).unwrap();
            let y = evaluate(&router, &mirrored, 15).unwrap();
            for slice in ["both", "either", "neither", "all"] {
                prop_assert_eq!(x.slices[slice].errors, y.slices[slice].errors);
            }
        }
    }

    #[test]
    fn neither_slice_routing_ignores_the_model(seed in 0u64..1_000) {
        let test = test_split();
        let dnn = Backend::Dnn {
            model: DnnEnsemble::new(vec![random_dnn(HeadKind::ScoreDifference, seed)], Combine::MeanProbability, norm().clone()).unwrap(),
        };
        let lattice = Backend::Lattice {
            model: init_model(norm(), &LatticeConfig { seed, init_noise: 0.5, ..Default::default() }).unwrap(),
        };
        let errors: Vec<usize> = [Backend::Baseline, dnn, lattice]
            .iter()
            .map(|b| evaluate(&Router::new(b), &test, 15).unwrap().slices["neither"].errors)
            .collect();
        prop_assert!(errors.windows(2).all(|w| w[0] == w[1]), "{:?}", errors);
    }
}
