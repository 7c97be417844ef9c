use langid_fusion::backend::Backend;
use langid_fusion::eval::{evaluate, Router};
use langid_fusion::signal::MissingnessClass;
use langid_fusion::synthgen::{generate, split_by_utterance, GeneratorConfig};

#[test]
fn langid_only_accuracy_on_neither_is_in_the_planted_band() {
    let corpus = generate(&GeneratorConfig::default()).unwrap();
    let neither: Vec<_> = corpus.samples.iter().filter(|s| s.missingness() == MissingnessClass::Neither).collect();
    let correct = neither
        .iter()
        .filter(|s| (s.a.langid_score > s.b.langid_score) == (s.label == 1))
        .count();
    let accuracy = correct as f64 / neither.len() as f64;
    assert!((0.90..=0.97).contains(&accuracy), "accuracy {accuracy}");

    // The routed baseline on the test split makes exactly the comparator's mistakes.
    let (_, test) = split_by_utterance(&corpus.samples, 0.8, 0).unwrap();
    let test_neither: Vec<_> = test.iter().filter(|s| s.missingness() == MissingnessClass::Neither).collect();
    let wrong = test_neither
        .iter()
        .filter(|s| (s.a.langid_score > s.b.langid_score) != (s.label == 1))
        .count();
    let report = evaluate(&Router::new(&Backend::Baseline), &test, 15).unwrap();
    assert_eq!(report.slices["neither"].errors, wrong);
    assert_eq!(report.slices["neither"].count, test_neither.len());
}
