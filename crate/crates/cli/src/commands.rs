use std::path::{Path, PathBuf};

use langid_fusion::backend::Backend;
use langid_fusion::dnn::{gradcheck as run_gradcheck, DnnConfig};
use langid_fusion::eval::{compare_backends, evaluate, side_for, EvalReport, NeitherPolicy, Router, Side};
use langid_fusion::pipeline::{train_backend, BackendKind, TrainConfig};
use langid_fusion::signal::{NormConfig, PairSample, SignalVector};
use langid_fusion::synthgen::{generate, samples_from_jsonl, split_by_utterance, GeneratorConfig};
use langid_fusion::FusionError;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::manifest::{manifest_path, Manifest};
use crate::{
    BackendArg, CompareArgs, EvalArgs, GenDataArgs, GradcheckArgs, NeitherPolicyArg, PredictArgs, SplitArgs, SplitPart,
    TrainArgs,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, missing inputs or malformed user-supplied JSON: exit 2.
    Usage(String),
    /// Everything else: exit 1.
    Runtime(String),
}

impl From<FusionError> for CliError {
    fn from(e: FusionError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    if !path.exists() {
        return Err(CliError::Usage(format!("{} does not exist", path.display())));
    }
    std::fs::read(path).map_err(|e| CliError::Runtime(format!("reading {}: {e}", path.display())))
}

fn write_output(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

fn write_manifest(manifest: &Manifest, output: &Path) -> CliResult<()> {
    manifest
        .write(&manifest_path(output))
        .map_err(|e| CliError::Runtime(format!("writing manifest: {e}")))
}

/// Parses a user-supplied JSON config; a malformed file is an argument error.
fn read_config<T: DeserializeOwned + Default>(path: Option<&PathBuf>, manifest: Option<&mut Manifest>) -> CliResult<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let bytes = read_input(path)?;
    if let Some(m) = manifest {
        m.input(path, &bytes);
    }
    serde_json::from_slice(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    text.into_bytes()
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn gen_data(args: &GenDataArgs, argv: &[String]) -> CliResult<()> {
    let mut manifest = Manifest::new("gen-data", argv, &());
    let mut config: GeneratorConfig = read_config(args.config.as_ref(), Some(&mut manifest))?;
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    if let Some(n) = args.samples {
        config.sample_count = n;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let corpus = generate(&config)?;

    let data_path = with_suffix(&args.out, ".jsonl");
    let norm_path = with_suffix(&args.out, ".norm.json");
    let data = corpus.to_jsonl();
    let norm = to_json(&corpus.norm_config);
    write_output(&data_path, data.as_bytes())?;
    write_output(&norm_path, &norm)?;

    let mut m = Manifest::new("gen-data", argv, &config);
    m.inputs = manifest.inputs;
    m.output(&data_path, data.as_bytes());
    m.output(&norm_path, &norm);
    write_manifest(&m, &with_suffix(&args.out, ".json"))?;
    println!("wrote {} samples from {} utterances to {}", corpus.samples.len(), corpus.metadata.utterance_count, data_path.display());
    Ok(())
}

/// Default normalization file of a corpus: `corpus.jsonl` -> `corpus.norm.json`.
fn sibling_norm(data: &Path) -> PathBuf {
    data.with_extension("norm.json")
}

fn load_samples(path: &Path, part: SplitPart, split: &SplitArgs, manifest: &mut Manifest) -> CliResult<Vec<PairSample>> {
    let bytes = read_input(path)?;
    manifest.input(path, &bytes);
    let text = String::from_utf8(bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let samples = samples_from_jsonl(&text)?;
    if part == SplitPart::All {
        return Ok(samples);
    }
    let (train, test) =
        split_by_utterance(&samples, split.ratio, split.split_seed).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(if part == SplitPart::Train { train } else { test })
}

#[derive(Serialize)]
struct TrainRun<'a> {
    backend: &'a str,
    split: String,
    split_seed: u64,
    ratio: f64,
    train: &'a TrainConfig,
}

pub fn train(args: &TrainArgs, argv: &[String]) -> CliResult<()> {
    let mut manifest = Manifest::new("train", argv, &());
    let mut config: TrainConfig = read_config(args.config.as_ref(), Some(&mut manifest))?;
    if let Some(seed) = args.seed {
        config.lattice.seed = seed;
        config.dnn.seed = seed;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let kind = match args.backend {
        BackendArg::Baseline => BackendKind::Baseline,
        BackendArg::Lattice => BackendKind::Lattice,
        BackendArg::Dnn => BackendKind::Dnn,
    };
    let norm_path = args.norm.clone().unwrap_or_else(|| sibling_norm(&args.data));
    let norm_bytes = read_input(&norm_path)?;
    manifest.input(&norm_path, &norm_bytes);
    let norm: NormConfig =
        serde_json::from_slice(&norm_bytes).map_err(|e| CliError::Usage(format!("{}: {e}", norm_path.display())))?;
    norm.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let samples = load_samples(&args.data, args.split, &args.split_args, &mut manifest)?;

    let backend = train_backend(kind, &samples, &norm, &config)?;
    let model = backend.to_json().into_bytes();
    write_output(&args.out, &model)?;

    let run = TrainRun {
        backend: kind.as_str(),
        split: format!("{:?}", args.split).to_lowercase(),
        split_seed: args.split_args.split_seed,
        ratio: args.split_args.ratio,
        train: &config,
    };
    let mut m = Manifest::new("train", argv, &run);
    m.inputs = manifest.inputs;
    m.output(&args.out, &model);
    write_manifest(&m, &args.out)?;
    println!("trained {} on {} samples; model written to {}", kind.as_str(), samples.len(), args.out.display());
    Ok(())
}

fn load_backend(path: &Path, manifest: Option<&mut Manifest>) -> CliResult<Backend> {
    let bytes = read_input(path)?;
    if let Some(m) = manifest {
        m.input(path, &bytes);
    }
    let text = String::from_utf8(bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Backend::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct EvalRun {
    split: String,
    split_seed: u64,
    ratio: f64,
    neither_policy: NeitherPolicy,
    top_k: usize,
}

pub fn eval(args: &EvalArgs, argv: &[String]) -> CliResult<()> {
    let policy = match args.neither_policy {
        NeitherPolicyArg::LangidCompare => NeitherPolicy::LangidCompare,
        NeitherPolicyArg::Model => NeitherPolicy::Model,
    };
    let run = EvalRun {
        split: format!("{:?}", args.split).to_lowercase(),
        split_seed: args.split_args.split_seed,
        ratio: args.split_args.ratio,
        neither_policy: policy,
        top_k: args.top_k,
    };
    let mut m = Manifest::new("eval", argv, &run);
    let backend = load_backend(&args.model, Some(&mut m))?;
    let samples = load_samples(&args.data, args.split, &args.split_args, &mut m)?;
    let report = evaluate(&Router { backend: &backend, neither_policy: policy }, &samples, args.top_k)?;
    let bytes = to_json(&report);
    write_output(&args.report, &bytes)?;
    m.output(&args.report, &bytes);
    write_manifest(&m, &args.report)?;
    for slice in ["both", "either", "neither", "all"] {
        let cell = report.error_rate(slice).map_or("-".to_string(), |e| format!("{:.2}%", 100.0 * e));
        println!("{slice:<8} {cell:>8}  n={}", report.slices[slice].count);
    }
    Ok(())
}

fn parse_side(name: &str, json: &str) -> CliResult<SignalVector> {
    serde_json::from_str(json).map_err(|e| CliError::Usage(format!("--{name}: {e}")))
}

pub fn predict(args: &PredictArgs) -> CliResult<()> {
    let backend = load_backend(&args.model, None)?;
    let pair = PairSample {
        utterance_id: "predict".into(),
        lang_a: "a".into(),
        lang_b: "b".into(),
        label: 1,
        weight: 1.0,
        a: parse_side("a", &args.a)?,
        b: parse_side("b", &args.b)?,
    };
    let p = backend.predict(&pair)?;
    let decision = match side_for(p) {
        Side::A => "a",
        Side::B => "b",
    };
    println!("{p:.6} {decision}");
    Ok(())
}

pub fn gradcheck(args: &GradcheckArgs) -> CliResult<()> {
    let config: DnnConfig = match &args.config {
        Some(_) => read_config(args.config.as_ref(), None)?,
        None => DnnConfig::gradcheck_default(),
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let report = run_gradcheck(&config, args.draws, args.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    print!("{}", String::from_utf8(to_json(&report)).expect("utf-8"));
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "max relative error {:.3e} exceeds {:.0e}",
            report.max_relative_error, report.tolerance
        )))
    }
}

pub fn compare(args: &CompareArgs, argv: &[String]) -> CliResult<()> {
    let mut m = Manifest::new("compare", argv, &());
    let mut reports = Vec::new();
    for path in &args.reports {
        let bytes = read_input(path)?;
        m.input(path, &bytes);
        let r: EvalReport =
            serde_json::from_slice(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        reports.push(r);
    }
    let cmp = compare_backends(&reports).map_err(|e| CliError::Usage(e.to_string()))?;
    print!("{}", cmp.to_text());
    if let Some(out) = &args.out {
        let bytes = to_json(&cmp);
        write_output(out, &bytes)?;
        m.output(out, &bytes);
        write_manifest(&m, out)?;
    }
    Ok(())
}
