use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod manifest;

use commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "langid-fusion", version, about = "Pairwise spoken-language decision from LangID and recognizer signals")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic labeled pair corpus.
    GenData(GenDataArgs),
    /// Train a backend on a corpus.
    Train(TrainArgs),
    /// Evaluate a trained backend per missingness slice.
    Eval(EvalArgs),
    /// Score one pair of signal vectors.
    Predict(PredictArgs),
    /// Finite-difference check of the network gradient.
    Gradcheck(GradcheckArgs),
    /// Compare evaluation reports against the baseline.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    /// Output prefix: writes PREFIX.jsonl, PREFIX.norm.json and PREFIX.manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Generator config (JSON); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Test,
    All,
}

/// Which utterances of the corpus a command reads.
#[derive(Args, Debug, Clone)]
pub struct SplitArgs {
    /// Seed of the utterance-level train/test split.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Fraction of utterances in the training part.
    #[arg(long, default_value_t = 0.8)]
    pub ratio: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendArg {
    Baseline,
    Lattice,
    Dnn,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub backend: BackendArg,
    #[arg(long)]
    pub data: PathBuf,
    /// Normalization bounds; defaults to the corpus's sibling `.norm.json`.
    #[arg(long)]
    pub norm: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Training config (JSON with `lattice` and `dnn` sections).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the backend's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitPart,
    #[command(flatten)]
    pub split_args: SplitArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeitherPolicyArg {
    LangidCompare,
    Model,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitPart,
    #[command(flatten)]
    pub split_args: SplitArgs,
    #[arg(long, value_enum, default_value = "langid-compare")]
    pub neither_policy: NeitherPolicyArg,
    #[arg(long, default_value_t = 15)]
    pub top_k: usize,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Side a signals as JSON; recognizer fields may be null or absent.
    #[arg(long)]
    pub a: String,
    /// Side b signals as JSON.
    #[arg(long)]
    pub b: String,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Network config (JSON); defaults to tanh without dropout.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Evaluation reports; the baseline report is the reference.
    #[arg(long, num_args = 1.., required = true)]
    pub reports: Vec<PathBuf>,
    /// Machine-readable comparison output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::GenData(a) => commands::gen_data(a, &argv),
        Command::Train(a) => commands::train(a, &argv),
        Command::Eval(a) => commands::eval(a, &argv),
        Command::Predict(a) => commands::predict(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Compare(a) => commands::compare(a, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
