use std::path::PathBuf;
use std::process::ExitCode;

use anlgmap_core::analogy::SolverKind;
use anlgmap_core::indicators::GroupBy;
use anlgmap_core::transport::{CostKind, DEFAULT_CAP};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
mod inputs;
mod report;

use inputs::{DictSpec, LangPath, SweepSpec};

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "anlgmap",
    version,
    about = "Map linearity and analogy preservation for word embeddings"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Global {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub jobs: Option<usize>,
    /// Seed for every randomised step (LRCos negatives, synthetic spaces).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Warn)]
    pub log_level: LogLevel,
    /// Format of table outputs (`--out`); reports are always JSON.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl From<LogLevel> for log::LevelFilter {
    fn from(level: LogLevel) -> Self {
        match level {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
            LogLevel::Trace => log::LevelFilter::Trace,
        }
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Fit the best linear map between two embeddings and report S_LMP.
    FitMap(FitMapArgs),
    /// Score analogy solvers on every category and language.
    AnalogyEval(AnalogyEvalArgs),
    /// Build the S_LMP / S_PAE grid over all language pairs and categories.
    Indicators(IndicatorsArgs),
    /// Grouped correlation and ANOVA over an indicator grid.
    Correlate(CorrelateArgs),
    /// Intersect monolingual analogy sets into a multilingual corpus.
    BuildXanlg(BuildXanlgArgs),
    /// Check that a category's own pairing is the cheapest transport pairing.
    VerifyPae(VerifyPaeArgs),
    /// Generate and score synthetic mapped spaces.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct FitMapArgs {
    /// Source embedding, `lang=path`.
    #[arg(long)]
    pub emb_x: LangPath,
    /// Target embedding, `lang=path`.
    #[arg(long)]
    pub emb_y: LangPath,
    /// MUSE dictionary from the source to the target language.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Analogy corpus directory; with `--category`, supplies or filters the dictionary.
    #[arg(long, requires = "category")]
    pub analogy: Option<PathBuf>,
    #[arg(long, requires = "analogy")]
    pub category: Option<String>,
    /// Keep only the first N vectors of each embedding file.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Use the pseudo-inverse solution instead of gradient descent.
    #[arg(long)]
    pub closed_form: bool,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalogyEvalArgs {
    /// `lang=path`, repeatable.
    #[arg(long, required = true)]
    pub emb: Vec<LangPath>,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub analogy: PathBuf,
    #[arg(long, default_value = "lrcos")]
    pub solver: SolverKind,
    /// Only these categories (repeatable); all by default.
    #[arg(long)]
    pub category: Vec<String>,
    /// Keep the gold pair among LRCos positives.
    #[arg(long)]
    pub include_gold: bool,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct IndicatorsArgs {
    /// `lang=path`, repeatable; at least two.
    #[arg(long, required = true, num_args = 1)]
    pub emb: Vec<LangPath>,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub analogy: PathBuf,
    /// Label stored in every record, e.g. the embedding family.
    #[arg(long, default_value = "default")]
    pub series: String,
    /// MUSE dictionaries `l1-l2=path`; by default each category's own pairs are used.
    #[arg(long)]
    pub dict: Vec<DictSpec>,
    #[arg(long, default_value = "lrcos")]
    pub solver: SolverKind,
    #[arg(long)]
    pub closed_form: bool,
    /// Grid output (CSV or JSON per `--format`).
    #[arg(long)]
    pub out: PathBuf,
    /// Grid plus grouped correlations as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CorrelateArgs {
    /// Indicator grid CSV.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, default_value = "series,category")]
    #[serde(serialize_with = "report::display")]
    pub group_by: GroupBy,
    /// Also compute permutation p-values with N shuffles.
    #[arg(long)]
    pub permute: Option<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildXanlgArgs {
    /// `lang=dir` of single-language category files, repeatable; the first is the pivot.
    #[arg(long, required = true)]
    pub set: Vec<LangPath>,
    /// MUSE dictionaries `l1-l2=path`, repeatable.
    #[arg(long)]
    pub dict: Vec<DictSpec>,
    #[arg(long, default_value_t = 30)]
    pub min_pairs: usize,
    /// Output corpus directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `build_report.json` inside `--out`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyPaeArgs {
    #[arg(long)]
    pub emb: LangPath,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub analogy: PathBuf,
    #[arg(long)]
    pub category: String,
    /// Repeatable; all three by default.
    #[arg(long)]
    pub cost: Vec<CostKind>,
    /// Largest vector count to enumerate.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: usize,
    /// Use at most this many pairs (default: as many as the cap allows).
    #[arg(long)]
    pub max_pairs: Option<usize>,
    /// Cheapest matchings listed per cost kind.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// JSON synthetic-space spec.
    #[arg(long)]
    pub spec: PathBuf,
    /// `family=start:end:step`, e.g. `lambda=0:1:0.05`.
    #[arg(long)]
    pub sweep: Option<SweepSpec>,
    #[arg(long, default_value_t = 3)]
    pub replicates: usize,
    /// Score table; defaults to `<spec>.csv` (or `<spec>.scores.json`) beside the spec.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the generated pair as vector files plus an analogy corpus.
    #[arg(long, conflicts_with = "sweep")]
    pub emit: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.global.log_level.into())
        .format_timestamp(None)
        .init();
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(report::exit_code(&e))
        }
    }
}
