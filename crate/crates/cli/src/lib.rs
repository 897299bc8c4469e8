//! `counterfax` command line: generation, solving, model evaluation,
//! scoring, statistics, transcript export and the participant server.

mod commands;
pub mod serve;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use counterfax_core::alphabet::{Alphabets, PermutedAlphabet};
use counterfax_core::problem::ExportMode;
use counterfax_core::stats::CiMethod;
use counterfax_core::IntervalSize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "counterfax", version, about = "Counterfactual letter-string analogy toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a problem set.
    Gen(GenArgs),
    /// Re-derive and verify answer keys.
    Solve(SolveArgs),
    /// Put a problem set to a model endpoint or a mock.
    Eval(EvalArgs),
    /// Parse and classify responses.
    Score(ScoreArgs),
    /// Accuracy summaries and logistic regressions.
    Stats(StatsArgs),
    /// Write transcripts and a review template for manual inspection.
    Export(ExportArgs),
    /// Serve the participant experiment API.
    Serve(ServeArgs),
}

/// A built-in alphabet id (`hw`, `alt`, `std`), `ID=LETTERS` or 26 letters.
#[derive(Debug, Clone)]
pub struct AlphabetArg(pub PermutedAlphabet);

impl std::str::FromStr for AlphabetArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parsed = match s.split_once('=') {
            Some((id, letters)) if !id.trim().is_empty() => PermutedAlphabet::parse_line(id.trim(), letters),
            _ => s.parse(),
        };
        parsed.map(AlphabetArg).map_err(|e| e.to_string())
    }
}

fn registry(extra: &[AlphabetArg]) -> Alphabets {
    let mut a = Alphabets::default();
    for x in extra {
        a.insert(x.0.clone());
    }
    a
}

fn parse_interval(s: &str) -> Result<IntervalSize, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value = "hw")]
    pub alphabet: AlphabetArg,
    /// Problems per (interval, transformation) cell.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub per_cell: u32,
    #[arg(long, value_delimiter = ',', default_value = "1,2", value_parser = parse_interval)]
    pub intervals: Vec<IntervalSize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `full` keeps answers and metadata; `public` strips them.
    #[arg(long, default_value = "full")]
    pub export: ExportMode,
    #[arg(long, default_value = "problems.jsonl")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub problems: PathBuf,
    /// Extra alphabets for problems over custom orderings.
    #[arg(long)]
    pub alphabet: Vec<AlphabetArg>,
    #[arg(long, default_value = "answers.jsonl")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalMode {
    Plain,
    Tool,
    Mock(counterfax_core::harness::MockPolicy),
}

impl std::str::FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(EvalMode::Plain),
            "tool" => Ok(EvalMode::Tool),
            _ => match s.strip_prefix("mock:") {
                Some(policy) => policy.parse().map(EvalMode::Mock),
                None => Err(format!("unknown mode {s:?} (plain|tool|mock:POLICY)")),
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub problems: PathBuf,
    /// `plain`, `tool`, or `mock:ORACLE|NOISY:p|ALT:kind|REFUSE:n`.
    #[arg(long)]
    pub mode: EvalMode,
    #[arg(long, default_value = "gpt-4-0125-preview")]
    pub engine: String,
    #[arg(long, default_value = "https://api.openai.com/v1")]
    pub base_url: String,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "OPENAI_API_KEY")]
    pub auth_env: String,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    pub parallel: u32,
    #[arg(long, default_value_t = counterfax_core::harness::DEFAULT_MAX_RETRIES)]
    pub max_retries: u32,
    /// Requests per minute; 0 disables the limit.
    #[arg(long, default_value_t = counterfax_core::harness::DEFAULT_REQUESTS_PER_MINUTE)]
    pub rpm: u32,
    /// Seed for mock replies.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Agent id recorded on responses (defaults to the engine, or `mock`).
    #[arg(long)]
    pub agent_id: Option<String>,
    #[arg(long)]
    pub alphabet: Vec<AlphabetArg>,
    #[arg(long, default_value = "responses.jsonl")]
    pub out: PathBuf,
    /// Run metadata (endpoint, timestamps) as JSON.
    #[arg(long)]
    pub run_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub problems: PathBuf,
    #[arg(long)]
    pub responses: PathBuf,
    /// Count unparseable replies as errors in the tables.
    #[arg(long)]
    pub unparseable_as_error: bool,
    /// Manual-review overrides, merged by problem id (and agent id if given).
    #[arg(long)]
    pub review: Option<PathBuf>,
    #[arg(long)]
    pub alphabet: Vec<AlphabetArg>,
    #[arg(long, default_value = "verdicts.jsonl")]
    pub out: PathBuf,
    /// Valid-alternative tables as text.
    #[arg(long)]
    pub tables: Option<PathBuf>,
    /// Valid-alternative tables as CSV.
    #[arg(long)]
    pub tables_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub verdicts: PathBuf,
    #[arg(long)]
    pub problems: PathBuf,
    /// Models to include (repeatable); all models when omitted.
    #[arg(long)]
    pub model: Vec<String>,
    #[arg(long, default_value = "summary.csv")]
    pub out: PathBuf,
    /// Break summaries down by transformation type.
    #[arg(long)]
    pub by_transformation: bool,
    #[arg(long)]
    pub regressions: Option<PathBuf>,
    #[arg(long, default_value = "clopper-pearson")]
    pub ci_method: CiMethod,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Likelihood-ratio instead of Wald p-values.
    #[arg(long)]
    pub lr_test: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub problems: PathBuf,
    #[arg(long)]
    pub responses: PathBuf,
    /// Markdown transcripts, one section per response.
    #[arg(long, default_value = "transcripts.md")]
    pub out: PathBuf,
    /// JSONL review template to fill in and pass to `score --review`.
    #[arg(long)]
    pub review_template: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub problems: PathBuf,
    /// Interval condition for this deployment.
    #[arg(long, value_parser = parse_interval)]
    pub interval: IntervalSize,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "responses.jsonl")]
    pub out: PathBuf,
    /// Directory of per-session event logs.
    #[arg(long, default_value = "sessions")]
    pub store: PathBuf,
    /// Seed for problem sampling and ordering; random when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Static frontend bundle to serve at `/`.
    #[arg(long)]
    pub assets: Option<PathBuf>,
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return EXIT_PARTIAL;
        }
    };
    match runtime.block_on(commands::dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_PARTIAL
        }
    }
}
