//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 for usage errors and
//! malformed study files.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{self, CsvSchema};
use crate::error::Error;
use crate::intrinsic_dim::{self, IntrinsicDimOptions};
use crate::metrics::Goal;
use crate::optimizers::{self, Budget, OptimizerKind};
use crate::option_space::{OptionSpace, OptionTree};
use crate::rigs::{self, PipelineObjective, StudyResult, StudySpec};
use crate::seed;

#[derive(Debug, Parser)]
#[command(name = "dodge", version, about = "Epsilon-dodging hyperparameter optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tune one dataset and write every trial as JSON lines.
    Optimize(OptimizeArgs),
    /// Estimate the intrinsic dimension of a dataset's features.
    Intrinsic(IntrinsicArgs),
    /// Run a study described by a TOML file.
    Study(StudyArgs),
    /// Recompute verdicts and win/tie/loss counts from a results CSV.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with one row per module.
    #[arg(long)]
    pub data: PathBuf,
    /// Label column.
    #[arg(long)]
    pub target: String,
    /// Effort (lines of code) column, needed for popt20.
    #[arg(long)]
    pub effort: Option<String>,
    /// Release column.
    #[arg(long)]
    pub version: Option<String>,
    /// Label value that marks the positive class.
    #[arg(long, default_value = "1")]
    pub positive_label: String,
}

impl DataArgs {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            target: self.target.clone(),
            effort: self.effort.clone(),
            version: self.version.clone(),
            positive_label: self.positive_label.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "dodge", value_parser = parse_optimizer)]
    pub optimizer: OptimizerKind,
    /// Total evaluations; DODGE spends the first half on random branches.
    #[arg(long, default_value_t = 30)]
    pub budget: usize,
    #[arg(long, default_value_t = optimizers::DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value = "d2h", value_parser = parse_goal)]
    pub goal: Goal,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Option space TOML; the standard space when absent.
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// JSON-lines report of all trials.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IntrinsicArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Columns to leave out of the distance computation, e.g. the label.
    #[arg(long = "skip", value_delimiter = ',')]
    pub skip: Vec<String>,
    /// Label column; left out like `--skip`.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[arg(long, default_value_t = 1000)]
    pub cap: usize,
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    #[arg(long, default_value_t = 10)]
    pub min_pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tab-separated `ln_r`, `ln_c` table for plotting.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Directory for `results.csv` and `summary.tsv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// `results.csv` written by `study`.
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the summary here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_goal(s: &str) -> Result<Goal, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Why a command failed, which decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|source| {
        Failure::from(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Output goes to `out`; diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Optimize(a) => optimize(&a, out),
        Command::Intrinsic(a) => intrinsic(&a, out),
        Command::Study(a) => study(&a, out),
        Command::Compare(a) => compare(&a, out),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message().replace('\n', " "));
            f.exit_code()
        }
    }
}

fn optimize(a: &OptimizeArgs, out: &mut dyn Write) -> Result<(), Failure> {
    if a.budget == 0 {
        return Err(Failure::Usage("--budget must be at least 1".into()));
    }
    if a.goal == Goal::Popt20 && a.data.effort.is_none() {
        return Err(Failure::Usage("--goal popt20 needs --effort".into()));
    }
    let space = match &a.space {
        Some(p) => OptionSpace::load(p).map_err(usage)?,
        None => OptionSpace::standard(),
    };
    let tree = OptionTree::new(&space).map_err(usage)?;
    let data = dataset::load_csv(&a.data.data, &a.data.schema())?;
    let (tune, valid) = rigs::tune_split(&data, seed::derive(a.seed, &[1]))?;
    let objective = PipelineObjective::new(&tune, &valid, vec![a.goal], seed::derive(a.seed, &[2]));
    let n1 = a.budget / 2;
    let budget = Budget {
        n1,
        n2: a.budget - n1,
    };
    let report = optimizers::run(a.optimizer, &tree, &objective, budget, a.epsilon, seed::derive(a.seed, &[3]))?;
    let mut lines = Vec::new();
    report.write_jsonl(&mut lines)?;
    write_file(&a.out, &lines)?;
    let best = report.best_trial();
    let _ = writeln!(out, "best: {}", best.config.describe());
    let _ = writeln!(
        out,
        "{} (validation): {:.4} after {} evaluations",
        a.goal, best.goals.primary().score, report.evaluations_used
    );
    Ok(())
}

fn intrinsic(a: &IntrinsicArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut skip: Vec<&str> = a.skip.iter().map(String::as_str).collect();
    skip.extend(a.target.as_deref());
    let (x, names) = dataset::load_features_csv(&a.data, &skip)?;
    if let Some(missing) = skip.iter().find(|s| names.iter().any(|n| n == *s)) {
        return Err(Failure::Usage(format!("could not skip column {missing:?}")));
    }
    let options = IntrinsicDimOptions {
        steps: a.steps,
        subsample_cap: a.cap,
        smoothing_window: a.window,
        min_pairs: a.min_pairs,
        seed: a.seed,
    };
    let report = intrinsic_dim::intrinsic_dimension(&x, &options)?;
    if let Some(path) = &a.out {
        let json = serde_json::to_vec_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
        write_file(path, &json)?;
    }
    if let Some(path) = &a.table {
        let mut t = String::from("ln_r\tln_c\n");
        for (lr, lc) in report.log_table() {
            t.push_str(&format!("{lr}\t{lc}\n"));
        }
        write_file(path, t.as_bytes())?;
    }
    let _ = writeln!(out, "intrinsic dimension: {:.2} ({} rows)", report.dimension, report.n_used);
    if let Some(w) = &report.warning {
        let _ = writeln!(out, "warning: {w}");
    }
    let _ = writeln!(out, "{}", intrinsic_dim::recommendation(report.dimension));
    Ok(())
}

fn study(a: &StudyArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let spec = StudySpec::load(&a.spec).map_err(usage)?;
    spec.check_files().map_err(usage)?;
    let result = rigs::run_study(&spec)?;
    result.write_dir(&a.out)?;
    let _ = write!(out, "{}", result.summary_table());
    Ok(())
}

fn compare(a: &CompareArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let records = rigs::read_records_csv(&a.results)?;
    let result = StudyResult::from_saved_records(records, a.seed)?;
    let table = result.summary_table();
    match &a.out {
        Some(p) => write_file(p, table.as_bytes())?,
        None => {
            let _ = write!(out, "{table}");
        }
    }
    Ok(())
}
