//! Command-line driver: argument parsing, semiring selection, document
//! loading and the subcommands. [`dispatch`] is the whole program; `main`
//! only wires it to the process streams.

mod commands;
mod error;
mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use semibp::engine::{RunConfig, Schedule};

pub use error::{CliError, EXIT_CONTRADICTION, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_SIZE_CAP, EXIT_USAGE};
pub use output::BeliefsDocument;

#[derive(Debug, Parser)]
#[command(name = "semibp", version, about = "Semiring-generic belief propagation on factor graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run belief propagation and write a beliefs document.
    Run(InferArgs),
    /// Exact contraction value and marginals by enumeration.
    Exact(InferArgs),
    /// Junction tree inference on a possibly loopy graph.
    Jtree(InferArgs),
    /// Max-product MAP decoding.
    Map(InferArgs),
    /// Derivative of the contraction value with respect to one factor entry.
    Grad(GradArgs),
    /// Run the semiring axiom, spider fusion and reshaping suites.
    Check(CheckArgs),
    /// Convert between the native and UAI formats.
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Native,
    Uai,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SemiringArg {
    Prob,
    #[value(alias = "max-times", alias = "max-product")]
    Maxtimes,
    #[value(alias = "boolean")]
    Bool,
    #[value(alias = "nat")]
    Count,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScheduleArg {
    Sync,
    Tree,
}

#[derive(Debug, Clone, Args)]
struct InputArgs {
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Input format; inferred from the extension when absent.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Clone, Args)]
struct OutputArgs {
    /// Defaults to standard output.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct InferArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Defaults to the document's semiring hint, then prob.
    #[arg(long, value_enum)]
    semiring: Option<SemiringArg>,
    #[arg(long, value_enum, default_value = "sync")]
    schedule: ScheduleArg,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 0.0)]
    damping: f64,
    #[arg(long)]
    no_normalize: bool,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl InferArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            schedule: match self.schedule {
                ScheduleArg::Sync => Schedule::Synchronous,
                ScheduleArg::Tree => Schedule::TwoPassTree,
            },
            max_iters: self.max_iters,
            tol: self.tol,
            damping: self.damping,
            normalize: !self.no_normalize,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct GradArgs {
    #[command(flatten)]
    infer: InferArgs,
    /// Factor id holding the parameter.
    #[arg(long)]
    factor: usize,
    /// Flat row-major index of the entry within the factor table.
    #[arg(long)]
    entry: usize,
}

#[derive(Debug, Clone, Args)]
struct CheckArgs {
    /// Random triples per semiring for the axiom suite.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Reshaping route pairs.
    #[arg(long, default_value_t = 500)]
    routes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
struct ConvertArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Target format; defaults to the other one.
    #[arg(long, value_enum)]
    to: Option<FormatArg>,
    #[command(flatten)]
    output: OutputArgs,
}

fn infer_format(path: &Path, explicit: Option<FormatArg>) -> FormatArg {
    explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("uai") => FormatArg::Uai,
        _ => FormatArg::Native,
    })
}

/// Parse `args` (including the program name), run the command, and return
/// the process exit code. Documents go to `stdout` (or `--output`);
/// diagnostics go to `stderr` as one JSON object per line.
pub fn dispatch<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            // keep everything above the usage block, on one line
            let rendered = e.to_string();
            let message: Vec<&str> = rendered
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(|l| l.trim().trim_start_matches("error: "))
                .filter(|l| !l.is_empty())
                .collect();
            output::diagnostic(stderr, "error", EXIT_USAGE, "usage", &message.join(" "));
            return EXIT_USAGE;
        }
    };
    let result = match cli.command {
        Command::Run(a) => commands::run(&a, stdout, stderr),
        Command::Exact(a) => commands::exact(&a, stdout, stderr),
        Command::Jtree(a) => commands::jtree(&a, stdout, stderr),
        Command::Map(a) => commands::map(&a, stdout, stderr),
        Command::Grad(a) => commands::grad(&a, stdout, stderr),
        Command::Check(a) => commands::check(&a, stdout),
        Command::Convert(a) => commands::convert(&a, stdout, stderr),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let (code, kind) = e.classify();
            output::diagnostic(stderr, "error", code, kind, &e.to_string());
            code
        }
    }
}
