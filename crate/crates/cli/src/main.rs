//! `sorkin-lab`: interference analysis, tomography and experiment simulation
//! from the command line.
//!
//! Exit codes: 0 success, 1 validation or verdict failure, 2 input error.

mod commands;
mod output;
mod resolve;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Format;

#[derive(Parser, Debug)]
#[command(
    name = "sorkin-lab",
    version,
    about = "Third-order interference toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the filter axioms and slit-system relations.
    Validate(Common),
    /// Compute I2, I3 (and optionally I4) for a state and detector, a raw
    /// table, or a random sweep.
    Interference(InterferenceArgs),
    /// Evaluate the three equivalent no-third-order-interference conditions.
    Prop1(Common),
    /// Reconstruct a state from two-slit filtering tomography.
    Tomography(TomographyArgs),
    /// Simulate the seven-setting experiment and estimate I3.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// quantum:D, real_quantum:D, classical:N, or a model JSON file.
    #[arg(long)]
    pub model: Option<String>,
    /// basis, spin1, model, random:SEED, or a JSON file with three projectors.
    #[arg(long)]
    pub slits: Option<String>,
    /// Shorthand for `--slits spin1`.
    #[arg(long)]
    pub spin1: bool,
    /// Spin-1 filter axis, as x,y,z.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Spin-1 detector axis, as x,y,z.
    #[arg(long, allow_hyphen_values = true)]
    pub d: Option<String>,
    /// fixture, mixed, basis:I, random:SEED, pure:SEED, or a JSON file.
    #[arg(long)]
    pub state: Option<String>,
    /// fixture, unit, basis:I, random:SEED, or a JSON file.
    #[arg(long)]
    pub effect: Option<String>,
    /// Named bundle: qutrit or classical-uniform.
    #[arg(long)]
    pub fixture: Option<String>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random samples for sweeps and sampled checks.
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    /// Output file; a `<out>.meta.json` sidecar records timing.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct InterferenceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Probability table JSON (or `fixture-0.6`) instead of a model.
    #[arg(long)]
    pub table: Option<String>,
    /// Also compute I4 over four basis slits (model dimension at least 4).
    #[arg(long)]
    pub i4: bool,
    /// Sweep `--samples` random (state, effect) pairs instead of one.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, value_enum, default_value_t = Sampling::General)]
    pub sampling: Sampling,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Sampling {
    General,
    Pure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Sampled,
}

#[derive(Args, Debug)]
pub struct TomographyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    /// Also run at this many shots per setting and report both errors.
    #[arg(long)]
    pub compare_shots: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: Common,
    /// Simulate a raw probability table (or `fixture-0.6`) instead of a model.
    #[arg(long)]
    pub table: Option<String>,
    /// Detector: basis, or a JSON file with projectors. Spin-1 runs use the
    /// eigenprojectors of S·d.
    #[arg(long)]
    pub detector: Option<String>,
    /// Also write the count record as CSV to this path.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

fn configure_threads() -> Result<()> {
    let Ok(text) = std::env::var("SORKIN_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .with_context(|| format!("SORKIN_LAB_THREADS={text:?} is not a thread count"))?;
    if n > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            bail!("cannot configure {n} threads: {e}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Validate(c) => commands::validate(c),
        Command::Interference(a) => commands::interference(a),
        Command::Prop1(c) => commands::prop1(c),
        Command::Tomography(a) => commands::tomography(a),
        Command::Experiment(a) => commands::experiment(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
