//! `fredholm`: batch computations for the regular Fredholm module of `F_n`.
//!
//! Every subcommand writes `<name>.json` and `<name>.csv` into `--out`.
//! Exit codes: 0 success, 1 invariant violation, 2 usage or input error,
//! 3 budget exceeded.

mod commands;
mod config;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, Settings};

#[derive(Debug, Parser)]
#[command(name = "fredholm", version, about = "Regular Fredholm modules of free groups, computed exactly")]
struct Cli {
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for the JSON and CSV reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cap on enumerated group elements (also FREDHOLM_BUDGET).
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ball and sphere sizes against the closed form.
    Growth(commands::GrowthArgs),
    /// Exact G-expectation and G-deviation over a ball.
    Deviation(commands::DeviationArgs),
    /// ℓᵖ sphere sums and verdicts.
    Summability(commands::SummabilityArgs),
    /// Singular values of `[P, λ(φ)]` against the deviation table.
    Spectrum(commands::SpectrumArgs),
    /// Operator identities on a finite truncation.
    Operators(OperatorsArgs),
    /// The Chern cocycle with a certified tail.
    Chern(commands::ChernArgs),
    /// Convergence of `g_*μ` to point masses.
    Furstenberg(commands::FurstenbergArgs),
    /// The full invariant suite.
    VerifyAll(verify::VerifyArgs),
}

#[derive(Debug, Args)]
struct OperatorsArgs {
    #[command(subcommand)]
    action: OperatorsAction,
}

#[derive(Debug, Subcommand)]
enum OperatorsAction {
    Verify(commands::OperatorsVerifyArgs),
}

/// Raised when a computed check fails; maps to exit code 1.
#[derive(Debug)]
pub struct InvariantViolation(pub String);

impl std::fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invariant violated: {}", self.0)
    }
}

impl std::error::Error for InvariantViolation {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<InvariantViolation>().is_some() {
        return 1;
    }
    match err.downcast_ref::<fredholm::Error>() {
        Some(fredholm::Error::Budget { .. }) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let settings = Settings::resolve(file, cli.out, cli.budget, cli.threads)?;
    if let Some(n) = settings.threads {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Growth(a) => commands::growth(&settings, a),
        Command::Deviation(a) => commands::deviation(&settings, a),
        Command::Summability(a) => commands::summability(&settings, a),
        Command::Spectrum(a) => commands::spectrum(&settings, a),
        Command::Operators(OperatorsArgs { action: OperatorsAction::Verify(a) }) => {
            commands::operators_verify(&settings, a)
        }
        Command::Chern(a) => commands::chern(&settings, a),
        Command::Furstenberg(a) => commands::furstenberg(&settings, a),
        Command::VerifyAll(a) => verify::verify_all(&settings, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("fredholm: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&InvariantViolation("x".into()).into()), 1);
        assert_eq!(exit_code(&fredholm::Error::Budget { what: "ball", requested: 9, cap: 1 }.into()), 3);
        assert_eq!(exit_code(&fredholm::Error::Input("x".into()).into()), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("io")), 2);
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from(["fredholm", "--out", "o", "growth", "--n", "3", "--R", "4"]).unwrap();
        assert!(matches!(cli.command, Command::Growth(commands::GrowthArgs { n: Some(3), radius: Some(4) })));
        assert!(Cli::try_parse_from(["fredholm", "chern", "--frobnicate"]).is_err());
    }
}
