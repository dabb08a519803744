use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qpgordon::config::{Energies, ExperimentConfig, PRECISION_ENV};
use qpgordon::grammar::{parse_energy, EnergyChoice};
use qpgordon::{exit, execute, CliError, CliResult, Command};

/// Numerical checks of the quantitative Gordon criterion for quasiperiodic
/// Schrödinger operators.
#[derive(Debug, Parser)]
#[command(name = "qpgordon", version)]
struct Cli {
    /// TOML experiment config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; output order does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, env = PRECISION_ENV)]
    precision_bits: Option<usize>,
    /// Frequency spec, e.g. `surd:(sqrt(5)-1)/2`.
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// Potential spec, e.g. `cos:lambda=4`.
    #[arg(long, global = true)]
    potential: Option<String>,
    /// Phase as a decimal or `p/q`; repeatable.
    #[arg(long, global = true)]
    phase: Vec<String>,
    /// Energy, or `box-mid:k=<k>`; repeatable.
    #[arg(long, global = true, allow_hyphen_values = true)]
    energy: Vec<String>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    q_budget_digits: Option<usize>,
    #[arg(long, global = true)]
    depth: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Quotients, convergents and per-k Liouville rates.
    Contfrac,
    /// Exact star discrepancy of orbit segments against `2/q_k`.
    Discrepancy,
    /// Clamped, semi-bounded and logarithmic variation.
    Variation,
    /// Lyapunov exponent estimates over an energy list.
    Lyapunov,
    /// Uniform upper bound along the doubling chain.
    UniformBound,
    /// Gordon verdict at each phase and energy.
    GordonCheck,
    /// Box eigenvalues, residuals and decay rates.
    Spectrum,
    /// Regime labels from `L̂` against `β̂`.
    RegimeScan,
}

fn build_config(cli: &Cli) -> CliResult<(ExperimentConfig, PathBuf)> {
    let (mut cfg, base) = match &cli.config {
        Some(path) => (
            ExperimentConfig::load(path)?,
            path.parent().map(PathBuf::from).unwrap_or_default(),
        ),
        None => (ExperimentConfig::default(), PathBuf::from(".")),
    };
    if let Some(v) = &cli.output_dir {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.precision_bits {
        cfg.precision_bits = Some(v);
    }
    if let Some(v) = &cli.alpha {
        cfg.frequency = v.clone();
    }
    if let Some(v) = &cli.potential {
        cfg.potential = v.clone();
    }
    if !cli.phase.is_empty() {
        cfg.phases = cli.phase.clone();
    }
    if !cli.energy.is_empty() {
        let choices = cli.energy.iter().map(|e| parse_energy(e)).collect::<Result<Vec<_>, _>>()?;
        cfg.energies = match choices.as_slice() {
            [EnergyChoice::BoxMid { k }] => Energies::BoxMid { box_mid_k: *k },
            _ => Energies::List(
                choices
                    .iter()
                    .map(|c| match c {
                        EnergyChoice::Value(v) => Ok(*v),
                        EnergyChoice::BoxMid { .. } => Err(CliError::Config("box-mid cannot be combined with other energies".into())),
                    })
                    .collect::<CliResult<_>>()?,
            ),
        };
    }
    if let Some(v) = cli.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = cli.q_budget_digits {
        cfg.q_budget_digits = v;
    }
    if let Some(v) = cli.depth {
        cfg.depth = v;
    }
    Ok((cfg, base))
}

fn run(cli: Cli) -> CliResult<i32> {
    let cmd = match cli.command {
        Sub::Contfrac => Command::Contfrac,
        Sub::Discrepancy => Command::Discrepancy,
        Sub::Variation => Command::Variation,
        Sub::Lyapunov => Command::Lyapunov,
        Sub::UniformBound => Command::UniformBound,
        Sub::GordonCheck => Command::GordonCheck,
        Sub::Spectrum => Command::Spectrum,
        Sub::RegimeScan => Command::RegimeScan,
    };
    let (cfg, base) = build_config(&cli)?;
    let outcome = execute(cmd, cfg, &base, cli.jobs)?;
    const SHOWN: usize = 5;
    for w in outcome.warnings.iter().take(SHOWN) {
        eprintln!("warning: {w}");
    }
    if outcome.warnings.len() > SHOWN {
        eprintln!("warning: {} more in the manifest", outcome.warnings.len() - SHOWN);
    }
    for f in &outcome.outputs {
        println!("{}", outcome.output_dir.join(f).display());
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
