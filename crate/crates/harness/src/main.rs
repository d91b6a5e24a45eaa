use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cutdg_harness::{run_to_file, Experiment, ExperimentConfig, HarnessError};

#[derive(Parser, Debug)]
#[command(name = "cutdg", version, about = "Cut DG experiments on level set surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Errors and convergence orders over refinement levels.
    Convergence,
    /// Condition number of the system matrix over refinement levels.
    Condition,
    /// Mesh shift sweep on the first level.
    Perturbation,
    /// Mesh shift sweep for the default penalties and three ablations.
    Ablation,
    /// Solve on each level and report all error norms.
    Solve,
}

#[derive(clap::Args, Debug)]
struct Flags {
    /// Flat `key = value` file; flags given here override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    geometry: Option<String>,
    #[arg(long, global = true)]
    degree: Option<String>,
    #[arg(long, global = true)]
    epsilon: Option<String>,
    /// Comma list with inclusive ranges, e.g. `0-4` or `0,2,4`.
    #[arg(long, global = true)]
    levels: Option<String>,
    #[arg(long, global = true)]
    delta_samples: Option<String>,
    #[arg(long, global = true)]
    gamma0: Option<String>,
    #[arg(long, global = true)]
    gamma1: Option<String>,
    #[arg(long, global = true)]
    gamman: Option<String>,
    /// `direct` or `bicgstab`.
    #[arg(long, global = true)]
    solver: Option<String>,
    #[arg(long, global = true)]
    tolerance: Option<String>,
    #[arg(long, global = true)]
    max_iterations: Option<String>,
    /// Estimate condition numbers in sweeps (`true`/`false`).
    #[arg(long, global = true)]
    cond: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<String>,
}

fn experiment(c: Command) -> Experiment {
    match c {
        Command::Convergence => Experiment::Convergence,
        Command::Condition => Experiment::Condition,
        Command::Perturbation => Experiment::Perturbation,
        Command::Ablation => Experiment::Ablation,
        Command::Solve => Experiment::Solve,
    }
}

fn configure(flags: &Flags) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &flags.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    let overrides = [
        ("geometry", &flags.geometry),
        ("degree", &flags.degree),
        ("epsilon", &flags.epsilon),
        ("levels", &flags.levels),
        ("delta_samples", &flags.delta_samples),
        ("gamma0", &flags.gamma0),
        ("gamma1", &flags.gamma1),
        ("gamman", &flags.gamman),
        ("solver", &flags.solver),
        ("tolerance", &flags.tolerance),
        ("max_iterations", &flags.max_iterations),
        ("cond", &flags.cond),
        ("seed", &flags.seed),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if let Some(out) = &flags.out {
        cfg.output = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure(&cli.flags).and_then(|cfg| run_to_file(experiment(cli.command), &cfg));
    match result {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cutdg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
