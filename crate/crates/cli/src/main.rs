use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qthreshold_cli::error::EXIT_CHECK_FAILED;
use qthreshold_cli::{run, CliError, CommandKind, Invocation, RunOptions};

#[derive(Parser)]
#[command(name = "qthreshold", version, about = "Noisy quantum dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Noiseless reference state and target amplitude.
    Noiseless(Common),
    /// Monte Carlo ensemble of noisy trajectories.
    Ensemble(Common),
    /// Success frequency of planned ensembles, and Hoeffding checks.
    VerifyTheorem(Common),
    /// Minimal ensemble size over a grid of noise strengths.
    Sweep(Common),
    /// Rescaled mean state against the noiseless state.
    OracleCheck(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `run.root_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, or `auto`.
    #[arg(long, default_value = "auto")]
    threads: String,
    /// Repeat at half the step and report the gap.
    #[arg(long)]
    dt_halve: bool,
    #[arg(long)]
    dump_trajectories: bool,
    /// Unknown keys become warnings.
    #[arg(long)]
    lenient: bool,
}

fn threads(spec: &str) -> Result<usize, CliError> {
    if spec == "auto" {
        return Ok(0);
    }
    match spec.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(CliError::Validation(vec![qthreshold_cli::Violation::new(
            "--threads",
            format!("expected a positive integer or `auto`, got {spec:?}"),
        )])),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, c) = match cli.command {
        Command::Noiseless(c) => (CommandKind::Noiseless, c),
        Command::Ensemble(c) => (CommandKind::Ensemble, c),
        Command::VerifyTheorem(c) => (CommandKind::VerifyTheorem, c),
        Command::Sweep(c) => (CommandKind::Sweep, c),
        Command::OracleCheck(c) => (CommandKind::OracleCheck, c),
    };
    let result = threads(&c.threads).and_then(|n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        run(&Invocation {
            command: kind,
            config: c.config,
            out: c.out,
            seed: c.seed,
            options: RunOptions { dt_halve: c.dt_halve, dump_trajectories: c.dump_trajectories },
            lenient: c.lenient,
        })
    });
    match result {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("{}", serde_json::json!({ "warning": w }));
            }
            println!("{}", report.out_dir.join("summary.json").display());
            if report.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("{}", serde_json::json!({ "error": "check_failed", "command": kind.name() }));
                ExitCode::from(EXIT_CHECK_FAILED as u8)
            }
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
