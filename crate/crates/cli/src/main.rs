use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lieddp_cli::{load_scenario, run_montecarlo, run_solve, status_exit_code, CliError, McMode, Overrides};

#[derive(Parser, Debug)]
#[command(name = "lieddp", version, about = "Constrained DDP on matrix Lie groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Constraint Jacobian mode (overrides the scenario).
    #[arg(long, global = true, value_enum)]
    jacobian: Option<JacobianArg>,

    /// Base seed for Monte-Carlo noise (overrides the scenario).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum JacobianArg {
    Paper,
    Numeric,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Open,
    Fb,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a scenario and write trajectory, convergence and summary files.
    Solve {
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Execute a solved nominal under noise (run `solve` into the same
    /// directory first, or point --nominal at one).
    Mc {
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Directory holding nominal.json, defaults to --out.
        #[arg(long)]
        nominal: Option<PathBuf>,
    },
    /// Parse and validate a scenario.
    Validate { scenario: PathBuf },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let overrides = Overrides {
        jacobian: cli.jacobian.map(|j| match j {
            JacobianArg::Paper => "paper".to_string(),
            JacobianArg::Numeric => "numeric".to_string(),
        }),
        seed: cli.seed,
    };
    match cli.command {
        Command::Solve { scenario, out } => {
            let s = load_scenario(&scenario)?;
            let (summary, status) = run_solve(&s, &overrides, &out)?;
            println!(
                "{}: {} after {} iterations, cost {:.6e}, max violation {:.3e}",
                scenario.display(),
                summary.status,
                summary.inner_iterations,
                summary.final_cost,
                summary.max_violation
            );
            Ok(status_exit_code(status))
        }
        Command::Mc { scenario, out, samples, mode, nominal } => {
            let s = load_scenario(&scenario)?;
            let mode = match mode {
                ModeArg::Open => McMode::Open,
                ModeArg::Fb => McMode::Feedback,
            };
            let nominal = nominal.unwrap_or_else(|| out.clone());
            let summary = run_montecarlo(&s, &overrides, &nominal, samples, mode, &out)?;
            println!(
                "{}: {} samples ({} dropped), terminal covariance trace {:.6e}",
                summary.mode, summary.samples, summary.dropped, summary.terminal_trace
            );
            Ok(0)
        }
        Command::Validate { scenario } => {
            load_scenario(&scenario)?;
            println!("{}: ok", scenario.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
