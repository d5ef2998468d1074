use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use turnpike_cli::{exit, run, Command, HeatDemo, Options};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  other failure (i/o, invalid problem data)
  2  command-line or config parse error
  3  singular and inconsistent steady-state KKT system
  4  state blow-up during a solve
  5  unreliable eigen decomposition or spectral gap violation";

/// Turnpike analysis of generalized linear-quadratic optimal control problems.
#[derive(Parser)]
#[command(name = "turnpike", version, after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Problem and run configuration (`key = value` lines).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Directory for CSV and text output.
    #[arg(long, short, global = true, env = "TURNPIKE_OUT", default_value = ".")]
    out: PathBuf,

    /// Time step, overriding the config.
    #[arg(long, global = true)]
    dt: Option<f64>,

    /// Tube radius for the measure of time spent away from the steady state.
    #[arg(long, global = true)]
    epsilon: Option<f64>,

    /// Seed for random presets and the stable heat demo.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the steady-state problem.
    Steady,
    /// Solve the finite-horizon problem and write the trajectory.
    Solve,
    /// Solve over every configured horizon and report turnpike statistics.
    Scan,
    /// Hautus stabilizability and detectability tests.
    Hautus,
    /// Heat-equation demonstrations.
    Heat {
        /// Which demonstration to run; defaults to `heat.demo` from the config.
        #[arg(long, value_enum)]
        demo: Option<DemoArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoArg {
    Stable,
    Counterexample,
    Truncation,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(exit::PARSE as u8);
    };
    let command = match cli.command {
        Cmd::Steady => Command::Steady,
        Cmd::Solve => Command::Solve,
        Cmd::Scan => Command::Scan,
        Cmd::Hautus => Command::Hautus,
        Cmd::Heat { demo } => Command::Heat {
            demo: demo.map(|d| match d {
                DemoArg::Stable => HeatDemo::Stable,
                DemoArg::Counterexample => HeatDemo::Counterexample,
                DemoArg::Truncation => HeatDemo::Truncation,
            }),
        },
    };
    let options = Options {
        config,
        out: cli.out,
        dt: cli.dt,
        epsilon: cli.epsilon,
        seed: cli.seed,
    };
    let mut stdout = std::io::stdout().lock();
    let result = run(command, &options, &mut stdout);
    let _ = stdout.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
