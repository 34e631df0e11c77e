use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

use commands::Failure;

/// Observer-based SPR boundary controllers for lumped port-Hamiltonian
/// plants.
#[derive(Parser)]
#[command(name = "sprphs", version, about)]
struct Cli {
    /// Write the shipped scenario fixtures into this directory and exit.
    #[arg(long, value_name = "DIR")]
    seed_fixtures: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the lumped model and check its structure.
    Model(Common),
    /// Synthesize the controller and its certificate.
    Synth(Common),
    /// Re-check a controller file against the scenario.
    Verify(WithController),
    /// Spectra at design order and the spillover table.
    Analyze(WithController),
    /// Closed-loop simulation with energy audit.
    Simulate(WithController),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (defaults to `output.directory`, then `out`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WithController {
    #[command(flatten)]
    common: Common,
    /// Controller file from `synth`; synthesized in-process when omitted.
    #[arg(long, value_name = "PATH")]
    controller: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match (cli.seed_fixtures, cli.command) {
        (Some(dir), _) => commands::seed_fixtures(&dir),
        (None, Some(cmd)) => run(cmd),
        (None, None) => Err(Failure::usage("no command given; see --help")),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            if let Some(h) = &f.hint {
                eprintln!("hint: {h}");
            }
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Model(c) => commands::model(&c.config, c.out.as_deref()),
        Command::Synth(c) => commands::synth(&c.config, c.out.as_deref()),
        Command::Verify(w) => commands::verify(&w.common.config, w.common.out.as_deref(), w.controller.as_deref()),
        Command::Analyze(w) => commands::analyze(&w.common.config, w.common.out.as_deref(), w.controller.as_deref()),
        Command::Simulate(w) => commands::simulate(&w.common.config, w.common.out.as_deref(), w.controller.as_deref()),
    }
}
