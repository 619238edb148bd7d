use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use protmeas::scenario::{emit, run_scenario, Experiment, Format, RunSettings, ScenarioConfig};
use protmeas::Error;

#[derive(Parser, Debug)]
#[command(version, about = "Protective measurement experiments from TOML scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write its tables.
    Run {
        config: PathBuf,
        /// Override the seed given in the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// csv or json.
        #[arg(long, default_value = "json")]
        format: Format,
        /// Worker threads (results do not depend on this).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a scenario file without running it.
    Validate { config: PathBuf },
    /// Print the available experiments.
    ListExperiments,
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        eprintln!("  caused by: {s}");
        source = s.source();
    }
    if e.is_validation() {
        ExitCode::from(1)
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{e}  {}", e.description());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match ScenarioConfig::load(&config) {
            Ok(c) => {
                println!("{}: ok ({} \"{}\")", config.display(), c.experiment(), c.scenario.name);
                ExitCode::SUCCESS
            }
            Err(e) => exit_for(&e),
        },
        Command::Run { config, seed, out, format, threads } => {
            let mut c = match ScenarioConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return exit_for(&e),
            };
            if let Some(seed) = seed {
                c.scenario.seed = seed;
            }
            let bundle = match run_scenario(&c, RunSettings { threads }) {
                Ok(b) => b,
                Err(e) => return exit_for(&e),
            };
            let files = match emit(&bundle, format, &out) {
                Ok(f) => f,
                Err(e) => return exit_for(&e),
            };
            println!(
                "{} ({}) seed {} in {:.1} s",
                bundle.payload.name, bundle.payload.experiment, bundle.metadata.seed, bundle.metadata.wall_clock_seconds
            );
            for c in &bundle.payload.checks {
                println!("  {} {}: {:.6e} (threshold {:.6e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
            }
            for f in files {
                println!("  wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
    }
}
