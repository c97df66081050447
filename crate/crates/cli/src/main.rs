use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pilotwave::io::{default_config_toml, load_config, run_to_dir};
use pilotwave::scenarios::ScenarioId;
use pilotwave::SimError;

/// Pilot-wave simulations of interference, Stern-Gerlach and EPR-B experiments.
#[derive(Parser)]
#[command(name = "pilotwave", version, arg_required_else_help = true)]
struct Cli {
    /// Print the scenario ids and exit.
    #[arg(long, conflicts_with_all = ["print_defaults"])]
    list_scenarios: bool,

    /// Print a complete default config for SCENARIO and exit.
    #[arg(long, value_name = "SCENARIO")]
    print_defaults: Option<String>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write its outputs.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Replace a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
}

fn fail(e: &SimError) -> ExitCode {
    eprintln!("error[{}]: {e}", e.kind());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_scenarios {
        for id in ScenarioId::ALL {
            println!("{:<18} {}", id.name(), id.describe());
        }
        return ExitCode::SUCCESS;
    }
    if let Some(name) = cli.print_defaults {
        let Some(id) = ScenarioId::from_name(&name) else {
            return fail(&SimError::ConfigSchema(format!("unknown scenario `{name}`")));
        };
        print!("{}", default_config_toml(id));
        return ExitCode::SUCCESS;
    }
    let Some(Command::Run { config, out, seed, force }) = cli.command else {
        return ExitCode::SUCCESS;
    };
    let mut cfg = match load_config(&config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    match run_to_dir(&cfg, &out, force) {
        Ok(manifest) => {
            if let Ok(stats) = std::fs::read_to_string(out.join("stats.txt")) {
                print!("{stats}");
            }
            eprintln!("wrote {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
