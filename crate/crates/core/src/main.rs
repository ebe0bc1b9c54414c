use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qsdw::cli::{self, RunOptions};

#[derive(Parser)]
#[command(name = "qsdw", version, about = "Pseudo-spectral lab for strongly damped wave equations")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config
    Run {
        config: PathBuf,
        #[arg(long, default_value = "qsdw-out")]
        output_dir: PathBuf,
        /// Overrides `initial.seed`
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let Command::Run {
        config,
        output_dir,
        seed,
        quiet,
    } = match Args::try_parse() {
        Ok(args) => args.command,
        Err(e) => {
            let _ = e.print();
            // usage errors share the configuration exit code
            return ExitCode::from(if e.use_stderr() { cli::EXIT_CONFIG } else { cli::EXIT_OK });
        }
    };
    if let Err(e) = cli::configure_threads() {
        eprintln!("qsdw: {e}");
        return ExitCode::from(cli::EXIT_CONFIG);
    }
    ExitCode::from(cli::run(&RunOptions {
        config,
        output_dir,
        seed,
        quiet,
    }))
}
