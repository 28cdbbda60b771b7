use clap::Parser;
use dilemma_lab::config::Kind;
use dilemma_lab::{load, runner, OUT_ENV};
use std::path::PathBuf;
use std::process::ExitCode;

/// Runs one experiment kind from a JSON config and writes hashed, checksummed outputs.
#[derive(Parser, Debug)]
#[command(name = "dilemma-lab", version)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    kind: Kind,
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Run a single seed instead of the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = OUT_ENV, default_value = "runs")]
    out: PathBuf,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    jobs: Option<usize>,
    /// Check the config and print the resolved form without running.
    #[arg(long)]
    validate_only: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let m = match load(&cli.config, cli.kind, cli.seed) {
        Ok(m) => m,
        Err(diags) => {
            for d in &diags {
                eprintln!("{d}");
            }
            return ExitCode::from(2);
        }
    };
    if cli.validate_only {
        println!("{}", serde_json::to_string_pretty(&m).expect("config serializes"));
        eprintln!("config ok: {} (hash {})", cli.config.display(), dilemma_lab::config::config_hash(&m));
        return ExitCode::SUCCESS;
    }
    match runner::run(&m, &cli.out, cli.jobs) {
        Ok((path, manifest)) => {
            for o in &manifest.outputs {
                println!("{}", cli.out.join(&o.file).display());
            }
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
