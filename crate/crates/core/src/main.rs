use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use qml_core::cli::{run, Command, RunOptions};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sub {
    Check,
    Flow,
    Fold,
    Opnorm,
    Quasimode,
    Table,
}

/// Geometry checks, flows, fold analysis and scaling experiments for
/// restriction estimates of semiclassical quasimodes.
#[derive(Debug, Parser)]
#[command(name = "qml", version)]
struct Args {
    #[arg(value_enum)]
    command: Sub,
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for reports and CSV output.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Seed for all sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let cmd = match args.command {
        Sub::Check => Command::Check,
        Sub::Flow => Command::Flow,
        Sub::Fold => Command::Fold,
        Sub::Opnorm => Command::Opnorm,
        Sub::Quasimode => Command::Quasimode,
        Sub::Table => Command::Table,
    };
    let code = run(
        cmd,
        &RunOptions {
            config: args.config,
            out: args.out,
            seed: args.seed,
            jobs: args.jobs,
        },
    );
    std::process::exit(code);
}
