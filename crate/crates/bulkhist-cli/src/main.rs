//! Command-line harness for the bulk histogramming engine.
//!
//! Three subcommands: `generate` writes deterministic datasets, `bench`
//! fills histograms from one dataset under a chosen configuration, and
//! `sweep` runs a configuration matrix into a combined CSV.

mod bench;
mod common;
mod generate;
mod sweep;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bulkhist",
    version,
    about = "Bulk-columnar histogram filling benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a deterministic uniform dataset.
    Generate(generate::GenerateArgs),
    /// Fill histograms from a dataset and report phase timings.
    Bench(bench::BenchArgs),
    /// Run a benchmark matrix and collect a combined CSV.
    Sweep(sweep::SweepArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => common::EXIT_USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let outcome = match cli.command {
        Command::Generate(args) => generate::run(args),
        Command::Bench(args) => bench::run(args),
        Command::Sweep(args) => sweep::run(args),
    };
    if let Err(failure) = outcome {
        eprintln!("error: {}", failure.message);
        std::process::exit(failure.code);
    }
}
