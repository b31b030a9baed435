use std::path::PathBuf;
use std::time::Instant;

use clap::Args;

use crate::common::{generate_dataset, parse_count, usage, CmdResult};

#[derive(Args)]
pub struct GenerateArgs {
    /// Events to generate; k/M/G suffixes accepted (20M = 20000000).
    #[arg(long, value_parser = parse_count)]
    events: u64,
    /// Dataset directory to create.
    #[arg(long)]
    out: PathBuf,
    /// Generator seed; same seed, same bytes.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Lower range bound (inclusive).
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    /// Upper range bound (exclusive).
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
    /// Column name.
    #[arg(long, default_value = "x")]
    column: String,
}

pub fn run(args: GenerateArgs) -> CmdResult {
    if args.events == 0 {
        return Err(usage("--events must be at least 1"));
    }
    if !args.lo.is_finite() || !args.hi.is_finite() || !(args.lo < args.hi) {
        return Err(usage(format!(
            "range [{}, {}) is not a valid finite interval",
            args.lo, args.hi
        )));
    }
    let started = Instant::now();
    generate_dataset(&args.out, &args.column, args.events, args.seed, args.lo, args.hi)?;
    println!(
        "wrote {} events to {} (column '{}', seed {}, range [{}, {})) in {:.2}s",
        args.events,
        args.out.display(),
        args.column,
        args.seed,
        args.lo,
        args.hi,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
