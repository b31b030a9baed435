use std::num::NonZeroUsize;
use std::path::PathBuf;

use clap::Args;

use bulkhist::data::DatasetHandle;
use bulkhist::pipeline::{run_with_options, ExecutionMode, RunOptions, RunPlan, TransferStrategy};
use bulkhist::{Axis, EngineConfig, HistogramSpec};

use crate::common::{data_error, internal, usage, Checksum, CmdResult};

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TransferArg {
    Staged,
    View,
}

impl From<TransferArg> for TransferStrategy {
    fn from(t: TransferArg) -> TransferStrategy {
        match t {
            TransferArg::Staged => TransferStrategy::Staged,
            TransferArg::View => TransferStrategy::View,
        }
    }
}

#[derive(Args)]
pub struct BenchArgs {
    /// Dataset directory (as written by `generate`).
    #[arg(long)]
    dataset: PathBuf,
    /// Coordinate column.
    #[arg(long, default_value = "x")]
    column: String,
    /// Weight column; omitted means unit weights.
    #[arg(long)]
    weight: Option<String>,
    /// Regular bins between --min and --max.
    #[arg(long, default_value_t = 1000)]
    bins: usize,
    /// Axis lower bound (inclusive).
    #[arg(long, default_value_t = 0.0)]
    min: f64,
    /// Axis upper bound (exclusive).
    #[arg(long, default_value_t = 1.0)]
    max: f64,
    /// File with one ascending bin edge per line; overrides --bins/--min/--max.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Identical histogram actions to run per pass, to scale per-event work.
    #[arg(long, default_value_t = 1)]
    actions: usize,
    /// Worker threads; defaults to the machine's available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Items per worker group.
    #[arg(long, default_value_t = 256)]
    group_size: usize,
    /// Consecutive events per item.
    #[arg(long, default_value_t = 2)]
    elements_per_item: usize,
    /// Run one reduction pass per statistics sum instead of a fused pass.
    #[arg(long)]
    separate_reductions: bool,
    /// Merge worker results in completion order instead of worker order.
    #[arg(long)]
    nondeterministic_merge: bool,
    /// How bulks reach the engine.
    #[arg(long, value_enum, default_value = "staged")]
    transfer: TransferArg,
    /// Events per bulk.
    #[arg(long, default_value_t = bulkhist::pipeline::DEFAULT_BULK_CAPACITY)]
    bulk_capacity: usize,
    /// Timed repetitions of the full run.
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    /// Read and process on one thread instead of the double-buffered pipeline.
    #[arg(long)]
    sync: bool,
    /// Directory for JSON/CSV phase reports (created if missing).
    #[arg(long)]
    report: Option<PathBuf>,
}

fn read_edges(path: &PathBuf) -> CmdResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| data_error(format!("{}: {e}", path.display())))?;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let edge: f64 = line.parse().map_err(|_| {
            usage(format!(
                "{}:{}: '{line}' is not a number",
                path.display(),
                lineno + 1
            ))
        })?;
        edges.push(edge);
    }
    if edges.len() < 2 {
        return Err(usage(format!(
            "{}: need at least two edges, got {}",
            path.display(),
            edges.len()
        )));
    }
    Ok(edges)
}

fn build_axis(args: &BenchArgs) -> CmdResult<Axis> {
    if let Some(path) = &args.edges {
        let edges = read_edges(path)?;
        return Axis::variable(edges).map_err(|e| usage(e.to_string()));
    }
    if args.bins == 0 {
        return Err(usage("--bins must be at least 1"));
    }
    if !args.min.is_finite() || !args.max.is_finite() || !(args.min < args.max) {
        return Err(usage(format!(
            "axis range [{}, {}) is not a valid finite interval",
            args.min, args.max
        )));
    }
    Axis::fixed(args.bins, args.min, args.max).map_err(|e| usage(e.to_string()))
}

fn build_engine(args: &BenchArgs) -> CmdResult<EngineConfig> {
    let workers = match args.workers {
        Some(w) => NonZeroUsize::new(w).ok_or_else(|| usage("--workers must be at least 1"))?,
        None => std::thread::available_parallelism()
            .unwrap_or_else(|_| NonZeroUsize::new(1).unwrap()),
    };
    let group_size = NonZeroUsize::new(args.group_size)
        .ok_or_else(|| usage("--group-size must be at least 1"))?;
    let elements_per_item = NonZeroUsize::new(args.elements_per_item)
        .ok_or_else(|| usage("--elements-per-item must be at least 1"))?;
    Ok(EngineConfig {
        workers,
        group_size,
        elements_per_item,
        fused_reductions: !args.separate_reductions,
        deterministic_merge: !args.nondeterministic_merge,
    })
}

fn require_column(source: &DatasetHandle, name: &str) -> CmdResult {
    if source.has_column(name) {
        return Ok(());
    }
    let mut available = source.column_names().join(", ");
    if available.is_empty() {
        available = "none".to_string();
    }
    Err(usage(format!(
        "dataset has no column '{name}' (available: {available})"
    )))
}

pub fn run(args: BenchArgs) -> CmdResult {
    if args.actions == 0 {
        return Err(usage("--actions must be at least 1"));
    }
    if args.repetitions == 0 {
        return Err(usage("--repetitions must be at least 1"));
    }
    if args.bulk_capacity == 0 {
        return Err(usage("--bulk-capacity must be at least 1"));
    }
    let axis = build_axis(&args)?;
    let engine = build_engine(&args)?;

    let source = DatasetHandle::open(&args.dataset)?;
    require_column(&source, &args.column)?;
    if let Some(weight) = &args.weight {
        require_column(&source, weight)?;
    }

    let actions: Vec<HistogramSpec> = (0..args.actions)
        .map(|i| {
            HistogramSpec::new(
                format!("h{i}"),
                vec![axis.clone()],
                vec![args.column.clone()],
                args.weight.clone(),
            )
        })
        .collect::<Result<_, _>>()?;
    let plan = RunPlan::new(
        source,
        actions,
        engine,
        args.transfer.into(),
        args.bulk_capacity,
    )?;
    let options = RunOptions {
        mode: if args.sync {
            ExecutionMode::Synchronous
        } else {
            ExecutionMode::Pipelined
        },
        ..RunOptions::default()
    };

    if let Some(dir) = &args.report {
        std::fs::create_dir_all(dir).map_err(|e| data_error(format!("{}: {e}", dir.display())))?;
    }

    let mut wall_ns: Vec<u64> = Vec::with_capacity(args.repetitions);
    let mut checksums: Option<Vec<Checksum>> = None;
    let mut last_result = None;
    for rep in 0..args.repetitions {
        let result = run_with_options(&plan, &options)?;
        let seconds = result.report.wall_clock_ns as f64 * 1e-9;
        let mevents = result.events_processed as f64 / 1e6;
        println!(
            "rep {}/{}: wall {:.1} ms, {} events, {:.2} Mevents/s",
            rep + 1,
            args.repetitions,
            seconds * 1e3,
            result.events_processed,
            mevents / seconds.max(1e-12)
        );
        let sums: Vec<Checksum> = result.histograms.iter().map(Checksum::of).collect();
        match &checksums {
            None => checksums = Some(sums),
            Some(prior) => {
                if *prior != sums {
                    // Same plan, same data: any drift is a defect.
                    return Err(internal(format!(
                        "repetition {} produced different results than repetition 1",
                        rep + 1
                    )));
                }
            }
        }
        if let Some(dir) = &args.report {
            let json = dir.join(format!("report-rep{}.json", rep + 1));
            std::fs::write(&json, result.report.to_json())
                .map_err(|e| data_error(format!("{}: {e}", json.display())))?;
            let csv = dir.join(format!("phases-rep{}.csv", rep + 1));
            std::fs::write(&csv, result.report.to_csv())
                .map_err(|e| data_error(format!("{}: {e}", csv.display())))?;
        }
        wall_ns.push(result.report.wall_clock_ns);
        last_result = Some(result);
    }

    let result = last_result.expect("at least one repetition ran");
    for histogram in &result.histograms {
        let checksum = Checksum::of(histogram);
        match histogram.axis_summaries() {
            Ok(summaries) => println!(
                "{}: {} mean={:.6} stddev={:.6}",
                histogram.spec().name(),
                checksum,
                summaries[0].mean,
                summaries[0].stddev
            ),
            Err(_) => println!("{}: {} (no in-range entries)", histogram.spec().name(), checksum),
        }
    }

    wall_ns.sort_unstable();
    let median_ns = wall_ns[wall_ns.len() / 2];
    let seconds = median_ns as f64 * 1e-9;
    println!(
        "median of {}: wall {:.1} ms, {:.2} Mevents/s ({} bulks of {})",
        args.repetitions,
        seconds * 1e3,
        result.events_processed as f64 / 1e6 / seconds.max(1e-12),
        result.bulks_processed,
        args.bulk_capacity
    );

    if let Some(dir) = &args.report {
        let summary = serde_json::json!({
            "median_wall_ns": median_ns,
            "repetitions": args.repetitions,
            "events": result.events_processed,
            "bulks": result.bulks_processed,
            "throughput_mevents_s": result.events_processed as f64 / 1e6 / seconds.max(1e-12),
        });
        let path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary).expect("static JSON shape");
        std::fs::write(&path, text).map_err(|e| data_error(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
