use std::fmt::Write as _;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use bulkhist::data::DatasetHandle;
use bulkhist::pipeline::{run as run_plan, RunPlan, TransferStrategy};
use bulkhist::{Axis, EngineConfig, HistogramSpec};

use crate::common::{data_error, generate_dataset, internal, usage, Checksum, CmdResult};

/// Keeps a typo'd matrix from queueing hours of work.
const MAX_CELLS: usize = 10_000;

#[derive(Args)]
pub struct SweepArgs {
    /// JSON file describing the parameter grid.
    #[arg(long)]
    matrix: PathBuf,
    /// Output directory for datasets, reports, and the combined CSV.
    #[arg(long)]
    out: PathBuf,
    /// Seed for generated datasets.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn one_usize() -> Vec<usize> {
    vec![1]
}

fn two_usize() -> Vec<usize> {
    vec![2]
}

fn staged_only() -> Vec<String> {
    vec!["staged".to_string()]
}

fn fused_only() -> Vec<bool> {
    vec![true]
}

fn one() -> usize {
    1
}

fn thousand() -> usize {
    1000
}

fn unit_hi() -> f64 {
    1.0
}

fn default_bulk_capacity() -> usize {
    bulkhist::pipeline::DEFAULT_BULK_CAPACITY
}

fn default_group_size() -> usize {
    256
}

/// Parameter grid: the cross product of the vector fields is run, the scalar
/// fields apply to every cell.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Matrix {
    events: Vec<u64>,
    #[serde(default = "one_usize")]
    workers: Vec<usize>,
    #[serde(default = "two_usize")]
    elements_per_item: Vec<usize>,
    #[serde(default = "staged_only")]
    transfer: Vec<String>,
    #[serde(default = "fused_only")]
    fused: Vec<bool>,
    #[serde(default = "one")]
    repetitions: usize,
    #[serde(default = "thousand")]
    bins: usize,
    #[serde(default)]
    lo: f64,
    #[serde(default = "unit_hi")]
    hi: f64,
    #[serde(default = "default_bulk_capacity")]
    bulk_capacity: usize,
    #[serde(default = "default_group_size")]
    group_size: usize,
}

impl Matrix {
    fn load(path: &Path) -> CmdResult<Matrix> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| data_error(format!("{}: {e}", path.display())))?;
        let matrix: Matrix = serde_json::from_str(&text)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        matrix.validate()?;
        Ok(matrix)
    }

    fn validate(&self) -> CmdResult {
        if self.events.is_empty() {
            return Err(usage("matrix field 'events' must list at least one value"));
        }
        if self.events.contains(&0) {
            return Err(usage("matrix field 'events' must not contain 0"));
        }
        for (name, values) in [
            ("workers", &self.workers),
            ("elements_per_item", &self.elements_per_item),
        ] {
            if values.is_empty() {
                return Err(usage(format!(
                    "matrix field '{name}' must list at least one value"
                )));
            }
            if values.contains(&0) {
                return Err(usage(format!("matrix field '{name}' must not contain 0")));
            }
        }
        if self.transfer.is_empty() || self.fused.is_empty() {
            return Err(usage(
                "matrix fields 'transfer' and 'fused' must list at least one value",
            ));
        }
        for t in &self.transfer {
            if t != "staged" && t != "view" {
                return Err(usage(format!(
                    "matrix transfer '{t}' must be 'staged' or 'view'"
                )));
            }
        }
        if self.repetitions == 0 {
            return Err(usage("matrix field 'repetitions' must be at least 1"));
        }
        if self.bins == 0 || self.bulk_capacity == 0 || self.group_size == 0 {
            return Err(usage(
                "matrix fields 'bins', 'bulk_capacity', and 'group_size' must be at least 1",
            ));
        }
        if !self.lo.is_finite() || !self.hi.is_finite() || !(self.lo < self.hi) {
            return Err(usage(format!(
                "matrix range [{}, {}) is not a valid finite interval",
                self.lo, self.hi
            )));
        }
        let cells = self.cell_count();
        if cells > MAX_CELLS {
            return Err(usage(format!(
                "matrix expands to {cells} cells; the limit is {MAX_CELLS}"
            )));
        }
        Ok(())
    }

    fn cell_count(&self) -> usize {
        self.events.len()
            * self.workers.len()
            * self.elements_per_item.len()
            * self.transfer.len()
            * self.fused.len()
    }
}

/// Generate (or reuse) the dataset for one event count.
fn dataset_for(out: &Path, events: u64, seed: u64, lo: f64, hi: f64) -> CmdResult<PathBuf> {
    let dir = out.join("datasets").join(format!("ev{events}"));
    if !dir.join("manifest.json").exists() {
        println!("generating {events} events at {}", dir.display());
        generate_dataset(&dir, "x", events, seed, lo, hi)?;
    }
    Ok(dir)
}

struct Cell {
    events: u64,
    workers: usize,
    elements_per_item: usize,
    transfer: TransferStrategy,
    fused: bool,
}

impl Cell {
    fn report_stem(&self, matrix: &Matrix, rep: usize) -> String {
        format!(
            "ev{}-w{}-g{}-epi{}-{}-{}-rep{}",
            self.events,
            self.workers,
            matrix.group_size,
            self.elements_per_item,
            self.transfer.name(),
            if self.fused { "fused" } else { "split" },
            rep
        )
    }
}

pub fn run(args: SweepArgs) -> CmdResult {
    let matrix = Matrix::load(&args.matrix)?;
    std::fs::create_dir_all(args.out.join("reports"))
        .map_err(|e| data_error(format!("{}: {e}", args.out.display())))?;

    let axis = Axis::fixed(matrix.bins, matrix.lo, matrix.hi)?;
    let mut cells = Vec::with_capacity(matrix.cell_count());
    for &events in &matrix.events {
        for &workers in &matrix.workers {
            for &elements_per_item in &matrix.elements_per_item {
                for transfer in &matrix.transfer {
                    for &fused in &matrix.fused {
                        cells.push(Cell {
                            events,
                            workers,
                            elements_per_item,
                            transfer: if transfer == "staged" {
                                TransferStrategy::Staged
                            } else {
                                TransferStrategy::View
                            },
                            fused,
                        });
                    }
                }
            }
        }
    }

    let mut csv = String::from(
        "events,workers,group_size,elements_per_item,fused,transfer,bulk_capacity,repetition,\
         wall_ns,throughput_mevents_s,fill_ns,reduce_ns,merge_ns,transfer_ns,setup_ns,io_ns,\
         bytes_transferred,checksum_sum,checksum_entries\n",
    );
    let mut rows = 0usize;
    // Every cell with the same event count histograms the same dataset, so
    // their checksums must agree no matter how the work was partitioned.
    let mut reference: Vec<(u64, Checksum)> = Vec::new();
    for (index, cell) in cells.iter().enumerate() {
        let dir = dataset_for(&args.out, cell.events, args.seed, matrix.lo, matrix.hi)?;
        let source = DatasetHandle::open(&dir)?;
        let spec = HistogramSpec::new(
            "h0",
            vec![axis.clone()],
            vec!["x".to_string()],
            None,
        )?;
        let engine = EngineConfig {
            workers: NonZeroUsize::new(cell.workers).expect("validated nonzero"),
            group_size: NonZeroUsize::new(matrix.group_size).expect("validated nonzero"),
            elements_per_item: NonZeroUsize::new(cell.elements_per_item)
                .expect("validated nonzero"),
            fused_reductions: cell.fused,
            deterministic_merge: true,
        };
        let plan = RunPlan::new(
            source,
            vec![spec],
            engine,
            cell.transfer,
            matrix.bulk_capacity,
        )?;
        println!(
            "cell {}/{}: ev{} w{} epi{} {} {}",
            index + 1,
            cells.len(),
            cell.events,
            cell.workers,
            cell.elements_per_item,
            cell.transfer.name(),
            if cell.fused { "fused" } else { "split" }
        );
        for rep in 1..=matrix.repetitions {
            let result = run_plan(&plan)?;
            let checksum = Checksum::of(&result.histograms[0]);
            match reference.iter().find(|(ev, _)| *ev == cell.events) {
                None => reference.push((cell.events, checksum.clone())),
                Some((_, want)) => {
                    if *want != checksum {
                        return Err(internal(format!(
                            "checksum mismatch for {} events: {} vs reference {}",
                            cell.events, checksum, want
                        )));
                    }
                }
            }
            let report = &result.report;
            let seconds = (report.wall_clock_ns as f64 * 1e-9).max(1e-12);
            let mut row = String::new();
            write!(
                row,
                "{},{},{},{},{},{},{},{},{},{:.3},{},{},{},{},{},{},{},{},{}",
                cell.events,
                cell.workers,
                matrix.group_size,
                cell.elements_per_item,
                cell.fused,
                cell.transfer.name(),
                matrix.bulk_capacity,
                rep,
                report.wall_clock_ns,
                result.events_processed as f64 / 1e6 / seconds,
                report.fill.total_ns,
                report.reduce.total_ns,
                report.merge.total_ns,
                report.transfer.total_ns,
                report.setup.total_ns,
                report.io.total_ns,
                report.bytes_transferred,
                f64::from_bits(checksum.content_sum_bits),
                checksum.entries,
            )
            .expect("writing to String cannot fail");
            csv.push_str(&row);
            csv.push('\n');
            rows += 1;
            let path = args
                .out
                .join("reports")
                .join(format!("{}.json", cell.report_stem(&matrix, rep)));
            std::fs::write(&path, report.to_json())
                .map_err(|e| data_error(format!("{}: {e}", path.display())))?;
        }
    }

    let csv_path = args.out.join("sweep.csv");
    std::fs::write(&csv_path, csv)
        .map_err(|e| data_error(format!("{}: {e}", csv_path.display())))?;
    println!("wrote {rows} rows to {}", csv_path.display());
    Ok(())
}
