//! Bulk-columnar histogram filling.
//!
//! This crate fills multidimensional histograms from columnar event data in
//! bulks of tens of thousands of events at a time, using a two-stage
//! worker-pool engine: workers accumulate into private local histograms that
//! are merged deterministically afterwards, and statistics come from
//! transform-reduce passes over the same partitioning. A double-buffered
//! pipeline overlaps dataset reads with processing and accounts every phase
//! (fill, reduce, merge, transfer, setup, io) in a timing report.
//!
//! The crate guarantees reproducibility at two levels: identical results for
//! identical inputs regardless of worker count or chunking wherever sums are
//! exact (bin counts, entry counts, integer-weight sums), and deterministic
//! merge order so any remaining floating-point rounding is stable from run
//! to run.
//!
//! ```
//! use bulkhist::axis::Axis;
//! use bulkhist::data::{generate_uniform, DatasetHandle};
//! use bulkhist::engine::EngineConfig;
//! use bulkhist::histogram::HistogramSpec;
//! use bulkhist::pipeline::{run, RunPlan, TransferStrategy, DEFAULT_BULK_CAPACITY};
//!
//! let xs = generate_uniform(100_000, 42, 0.0, 1.0).unwrap();
//! let source = DatasetHandle::in_memory(vec![("x".into(), xs)]).unwrap();
//! let spec = HistogramSpec::new(
//!     "h",
//!     vec![Axis::fixed(1000, 0.0, 1.0).unwrap()],
//!     vec!["x".into()],
//!     None,
//! )
//! .unwrap();
//! let plan = RunPlan::new(
//!     source,
//!     vec![spec],
//!     EngineConfig::default(),
//!     TransferStrategy::View,
//!     DEFAULT_BULK_CAPACITY,
//! )
//! .unwrap();
//! let result = run(&plan).unwrap();
//! assert_eq!(result.histograms[0].content_sum(), 100_000.0);
//! ```

pub mod axis;
pub mod bulk;
pub mod data;
pub mod engine;
pub mod error;
pub mod histogram;
pub mod pipeline;
pub mod profile;
pub mod stats;

pub use axis::Axis;
pub use bulk::Bulk;
pub use engine::EngineConfig;
pub use error::{Error, Result};
pub use histogram::{HistogramSpec, HistogramState};
pub use pipeline::{run, RunPlan, RunResult, TransferStrategy};
pub use profile::{PhaseCategory, PhaseReport, PhaseTimer};
pub use stats::StatsAccumulator;
