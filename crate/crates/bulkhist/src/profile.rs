//! Phase timing.
//!
//! Runs are broken into named phases; the timer accumulates wall time and a
//! call count per category against a monotonic clock. Nested timing of two
//! different categories is fine, re-entering a category that is already
//! being timed is a usage error.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The phases a run is accounted under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseCategory {
    /// Routing events into bins.
    Fill,
    /// Computing statistics deltas.
    Reduce,
    /// Folding deltas and worker-local results into the running state.
    Merge,
    /// Moving bulk payloads between buffers.
    Transfer,
    /// Allocation and plan preparation.
    Setup,
    /// Reading datasets.
    Io,
}

pub const CATEGORIES: [PhaseCategory; 6] = [
    PhaseCategory::Fill,
    PhaseCategory::Reduce,
    PhaseCategory::Merge,
    PhaseCategory::Transfer,
    PhaseCategory::Setup,
    PhaseCategory::Io,
];

impl PhaseCategory {
    pub fn name(self) -> &'static str {
        match self {
            PhaseCategory::Fill => "fill",
            PhaseCategory::Reduce => "reduce",
            PhaseCategory::Merge => "merge",
            PhaseCategory::Transfer => "transfer",
            PhaseCategory::Setup => "setup",
            PhaseCategory::Io => "io",
        }
    }

    fn index(self) -> usize {
        match self {
            PhaseCategory::Fill => 0,
            PhaseCategory::Reduce => 1,
            PhaseCategory::Merge => 2,
            PhaseCategory::Transfer => 3,
            PhaseCategory::Setup => 4,
            PhaseCategory::Io => 5,
        }
    }
}

/// Accumulated time and call count for one category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStat {
    pub total_ns: u64,
    pub calls: u64,
}

/// The run parameters echoed into a report so a report file is
/// self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub bulk_capacity: usize,
    pub transfer: String,
    pub workers: usize,
    pub group_size: usize,
    pub elements_per_item: usize,
    pub fused_reductions: bool,
    pub deterministic_merge: bool,
    pub actions: Vec<String>,
}

/// A finished timing report.
///
/// Field order is the JSON key order; all durations are integer nanoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub fill: PhaseStat,
    pub reduce: PhaseStat,
    pub merge: PhaseStat,
    pub transfer: PhaseStat,
    pub setup: PhaseStat,
    pub io: PhaseStat,
    pub wall_clock_ns: u64,
    pub bytes_transferred: u64,
    pub config: Option<ConfigEcho>,
}

impl PhaseReport {
    pub fn category(&self, cat: PhaseCategory) -> &PhaseStat {
        match cat {
            PhaseCategory::Fill => &self.fill,
            PhaseCategory::Reduce => &self.reduce,
            PhaseCategory::Merge => &self.merge,
            PhaseCategory::Transfer => &self.transfer,
            PhaseCategory::Setup => &self.setup,
            PhaseCategory::Io => &self.io,
        }
    }

    /// Sum of all per-category totals. Phases never overlap within a thread,
    /// so each category total is bounded by `wall_clock_ns`.
    pub fn categories_total_ns(&self) -> u64 {
        CATEGORIES.iter().map(|&c| self.category(c).total_ns).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<PhaseReport> {
        serde_json::from_str(text).map_err(|e| Error::format(format!("bad report JSON: {e}")))
    }

    /// One row per category: `category,total_ns,calls`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,total_ns,calls\n");
        for &cat in &CATEGORIES {
            let s = self.category(cat);
            out.push_str(&format!("{},{},{}\n", cat.name(), s.total_ns, s.calls));
        }
        out
    }
}

/// Proof that a phase was started; hand it back to [`PhaseTimer::end`].
#[derive(Debug)]
#[must_use = "an unfinished phase scope records no time"]
pub struct PhaseScope {
    category: PhaseCategory,
    start: Instant,
}

/// Accumulates phase timings during a run.
#[derive(Debug, Default)]
pub struct PhaseTimer {
    stats: [PhaseStat; 6],
    active: [bool; 6],
    bytes_transferred: u64,
}

impl PhaseTimer {
    pub fn new() -> PhaseTimer {
        PhaseTimer::default()
    }

    /// Start timing a category. Errors if that category is already open.
    pub fn begin(&mut self, category: PhaseCategory) -> Result<PhaseScope> {
        let idx = category.index();
        if self.active[idx] {
            return Err(Error::PhaseActive(category.name()));
        }
        self.active[idx] = true;
        Ok(PhaseScope {
            category,
            start: Instant::now(),
        })
    }

    /// Close a phase: adds the elapsed time and one call.
    pub fn end(&mut self, scope: PhaseScope) {
        let elapsed = scope.start.elapsed();
        let idx = scope.category.index();
        self.active[idx] = false;
        self.stats[idx].total_ns += duration_ns(elapsed);
        self.stats[idx].calls += 1;
    }

    /// Run `work` under the given category.
    pub fn time<R>(&mut self, category: PhaseCategory, work: impl FnOnce() -> R) -> Result<R> {
        let scope = self.begin(category)?;
        let result = work();
        self.end(scope);
        Ok(result)
    }

    /// Account transferred payload bytes.
    pub fn add_bytes(&mut self, bytes: u64) {
        self.bytes_transferred += bytes;
    }

    pub fn bytes_transferred(&self) -> u64 {
        self.bytes_transferred
    }

    /// Fold another timer's counts into this one (per-category totals, call
    /// counts, and bytes all add). Used to combine per-thread timers.
    pub fn absorb(&mut self, other: &PhaseTimer) {
        for (s, o) in self.stats.iter_mut().zip(&other.stats) {
            s.total_ns += o.total_ns;
            s.calls += o.calls;
        }
        self.bytes_transferred += other.bytes_transferred;
    }

    /// Snapshot of one category's running totals.
    pub fn stat(&self, category: PhaseCategory) -> PhaseStat {
        self.stats[category.index()]
    }

    /// Produce the final report.
    pub fn finish(&self, wall_clock: Duration, config: Option<ConfigEcho>) -> PhaseReport {
        PhaseReport {
            fill: self.stats[0],
            reduce: self.stats[1],
            merge: self.stats[2],
            transfer: self.stats[3],
            setup: self.stats[4],
            io: self.stats[5],
            wall_clock_ns: duration_ns(wall_clock),
            bytes_transferred: self.bytes_transferred,
            config,
        }
    }
}

fn duration_ns(d: Duration) -> u64 {
    u64::try_from(d.as_nanos()).unwrap_or(u64::MAX)
}
