//! The bulk-processing pipeline.
//!
//! A run streams a dataset through a small ring of reusable bulk buffers and
//! drives every histogram action over each bulk: fill the bin contents,
//! reduce the statistics delta, combine it into the running state. In
//! pipelined mode the reader and the engine run on separate threads sharing
//! two buffers, so the next bulk is read while the current one is processed.
//!
//! Reusing buffers is only sound if a buffer is never refilled while the
//! engine still works on it. The reader therefore waits for the engine's
//! completion receipt per buffer before overwriting it, and every refill
//! stamps a fresh generation that the engine verifies against the one it was
//! dispatched. `enforce_completion: false` switches the receipt wait off to
//! reproduce the overwrite failure on purpose; the generation monitor then
//! counts the resulting mismatches instead of the run corrupting silently.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crate::bulk::Bulk;
use crate::data::{BulkReader, DatasetHandle};
use crate::engine::{self, EngineConfig};
use crate::error::{Error, Result};
use crate::histogram::{HistogramSpec, HistogramState};
use crate::profile::{ConfigEcho, PhaseCategory, PhaseReport, PhaseTimer};

/// Buffers in the ring. Two is enough to overlap one read with one process.
pub const PIPELINE_BUFFERS: usize = 2;

/// How bulk payloads reach the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferStrategy {
    /// Copy each bulk into an engine-owned staging buffer. Costs one copy,
    /// frees the source buffer as soon as the copy is done.
    Staged,
    /// Process the shared buffer in place. Zero-copy; the buffer stays busy
    /// until processing finishes.
    View,
}

impl TransferStrategy {
    pub fn name(self) -> &'static str {
        match self {
            TransferStrategy::Staged => "staged",
            TransferStrategy::View => "view",
        }
    }
}

/// Everything a run needs: data source, actions, engine shape, transfer
/// strategy, and bulk size.
pub struct RunPlan {
    source: DatasetHandle,
    actions: Vec<HistogramSpec>,
    engine: EngineConfig,
    transfer: TransferStrategy,
    bulk_capacity: usize,
}

/// Default events per bulk.
pub const DEFAULT_BULK_CAPACITY: usize = 32768;

impl RunPlan {
    pub fn new(
        source: DatasetHandle,
        actions: Vec<HistogramSpec>,
        engine: EngineConfig,
        transfer: TransferStrategy,
        bulk_capacity: usize,
    ) -> Result<RunPlan> {
        if actions.is_empty() {
            return Err(Error::invalid_config("a run needs at least one action"));
        }
        if bulk_capacity == 0 {
            return Err(Error::invalid_config("bulk capacity must be at least 1"));
        }
        let mut names = std::collections::HashSet::new();
        for action in &actions {
            if !names.insert(action.name()) {
                return Err(Error::invalid_config(format!(
                    "duplicate action name '{}'",
                    action.name()
                )));
            }
            for col in action.input_columns() {
                if !source.has_column(col) {
                    return Err(Error::UnknownColumn(col.to_string()));
                }
            }
        }
        Ok(RunPlan {
            source,
            actions,
            engine,
            transfer,
            bulk_capacity,
        })
    }

    pub fn source(&self) -> &DatasetHandle {
        &self.source
    }

    pub fn actions(&self) -> &[HistogramSpec] {
        &self.actions
    }

    pub fn engine(&self) -> &EngineConfig {
        &self.engine
    }

    pub fn transfer(&self) -> TransferStrategy {
        self.transfer
    }

    pub fn bulk_capacity(&self) -> usize {
        self.bulk_capacity
    }

    /// Union of all columns the actions read, first use first, no
    /// duplicates. One pass over the data serves every action.
    pub fn column_set(&self) -> Vec<String> {
        let mut cols: Vec<String> = Vec::new();
        for action in &self.actions {
            for c in action.input_columns() {
                if !cols.iter().any(|have| have == c) {
                    cols.push(c.to_string());
                }
            }
        }
        cols
    }

    fn config_echo(&self) -> ConfigEcho {
        ConfigEcho {
            bulk_capacity: self.bulk_capacity,
            transfer: self.transfer.name().to_string(),
            workers: self.engine.workers.get(),
            group_size: self.engine.group_size.get(),
            elements_per_item: self.engine.elements_per_item.get(),
            fused_reductions: self.engine.fused_reductions,
            deterministic_merge: self.engine.deterministic_merge,
            actions: self.actions.iter().map(|a| a.name().to_string()).collect(),
        }
    }
}

/// A completed run.
pub struct RunResult {
    /// One state per action, in plan order.
    pub histograms: Vec<HistogramState>,
    pub report: PhaseReport,
    /// Total events filled; equals the source event count.
    pub events_processed: u64,
    /// Bulks streamed: `ceil(events / bulk_capacity)`.
    pub bulks_processed: u64,
}

impl fmt::Debug for RunResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RunResult")
            .field(
                "histograms",
                &self
                    .histograms
                    .iter()
                    .map(|h| h.spec().name())
                    .collect::<Vec<_>>(),
            )
            .field("events_processed", &self.events_processed)
            .field("bulks_processed", &self.bulks_processed)
            .field("wall_clock_ns", &self.report.wall_clock_ns)
            .finish()
    }
}

/// A failed run, carrying the phase report accumulated up to the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub report: PhaseReport,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run failed: {}", self.error)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Error {
        f.error
    }
}

/// Counts buffer-generation verifications. Zero mismatches means no buffer
/// was ever observed in a different refill state than dispatched.
#[derive(Debug, Default)]
pub struct GenerationMonitor {
    checks: AtomicU64,
    mismatches: AtomicU64,
}

impl GenerationMonitor {
    pub fn new() -> GenerationMonitor {
        GenerationMonitor::default()
    }

    pub fn record(&self, dispatched: u64, observed: u64) {
        self.checks.fetch_add(1, Ordering::Relaxed);
        if dispatched != observed {
            self.mismatches.fetch_add(1, Ordering::Relaxed);
        }
    }

    /// Verification points passed; at least one per bulk processed.
    pub fn checks(&self) -> u64 {
        self.checks.load(Ordering::Relaxed)
    }

    pub fn mismatches(&self) -> u64 {
        self.mismatches.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    /// Read and process on one thread; the reference behavior.
    Synchronous,
    /// Overlap reading and processing across two threads.
    Pipelined,
}

/// Knobs for [`run_with_options`]; [`Default`] is the production setup.
#[derive(Clone)]
pub struct RunOptions {
    pub mode: ExecutionMode,
    /// Wait for the engine's completion receipt before refilling a buffer.
    /// Turning this off deliberately reproduces the refill-while-busy
    /// overwrite so tests can observe it; never disable it for real work.
    pub enforce_completion: bool,
    /// Combine per-bulk statistics deltas by overwriting instead of adding,
    /// leaving only the last bulk's statistics. A demonstration mode for the
    /// reduce-initialization pitfall; bin contents are unaffected.
    pub initialize_to_identity: bool,
    /// Test hook: stall the engine this long before it touches each bulk,
    /// widening the window in which an unsafe refill can overtake it.
    pub engine_delay: Option<Duration>,
    /// Receives one record per generation verification.
    pub monitor: Option<Arc<GenerationMonitor>>,
}

impl Default for RunOptions {
    fn default() -> RunOptions {
        RunOptions {
            mode: ExecutionMode::Pipelined,
            enforce_completion: true,
            initialize_to_identity: false,
            engine_delay: None,
            monitor: None,
        }
    }
}

/// Pull the next bulk into `buffer` and stamp a new generation.
/// Returns `false` at end of stream.
pub fn acquire_bulk(reader: &mut BulkReader, buffer: &mut Bulk) -> Result<bool> {
    let more = reader.read_into(buffer)?;
    if more {
        buffer.bump_generation();
    }
    Ok(more)
}

/// Hand a bulk to the processing side under the given strategy.
///
/// `Staged` copies the payload into `staging` (timed, and its bytes are
/// accounted) and returns the staging buffer; `View` returns the source
/// buffer itself, with a timed zero-byte transfer so call counts stay
/// comparable across strategies.
pub fn transfer_bulk<'a>(
    src: &'a Bulk,
    staging: &'a mut Bulk,
    strategy: TransferStrategy,
    timer: &mut PhaseTimer,
) -> Result<&'a Bulk> {
    match strategy {
        TransferStrategy::Staged => {
            timer.time(PhaseCategory::Transfer, || staging.copy_from(src))??;
            timer.add_bytes(staging.payload_bytes());
            Ok(staging)
        }
        TransferStrategy::View => {
            timer.time(PhaseCategory::Transfer, || ())?;
            Ok(src)
        }
    }
}

/// Run every action over one bulk: fill, reduce, combine.
fn process_bulk(
    states: &mut [HistogramState],
    bulk: &Bulk,
    cfg: &EngineConfig,
    initialize_to_identity: bool,
    timer: &mut PhaseTimer,
) -> Result<()> {
    for state in states {
        timer.time(PhaseCategory::Fill, || {
            engine::fill_bulk_contents(state, bulk, cfg)
        })??;
        let delta = timer.time(PhaseCategory::Reduce, || {
            engine::reduce_stats_bulk(bulk, state.spec(), cfg)
        })??;
        timer.time(PhaseCategory::Merge, || {
            engine::combine_stats(state.stats_mut(), &delta, initialize_to_identity)
        })?;
    }
    Ok(())
}

/// Execute a plan with default options (pipelined, receipts enforced).
pub fn run(plan: &RunPlan) -> Result<RunResult, RunFailure> {
    run_with_options(plan, &RunOptions::default())
}

/// Execute a plan. On failure the error is returned together with the phase
/// report accumulated so far.
pub fn run_with_options(plan: &RunPlan, options: &RunOptions) -> Result<RunResult, RunFailure> {
    let started = Instant::now();
    let mut timer = PhaseTimer::new();
    let outcome = match options.mode {
        ExecutionMode::Synchronous => execute_sync(plan, options, &mut timer),
        ExecutionMode::Pipelined => execute_pipelined(plan, options, &mut timer),
    };
    let report = timer.finish(started.elapsed(), Some(plan.config_echo()));
    match outcome {
        Ok((histograms, events_processed, bulks_processed)) => Ok(RunResult {
            histograms,
            report,
            events_processed,
            bulks_processed,
        }),
        Err(error) => Err(RunFailure { error, report }),
    }
}

type RunOutcome = Result<(Vec<HistogramState>, u64, u64)>;

fn execute_sync(plan: &RunPlan, options: &RunOptions, timer: &mut PhaseTimer) -> RunOutcome {
    let (mut states, mut reader, mut buffer, mut staging) =
        timer.time(PhaseCategory::Setup, || -> Result<_> {
            let columns = plan.column_set();
            let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
            let reader = plan.source.bulk_reader(&column_refs, plan.bulk_capacity)?;
            let states: Vec<HistogramState> = plan
                .actions
                .iter()
                .cloned()
                .map(HistogramState::new)
                .collect();
            let buffer = reader.make_bulk();
            let staging = reader.make_bulk();
            Ok((states, reader, buffer, staging))
        })??;

    let mut events = 0u64;
    let mut bulks = 0u64;
    loop {
        let more = timer.time(PhaseCategory::Io, || acquire_bulk(&mut reader, &mut buffer))??;
        if !more {
            break;
        }
        let dispatched = buffer.generation();
        let visible = transfer_bulk(&buffer, &mut staging, plan.transfer, timer)?;
        if let Some(m) = &options.monitor {
            m.record(dispatched, visible.generation());
        }
        process_bulk(
            &mut states,
            visible,
            &plan.engine,
            options.initialize_to_identity,
            timer,
        )?;
        events += visible.len() as u64;
        bulks += 1;
    }
    Ok((states, events, bulks))
}

struct WorkItem {
    slot: usize,
    /// Generation of the buffer at dispatch; the engine verifies the buffer
    /// still carries it when the work actually runs.
    generation: u64,
}

fn execute_pipelined(plan: &RunPlan, options: &RunOptions, timer: &mut PhaseTimer) -> RunOutcome {
    let (mut reader, slots) = timer.time(PhaseCategory::Setup, || -> Result<_> {
        let columns = plan.column_set();
        let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
        let reader = plan.source.bulk_reader(&column_refs, plan.bulk_capacity)?;
        let slots: Vec<Arc<Mutex<Bulk>>> = (0..PIPELINE_BUFFERS)
            .map(|_| Arc::new(Mutex::new(reader.make_bulk())))
            .collect();
        Ok((reader, slots))
    })??;

    let (work_tx, work_rx) = mpsc::channel::<WorkItem>();
    let mut ack_txs = Vec::with_capacity(PIPELINE_BUFFERS);
    let mut ack_rxs = Vec::with_capacity(PIPELINE_BUFFERS);
    for _ in 0..PIPELINE_BUFFERS {
        let (tx, rx) = mpsc::channel::<()>();
        ack_txs.push(tx);
        ack_rxs.push(rx);
    }

    let engine_ctx = EngineThread {
        work_rx,
        slots: slots.clone(),
        acks: ack_txs,
        specs: plan.actions.to_vec(),
        columns: plan.column_set(),
        capacity: plan.bulk_capacity,
        engine: plan.engine.clone(),
        transfer: plan.transfer,
        initialize_to_identity: options.initialize_to_identity,
        delay: options.engine_delay,
        monitor: options.monitor.clone(),
    };
    let engine_handle = thread::Builder::new()
        .name("bulkhist-engine".into())
        .spawn(move || engine_ctx.run())
        .expect("spawning the engine thread");

    let mut in_flight = [false; PIPELINE_BUFFERS];
    let mut events = 0u64;
    let mut bulks = 0u64;
    let mut read_error: Option<Error> = None;

    loop {
        let slot = (bulks as usize) % PIPELINE_BUFFERS;
        if in_flight[slot] {
            if options.enforce_completion {
                // Receipt wait: the buffer may only be refilled once the
                // engine confirmed it is done with it. A closed channel
                // means the engine exited; its error surfaces after join.
                if ack_rxs[slot].recv().is_err() {
                    break;
                }
            } else {
                // Unsafe mode: drain receipts without waiting and refill
                // regardless of whether the engine is still reading.
                while ack_rxs[slot].try_recv().is_ok() {}
            }
            in_flight[slot] = false;
        }

        let generation;
        {
            let mut guard = slots[slot].lock().unwrap();
            let more = match timer.time(PhaseCategory::Io, || acquire_bulk(&mut reader, &mut guard))
            {
                Ok(Ok(more)) => more,
                Ok(Err(e)) | Err(e) => {
                    read_error = Some(e);
                    break;
                }
            };
            if !more {
                break;
            }
            generation = guard.generation();
            events += guard.len() as u64;
        }
        if work_tx
            .send(WorkItem { slot, generation })
            .is_err()
        {
            // Engine gone; find out why after join.
            break;
        }
        in_flight[slot] = true;
        bulks += 1;
    }
    drop(work_tx);

    let (states, engine_timer, engine_result) = engine_handle
        .join()
        .unwrap_or_else(|panic| std::panic::resume_unwind(panic));
    timer.absorb(&engine_timer);

    if let Some(e) = read_error {
        return Err(e);
    }
    engine_result?;
    Ok((states, events, bulks))
}

struct EngineThread {
    work_rx: Receiver<WorkItem>,
    slots: Vec<Arc<Mutex<Bulk>>>,
    acks: Vec<Sender<()>>,
    specs: Vec<HistogramSpec>,
    columns: Vec<String>,
    capacity: usize,
    engine: EngineConfig,
    transfer: TransferStrategy,
    initialize_to_identity: bool,
    delay: Option<Duration>,
    monitor: Option<Arc<GenerationMonitor>>,
}

impl EngineThread {
    fn run(self) -> (Vec<HistogramState>, PhaseTimer, Result<()>) {
        let mut timer = PhaseTimer::new();
        let mut states: Vec<HistogramState> = self
            .specs
            .iter()
            .cloned()
            .map(HistogramState::new)
            .collect();
        let mut staging = {
            let names: Vec<&str> = self.columns.iter().map(String::as_str).collect();
            match timer.time(PhaseCategory::Setup, || {
                Bulk::with_capacity(self.capacity, &names)
            }) {
                Ok(b) => b,
                Err(e) => return (states, timer, Err(e)),
            }
        };

        let mut failure: Option<Error> = None;
        for item in &self.work_rx {
            if let Some(d) = self.delay {
                thread::sleep(d);
            }
            let step = (|| -> Result<()> {
                let guard = self.slots[item.slot].lock().unwrap();
                if let Some(m) = &self.monitor {
                    m.record(item.generation, guard.generation());
                }
                match self.transfer {
                    TransferStrategy::Staged => {
                        timer.time(PhaseCategory::Transfer, || staging.copy_from(&guard))??;
                        timer.add_bytes(staging.payload_bytes());
                        // The copy is done; release the buffer to the reader
                        // before the heavy work starts.
                        drop(guard);
                        let _ = self.acks[item.slot].send(());
                        process_bulk(
                            &mut states,
                            &staging,
                            &self.engine,
                            self.initialize_to_identity,
                            &mut timer,
                        )?;
                    }
                    TransferStrategy::View => {
                        timer.time(PhaseCategory::Transfer, || ())?;
                        process_bulk(
                            &mut states,
                            &guard,
                            &self.engine,
                            self.initialize_to_identity,
                            &mut timer,
                        )?;
                        // Processing read the buffer in place; verify it was
                        // not refilled in the meantime before releasing it.
                        if let Some(m) = &self.monitor {
                            m.record(item.generation, guard.generation());
                        }
                        drop(guard);
                        let _ = self.acks[item.slot].send(());
                    }
                }
                Ok(())
            })();
            if let Err(e) = step {
                failure = Some(e);
                break;
            }
        }
        (states, timer, failure.map_or(Ok(()), Err))
    }
}
