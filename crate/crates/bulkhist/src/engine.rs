//! Bulk fill and reduction engine.
//!
//! Fills run in two stages: every worker accumulates into a private local
//! histogram, and the locals are merged into the shared state afterwards.
//! Workers never write to shared bins during the fill, so the merge is the
//! only place where ordering matters; with `deterministic_merge` the locals
//! are folded in ascending worker index, making the result independent of
//! scheduling.
//!
//! Statistics are computed by a transform-reduce over the same partitioning,
//! either fused (one pass accumulating every moment sum) or as separate
//! passes per sum. Both modes add the same terms in the same order per field,
//! so they produce bitwise-identical deltas.

use std::num::NonZeroUsize;
use std::ops::Range;
use std::sync::Mutex;
use std::thread;

use crate::bulk::Bulk;
use crate::error::{Error, Result};
use crate::histogram::{HistogramSpec, HistogramState};
use crate::stats::StatsAccumulator;

/// A reduction result covering one bulk, combined into the running
/// statistics by [`combine_stats`].
pub type StatsDelta = StatsAccumulator;

/// Worker-pool shape and reduction strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Worker threads for fills and reductions.
    pub workers: NonZeroUsize,
    /// Items per worker group; with `elements_per_item` this sets the chunk
    /// size `group_size * elements_per_item` dealt round-robin to workers.
    pub group_size: NonZeroUsize,
    /// Consecutive events each item processes. Larger values mean fewer,
    /// larger chunks.
    pub elements_per_item: NonZeroUsize,
    /// Accumulate all moment sums in one pass instead of one pass per sum.
    pub fused_reductions: bool,
    /// Merge worker-local results in ascending worker index. Turning this
    /// off merges in completion order; contents then still conserve weight
    /// but floating-point rounding may differ from run to run.
    pub deterministic_merge: bool,
}

impl Default for EngineConfig {
    fn default() -> EngineConfig {
        let workers = thread::available_parallelism().unwrap_or(NonZeroUsize::MIN);
        EngineConfig {
            workers,
            group_size: NonZeroUsize::new(256).unwrap(),
            elements_per_item: NonZeroUsize::new(2).unwrap(),
            fused_reductions: true,
            deterministic_merge: true,
        }
    }
}

impl EngineConfig {
    /// Single worker; processes events in order, matching the sequential
    /// fill bit for bit.
    pub fn serial() -> EngineConfig {
        EngineConfig {
            workers: NonZeroUsize::MIN,
            ..EngineConfig::default()
        }
    }
}

// ============================================================================
// work partitioning
// ============================================================================

/// Deals `0..len` out as contiguous chunks of `group_size * elements_per_item`
/// events, chunk `c` going to worker `c % workers`. Every index is covered
/// exactly once; each worker visits its chunks in ascending order.
#[derive(Debug, Clone, Copy)]
struct ChunkPlan {
    len: usize,
    chunk: usize,
    workers: usize,
}

impl ChunkPlan {
    fn new(len: usize, cfg: &EngineConfig) -> ChunkPlan {
        let chunk = cfg.group_size.get() * cfg.elements_per_item.get();
        let num_chunks = len.div_ceil(chunk);
        // More workers than chunks would only spawn idle threads.
        let workers = cfg.workers.get().min(num_chunks).max(1);
        ChunkPlan { len, chunk, workers }
    }

    fn num_chunks(&self) -> usize {
        self.len.div_ceil(self.chunk)
    }

    fn ranges(&self, worker: usize) -> impl Iterator<Item = Range<usize>> + '_ {
        let chunk = self.chunk;
        let len = self.len;
        (worker..self.num_chunks())
            .step_by(self.workers)
            .map(move |c| c * chunk..((c + 1) * chunk).min(len))
    }
}

// ============================================================================
// column access
// ============================================================================

struct BulkView<'a> {
    coords: Vec<&'a [f64]>,
    weights: Option<&'a [f64]>,
}

impl<'a> BulkView<'a> {
    fn resolve(bulk: &'a Bulk, spec: &HistogramSpec) -> Result<BulkView<'a>> {
        let coords = spec
            .coord_columns()
            .iter()
            .map(|c| bulk.require_column(c))
            .collect::<Result<Vec<_>>>()?;
        let weights = spec
            .weight_column()
            .map(|c| bulk.require_column(c))
            .transpose()?;
        Ok(BulkView { coords, weights })
    }

    /// Reject non-finite values up front so the hot loops below cannot fail
    /// half-way through and leave a partially updated histogram.
    fn validate_finite(&self, spec: &HistogramSpec) -> Result<()> {
        for (col, name) in self.coords.iter().zip(spec.coord_columns()) {
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid_input(format!(
                    "column '{name}' has non-finite value {} at event {i}",
                    col[i]
                )));
            }
        }
        if let (Some(w), Some(name)) = (self.weights, spec.weight_column()) {
            if let Some(i) = w.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid_input(format!(
                    "column '{name}' has non-finite value {} at event {i}",
                    w[i]
                )));
            }
        }
        Ok(())
    }

    #[inline]
    fn weight(&self, i: usize) -> f64 {
        match self.weights {
            Some(w) => w[i],
            None => 1.0,
        }
    }
}

// ============================================================================
// fill
// ============================================================================

/// Reference fill: one entry at a time, in event order.
pub fn fill_bulk_sequential(state: &mut HistogramState, bulk: &Bulk) -> Result<()> {
    let view = BulkView::resolve(bulk, state.spec())?;
    view.validate_finite(state.spec())?;
    let mut coords = vec![0.0; state.spec().dim()];
    for i in 0..bulk.len() {
        for (c, col) in coords.iter_mut().zip(&view.coords) {
            *c = col[i];
        }
        let w = view.weight(i);
        state.fill(&coords, w)?;
    }
    Ok(())
}

/// Two-stage parallel fill of bin contents only; statistics are untouched.
/// This is the per-bulk fill step of the pipeline, which obtains statistics
/// from [`reduce_stats_bulk`] over the same bulk.
pub fn fill_bulk_contents(
    state: &mut HistogramState,
    bulk: &Bulk,
    cfg: &EngineConfig,
) -> Result<()> {
    let view = BulkView::resolve(bulk, state.spec())?;
    view.validate_finite(state.spec())?;
    if bulk.is_empty() {
        return Ok(());
    }
    let plan = ChunkPlan::new(bulk.len(), cfg);
    let spec = state.spec().clone();
    let total_bins = spec.total_bins();

    // Stage one: each worker fills a private local histogram.
    let fill_local = |worker: usize| -> Vec<f64> {
        let mut local = vec![0.0; total_bins];
        for range in plan.ranges(worker) {
            for i in range {
                let mut flat = 0;
                let mut stride = 1;
                for (col, axis) in view.coords.iter().zip(spec.axes()) {
                    // Cannot fail: inputs were validated finite above.
                    let bin = axis.find_bin(col[i]).expect("validated finite");
                    flat += bin * stride;
                    stride *= axis.total_bins();
                }
                local[flat] += view.weight(i);
            }
        }
        local
    };

    // Stage two: merge the locals into the shared contents.
    if plan.workers == 1 {
        let local = fill_local(0);
        add_into(state.contents_mut(), &local);
    } else if cfg.deterministic_merge {
        let locals = run_workers(plan.workers, &fill_local);
        for local in &locals {
            add_into(state.contents_mut(), local);
        }
    } else {
        let shared = Mutex::new(state.contents_mut());
        thread::scope(|s| {
            for w in 0..plan.workers {
                let fill_local = &fill_local;
                let shared = &shared;
                s.spawn(move || {
                    let local = fill_local(w);
                    add_into(&mut shared.lock().unwrap(), &local);
                });
            }
        });
    }
    Ok(())
}

/// Full parallel fill: contents plus statistics. Composition of
/// [`fill_bulk_contents`], [`reduce_stats_bulk`], and [`combine_stats`].
pub fn fill_bulk_parallel(
    state: &mut HistogramState,
    bulk: &Bulk,
    cfg: &EngineConfig,
) -> Result<()> {
    fill_bulk_contents(state, bulk, cfg)?;
    let delta = reduce_stats_bulk(bulk, state.spec(), cfg)?;
    combine_stats(state.stats_mut(), &delta, false);
    Ok(())
}

fn add_into(acc: &mut [f64], local: &[f64]) {
    for (a, l) in acc.iter_mut().zip(local) {
        *a += l;
    }
}

/// Spawn `workers` scoped threads and collect their results in worker order.
fn run_workers<T: Send>(workers: usize, work: &(impl Fn(usize) -> T + Sync)) -> Vec<T> {
    thread::scope(|s| {
        let handles: Vec<_> = (0..workers).map(|w| s.spawn(move || work(w))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
            .collect()
    })
}

// ============================================================================
// reduce
// ============================================================================

/// Compute the statistics delta for one bulk.
///
/// Every event is counted in the delta's entry count; only events whose
/// coordinates are in range on every axis contribute to the moment sums.
/// Fused and separate modes are bitwise-identical because each field sees
/// the same terms in the same order either way.
pub fn reduce_stats_bulk(
    bulk: &Bulk,
    spec: &HistogramSpec,
    cfg: &EngineConfig,
) -> Result<StatsDelta> {
    let view = BulkView::resolve(bulk, spec)?;
    view.validate_finite(spec)?;
    let dim = spec.dim();
    let mut delta = StatsAccumulator::new(dim);
    delta.add_entries(bulk.len() as u64);
    if bulk.is_empty() {
        return Ok(delta);
    }
    let plan = ChunkPlan::new(bulk.len(), cfg);

    let in_range = |i: usize| -> bool {
        view.coords
            .iter()
            .zip(spec.axes())
            .all(|(col, axis)| axis.in_range(col[i]))
    };

    if cfg.fused_reductions {
        let reduce_local = |worker: usize| -> StatsAccumulator {
            let mut local = StatsAccumulator::new(dim);
            let mut coords = vec![0.0; dim];
            for range in plan.ranges(worker) {
                for i in range {
                    if !in_range(i) {
                        continue;
                    }
                    for (c, col) in coords.iter_mut().zip(&view.coords) {
                        *c = col[i];
                    }
                    local.accumulate(&coords, view.weight(i));
                }
            }
            local
        };
        let partials = if plan.workers == 1 {
            vec![reduce_local(0)]
        } else {
            run_workers(plan.workers, &reduce_local)
        };
        for p in &partials {
            delta.add(p);
        }
    } else {
        // One pass per moment sum. The per-event expressions mirror
        // StatsAccumulator::accumulate exactly; keep them in sync.
        let mut sumwx = vec![0.0; dim];
        let mut sumwx2 = vec![0.0; dim];
        let mut sumwxy = Vec::new();
        let sumw = reduce_field(&plan, &|i| view.weight(i), &in_range);
        let sumw2 = reduce_field(
            &plan,
            &|i| {
                let w = view.weight(i);
                w * w
            },
            &in_range,
        );
        for a in 0..dim {
            let col = view.coords[a];
            sumwx[a] = reduce_field(&plan, &|i| view.weight(i) * col[i], &in_range);
            sumwx2[a] = reduce_field(&plan, &|i| view.weight(i) * col[i] * col[i], &in_range);
        }
        for a in 0..dim {
            for b in (a + 1)..dim {
                let (ca, cb) = (view.coords[a], view.coords[b]);
                sumwxy.push(reduce_field(
                    &plan,
                    &|i| view.weight(i) * ca[i] * cb[i],
                    &in_range,
                ));
            }
        }
        delta.set_sums(sumw, sumw2, sumwx, sumwx2, sumwxy);
    }
    Ok(delta)
}

/// One transform-reduce pass: sum `term(i)` over in-range events, worker
/// partials merged in worker order.
fn reduce_field(
    plan: &ChunkPlan,
    term: &(impl Fn(usize) -> f64 + Sync),
    in_range: &(impl Fn(usize) -> bool + Sync),
) -> f64 {
    let local = |worker: usize| -> f64 {
        let mut acc = 0.0;
        for range in plan.ranges(worker) {
            for i in range {
                if in_range(i) {
                    acc += term(i);
                }
            }
        }
        acc
    };
    let partials = if plan.workers == 1 {
        vec![local(0)]
    } else {
        run_workers(plan.workers, &local)
    };
    partials.into_iter().sum()
}

/// Fold a per-bulk delta into the running statistics.
///
/// With `initialize_to_identity` the accumulator is overwritten instead of
/// added to, as if each combine started from a fresh identity; running a
/// multi-bulk job that way keeps only the last bulk's statistics. It exists
/// so that tests and benchmarks can demonstrate the failure mode; production
/// paths always pass `false`.
pub fn combine_stats(acc: &mut StatsAccumulator, delta: &StatsDelta, initialize_to_identity: bool) {
    assert_eq!(acc.dim(), delta.dim(), "accumulator dimension mismatch");
    if initialize_to_identity {
        *acc = delta.clone();
    } else {
        acc.add(delta);
    }
}

// ============================================================================
// tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axis::Axis;
    use proptest::prelude::*;

    fn spec_1d(nbins: usize, weighted: bool) -> HistogramSpec {
        HistogramSpec::new(
            "h",
            vec![Axis::fixed(nbins, 0.0, 1.0).unwrap()],
            vec!["x".into()],
            weighted.then(|| "w".to_string()),
        )
        .unwrap()
    }

    fn cfg(workers: usize, epi: usize) -> EngineConfig {
        EngineConfig {
            workers: NonZeroUsize::new(workers).unwrap(),
            elements_per_item: NonZeroUsize::new(epi).unwrap(),
            ..EngineConfig::default()
        }
    }

    fn bits(xs: &[f64]) -> Vec<u64> {
        xs.iter().map(|x| x.to_bits()).collect()
    }

    fn stats_bits(s: &StatsAccumulator) -> Vec<u64> {
        let mut v = vec![s.sumw().to_bits(), s.sumw2().to_bits()];
        for a in 0..s.dim() {
            v.push(s.sumwx(a).to_bits());
            v.push(s.sumwx2(a).to_bits());
        }
        for a in 0..s.dim() {
            for b in (a + 1)..s.dim() {
                v.push(s.sumwxy(a, b).to_bits());
            }
        }
        v
    }

    #[test]
    fn chunk_plan_covers_every_index_once() {
        for (len, group, epi, workers) in [
            (0usize, 4usize, 1usize, 3usize),
            (1, 4, 1, 3),
            (17, 2, 2, 3),
            (100, 8, 2, 4),
            (100, 256, 2, 4),
            (12345, 16, 4, 7),
        ] {
            let plan = ChunkPlan::new(
                len,
                &EngineConfig {
                    workers: NonZeroUsize::new(workers).unwrap(),
                    group_size: NonZeroUsize::new(group).unwrap(),
                    elements_per_item: NonZeroUsize::new(epi).unwrap(),
                    ..EngineConfig::default()
                },
            );
            let mut seen = vec![0u32; len];
            for w in 0..plan.workers {
                let mut prev_end = None;
                for r in plan.ranges(w) {
                    // Chunks arrive in ascending order within a worker.
                    if let Some(e) = prev_end {
                        assert!(r.start >= e);
                    }
                    prev_end = Some(r.end);
                    for i in r {
                        seen[i] += 1;
                    }
                }
            }
            assert!(seen.iter().all(|&c| c == 1), "len={len} group={group}");
        }
    }

    #[test]
    fn sequential_fill_matches_single_entry_loop() {
        let bulk = Bulk::from_columns(vec![
            ("x".into(), vec![0.5, 0.5, -1.0]),
            ("w".into(), vec![1.0, 2.0, 1.0]),
        ])
        .unwrap();
        let mut state = HistogramState::new(spec_1d(1000, true));
        fill_bulk_sequential(&mut state, &bulk).unwrap();
        assert_eq!(state.contents()[501], 3.0);
        assert_eq!(state.contents()[0], 1.0);
        assert_eq!(state.stats().sumw(), 3.0);
        assert_eq!(state.stats().n_entries(), 3);

        let mut oracle = HistogramState::new(spec_1d(1000, true));
        for (x, w) in [(0.5, 1.0), (0.5, 2.0), (-1.0, 1.0)] {
            oracle.fill(&[x], w).unwrap();
        }
        assert_eq!(state, oracle);
    }

    #[test]
    fn empty_bulk_is_a_no_op() {
        let bulk = Bulk::from_columns(vec![("x".into(), vec![])]).unwrap();
        let mut state = HistogramState::new(spec_1d(10, false));
        let fresh = state.clone();
        fill_bulk_sequential(&mut state, &bulk).unwrap();
        fill_bulk_parallel(&mut state, &bulk, &cfg(4, 2)).unwrap();
        assert_eq!(state, fresh);
        let delta = reduce_stats_bulk(&bulk, state.spec(), &cfg(4, 2)).unwrap();
        assert_eq!(delta.n_entries(), 0);
        assert_eq!(delta.sumw(), 0.0);
    }

    #[test]
    fn one_worker_matches_sequential_bitwise_including_real_weights() {
        // One worker walks its chunks in ascending order, so even awkward
        // weights see the exact same addition order as the sequential fill.
        let mut rng = crate::data::SplitMix64::new(7);
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.next_f64() * 1.4 - 0.2).collect();
        let ws: Vec<f64> = (0..n).map(|_| rng.next_f64() * 3.0).collect();
        let bulk = Bulk::from_columns(vec![("x".into(), xs), ("w".into(), ws)]).unwrap();

        let mut seq = HistogramState::new(spec_1d(97, true));
        fill_bulk_sequential(&mut seq, &bulk).unwrap();

        for epi in [1, 2, 4, 8] {
            let mut par = HistogramState::new(spec_1d(97, true));
            fill_bulk_parallel(&mut par, &bulk, &cfg(1, epi)).unwrap();
            assert_eq!(bits(par.contents()), bits(seq.contents()), "epi={epi}");
            assert_eq!(stats_bits(par.stats()), stats_bits(seq.stats()), "epi={epi}");
            assert_eq!(par.stats().n_entries(), seq.stats().n_entries());
        }
    }

    #[test]
    fn parallel_fill_unit_weights_matches_sequential_bitwise() {
        let mut rng = crate::data::SplitMix64::new(21);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.next_f64() * 1.2 - 0.1).collect();
        let bulk = Bulk::from_columns(vec![("x".into(), xs)]).unwrap();

        let mut seq = HistogramState::new(spec_1d(1000, false));
        fill_bulk_sequential(&mut seq, &bulk).unwrap();

        for workers in [2, 3, 8] {
            for epi in [1, 4] {
                let mut par = HistogramState::new(spec_1d(1000, false));
                fill_bulk_parallel(&mut par, &bulk, &cfg(workers, epi)).unwrap();
                // Unit-weight bin counts are integer-valued sums, exact in
                // any association; so are sumw, sumw2, and the entry count.
                assert_eq!(bits(par.contents()), bits(seq.contents()));
                assert_eq!(par.stats().sumw(), seq.stats().sumw());
                assert_eq!(par.stats().sumw2(), seq.stats().sumw2());
                assert_eq!(par.stats().n_entries(), seq.stats().n_entries());
                // Coordinate sums reassociate across workers; allow rounding.
                let rel = (par.stats().sumwx(0) - seq.stats().sumwx(0)).abs()
                    / seq.stats().sumwx(0).abs();
                assert!(rel < 1e-12, "workers={workers} epi={epi} rel={rel}");
            }
        }
    }

    #[test]
    fn single_event_delta() {
        let bulk = Bulk::from_columns(vec![
            ("x".into(), vec![0.5]),
            ("w".into(), vec![2.0]),
        ])
        .unwrap();
        let delta = reduce_stats_bulk(&bulk, &spec_1d(10, true), &EngineConfig::serial()).unwrap();
        assert_eq!(delta.sumw(), 2.0);
        assert_eq!(delta.sumw2(), 4.0);
        assert_eq!(delta.sumwx(0), 1.0);
        assert_eq!(delta.sumwx2(0), 0.5);
        assert_eq!(delta.n_entries(), 1);
    }

    #[test]
    fn out_of_range_events_count_but_do_not_sum() {
        let bulk = Bulk::from_columns(vec![("x".into(), vec![0.5, -3.0, 7.0])]).unwrap();
        let delta = reduce_stats_bulk(&bulk, &spec_1d(10, false), &EngineConfig::serial()).unwrap();
        assert_eq!(delta.n_entries(), 3);
        assert_eq!(delta.sumw(), 1.0);
        assert_eq!(delta.sumwx(0), 0.5);
    }

    #[test]
    fn fused_and_separate_reductions_agree_bitwise() {
        let mut rng = crate::data::SplitMix64::new(3);
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.next_f64() * 1.5 - 0.25).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let ws: Vec<f64> = (0..n).map(|_| rng.next_f64() * 2.0).collect();
        let bulk = Bulk::from_columns(vec![
            ("x".into(), xs),
            ("y".into(), ys),
            ("w".into(), ws),
        ])
        .unwrap();
        let spec = HistogramSpec::new(
            "xy",
            vec![
                Axis::fixed(50, 0.0, 1.0).unwrap(),
                Axis::fixed(20, 0.0, 1.0).unwrap(),
            ],
            vec!["x".into(), "y".into()],
            Some("w".into()),
        )
        .unwrap();

        for workers in [1, 3] {
            for epi in [1, 8] {
                let mut fused_cfg = cfg(workers, epi);
                fused_cfg.fused_reductions = true;
                let mut separate_cfg = cfg(workers, epi);
                separate_cfg.fused_reductions = false;
                let fused = reduce_stats_bulk(&bulk, &spec, &fused_cfg).unwrap();
                let separate = reduce_stats_bulk(&bulk, &spec, &separate_cfg).unwrap();
                assert_eq!(
                    stats_bits(&fused),
                    stats_bits(&separate),
                    "workers={workers} epi={epi}"
                );
                assert_eq!(fused.n_entries(), separate.n_entries());
            }
        }
    }

    #[test]
    fn combine_accumulates_or_overwrites() {
        let bulk_a = Bulk::from_columns(vec![("x".into(), vec![0.25, 0.75])]).unwrap();
        let bulk_b = Bulk::from_columns(vec![("x".into(), vec![0.5])]).unwrap();
        let spec = spec_1d(4, false);
        let ecfg = EngineConfig::serial();
        let da = reduce_stats_bulk(&bulk_a, &spec, &ecfg).unwrap();
        let db = reduce_stats_bulk(&bulk_b, &spec, &ecfg).unwrap();

        let mut acc = StatsAccumulator::new(1);
        combine_stats(&mut acc, &da, false);
        combine_stats(&mut acc, &db, false);
        assert_eq!(acc.sumw(), 3.0);
        assert_eq!(acc.sumwx(0), 1.5);
        assert_eq!(acc.n_entries(), 3);

        // Overwriting instead of accumulating keeps only the last delta.
        let mut broken = StatsAccumulator::new(1);
        combine_stats(&mut broken, &da, true);
        combine_stats(&mut broken, &db, true);
        assert_eq!(&broken, &db);
        assert_eq!(broken.sumw(), 1.0);
    }

    #[test]
    fn split_reduction_equals_whole_bulk_on_exact_inputs() {
        // Dyadic coordinates and integer weights keep every sum exact, so
        // the split/combined comparison is bitwise no matter the chunking.
        let mut rng = crate::data::SplitMix64::new(11);
        let n: usize = 4096;
        let xs: Vec<f64> = (0..n)
            .map(|_| (rng.next_u64() % 1024) as f64 / 1024.0)
            .collect();
        let ws: Vec<f64> = (0..n).map(|_| (rng.next_u64() % 5) as f64).collect();
        let spec = spec_1d(16, true);
        let ecfg = cfg(3, 2);

        let whole =
            Bulk::from_columns(vec![("x".into(), xs.clone()), ("w".into(), ws.clone())]).unwrap();
        let want = reduce_stats_bulk(&whole, &spec, &ecfg).unwrap();

        for pieces in [2, 7] {
            let mut acc = StatsAccumulator::new(1);
            let step = n.div_ceil(pieces);
            for (xchunk, wchunk) in xs.chunks(step).zip(ws.chunks(step)) {
                let part = Bulk::from_columns(vec![
                    ("x".into(), xchunk.to_vec()),
                    ("w".into(), wchunk.to_vec()),
                ])
                .unwrap();
                let delta = reduce_stats_bulk(&part, &spec, &ecfg).unwrap();
                combine_stats(&mut acc, &delta, false);
            }
            assert_eq!(stats_bits(&acc), stats_bits(&want), "pieces={pieces}");
            assert_eq!(acc.n_entries(), want.n_entries());
        }
    }

    #[test]
    fn missing_column_is_reported() {
        let bulk = Bulk::from_columns(vec![("y".into(), vec![0.5])]).unwrap();
        let mut state = HistogramState::new(spec_1d(10, false));
        let err = fill_bulk_parallel(&mut state, &bulk, &EngineConfig::serial()).unwrap_err();
        assert!(matches!(err, Error::UnknownColumn(c) if c == "x"));
    }

    #[test]
    fn non_finite_input_reports_index_and_leaves_state_untouched() {
        let bulk =
            Bulk::from_columns(vec![("x".into(), vec![0.1, 0.2, f64::NAN, 0.4])]).unwrap();
        let mut state = HistogramState::new(spec_1d(10, false));
        let fresh = state.clone();
        let err = fill_bulk_parallel(&mut state, &bulk, &cfg(2, 1)).unwrap_err();
        assert!(err.to_string().contains("event 2"), "{err}");
        assert_eq!(state, fresh);
        let err = fill_bulk_sequential(&mut state, &bulk).unwrap_err();
        assert!(err.to_string().contains("event 2"));
        assert_eq!(state, fresh);
    }

    #[test]
    fn nondeterministic_merge_still_conserves_weight() {
        let mut rng = crate::data::SplitMix64::new(5);
        let xs: Vec<f64> = (0..50_000).map(|_| rng.next_f64()).collect();
        let bulk = Bulk::from_columns(vec![("x".into(), xs)]).unwrap();
        let mut c = cfg(4, 1);
        c.deterministic_merge = false;
        let mut state = HistogramState::new(spec_1d(64, false));
        fill_bulk_parallel(&mut state, &bulk, &c).unwrap();
        assert_eq!(state.content_sum(), 50_000.0);
        assert_eq!(state.stats().n_entries(), 50_000);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Worker count, chunk shape, and reduction fusion never change the
        /// result on exact inputs (dyadic coordinates, small integer
        /// weights): everything matches the sequential fill bit for bit.
        #[test]
        fn partitioning_knobs_are_result_neutral(
            events in proptest::collection::vec((0u32..1024, 0u32..4), 1..500),
            workers in 1usize..6,
            group in prop_oneof![Just(1usize), Just(2), Just(8), Just(256)],
            epi in prop_oneof![Just(1usize), Just(2), Just(16)],
            fused in any::<bool>(),
        ) {
            let xs: Vec<f64> = events.iter().map(|&(x, _)| x as f64 / 1024.0).collect();
            let ws: Vec<f64> = events.iter().map(|&(_, w)| w as f64).collect();
            let bulk = Bulk::from_columns(vec![("x".into(), xs), ("w".into(), ws)]).unwrap();
            let spec = spec_1d(13, true);

            let mut seq = HistogramState::new(spec.clone());
            fill_bulk_sequential(&mut seq, &bulk).unwrap();

            let ecfg = EngineConfig {
                workers: NonZeroUsize::new(workers).unwrap(),
                group_size: NonZeroUsize::new(group).unwrap(),
                elements_per_item: NonZeroUsize::new(epi).unwrap(),
                fused_reductions: fused,
                deterministic_merge: true,
            };
            let mut par = HistogramState::new(spec);
            fill_bulk_parallel(&mut par, &bulk, &ecfg).unwrap();
            prop_assert_eq!(bits(par.contents()), bits(seq.contents()));
            prop_assert_eq!(stats_bits(par.stats()), stats_bits(seq.stats()));
            prop_assert_eq!(par.stats().n_entries(), seq.stats().n_entries());
        }
    }
}
