//! Moment accumulation for histograms.
//!
//! A [`StatsAccumulator`] tracks the weighted moment sums of the coordinates
//! that landed in range, plus a raw entry counter. Entries that fall into a
//! flow bin are counted in `n_entries` but contribute nothing to the sums, so
//! mean and standard deviation describe the in-range population only.

use crate::error::{Error, Result};

/// Index of the pair `(a, b)`, `a < b`, in the packed upper triangle of a
/// `dim x dim` matrix (row-major, diagonal excluded).
fn pair_index(dim: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b && b < dim);
    a * (2 * dim - a - 1) / 2 + (b - a - 1)
}

/// Weighted moment sums for a `dim`-dimensional coordinate distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsAccumulator {
    dim: usize,
    sumw: f64,
    sumw2: f64,
    sumwx: Vec<f64>,
    sumwx2: Vec<f64>,
    /// Cross terms sum(w * x_a * x_b) for a < b, packed by [`pair_index`].
    sumwxy: Vec<f64>,
    n_entries: u64,
}

/// Finalized per-axis location and spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSummary {
    pub mean: f64,
    pub stddev: f64,
}

impl StatsAccumulator {
    /// A zeroed accumulator for `dim`-dimensional coordinates.
    pub fn new(dim: usize) -> StatsAccumulator {
        StatsAccumulator {
            dim,
            sumw: 0.0,
            sumw2: 0.0,
            sumwx: vec![0.0; dim],
            sumwx2: vec![0.0; dim],
            sumwxy: vec![0.0; dim * dim.saturating_sub(1) / 2],
            n_entries: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sumw(&self) -> f64 {
        self.sumw
    }

    pub fn sumw2(&self) -> f64 {
        self.sumw2
    }

    /// sum(w * x) for the given axis.
    pub fn sumwx(&self, axis: usize) -> f64 {
        self.sumwx[axis]
    }

    /// sum(w * x^2) for the given axis.
    pub fn sumwx2(&self, axis: usize) -> f64 {
        self.sumwx2[axis]
    }

    /// sum(w * x_a * x_b) for an axis pair, `a != b`, order-insensitive.
    pub fn sumwxy(&self, a: usize, b: usize) -> f64 {
        assert!(a != b, "cross term requires two distinct axes");
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.sumwxy[pair_index(self.dim, a, b)]
    }

    /// Total entries seen, including entries that fell into flow bins.
    pub fn n_entries(&self) -> u64 {
        self.n_entries
    }

    /// Count `n` raw entries without touching the sums.
    pub fn add_entries(&mut self, n: u64) {
        self.n_entries += n;
    }

    /// Fold one in-range entry into the sums. Does not count the entry;
    /// callers decide what counts (flow-bin entries are counted but never
    /// accumulated).
    pub fn accumulate(&mut self, coords: &[f64], weight: f64) {
        assert_eq!(coords.len(), self.dim, "coordinate dimension mismatch");
        self.sumw += weight;
        self.sumw2 += weight * weight;
        for (a, &x) in coords.iter().enumerate() {
            self.sumwx[a] += weight * x;
            self.sumwx2[a] += weight * x * x;
            for (b, &y) in coords.iter().enumerate().skip(a + 1) {
                self.sumwxy[pair_index(self.dim, a, b)] += weight * x * y;
            }
        }
    }

    /// Install sums computed elsewhere (the per-field reduction path).
    /// Entry count is left alone.
    pub(crate) fn set_sums(
        &mut self,
        sumw: f64,
        sumw2: f64,
        sumwx: Vec<f64>,
        sumwx2: Vec<f64>,
        sumwxy: Vec<f64>,
    ) {
        assert_eq!(sumwx.len(), self.dim);
        assert_eq!(sumwx2.len(), self.dim);
        assert_eq!(sumwxy.len(), self.sumwxy.len());
        self.sumw = sumw;
        self.sumw2 = sumw2;
        self.sumwx = sumwx;
        self.sumwx2 = sumwx2;
        self.sumwxy = sumwxy;
    }

    /// Fieldwise sum: fold `other` into `self`.
    pub fn add(&mut self, other: &StatsAccumulator) {
        assert_eq!(self.dim, other.dim, "accumulator dimension mismatch");
        self.sumw += other.sumw;
        self.sumw2 += other.sumw2;
        for (s, o) in self.sumwx.iter_mut().zip(&other.sumwx) {
            *s += o;
        }
        for (s, o) in self.sumwx2.iter_mut().zip(&other.sumwx2) {
            *s += o;
        }
        for (s, o) in self.sumwxy.iter_mut().zip(&other.sumwxy) {
            *s += o;
        }
        self.n_entries += other.n_entries;
    }

    /// Per-axis mean and standard deviation of the in-range population.
    ///
    /// Errors if no weight was accumulated. The variance is clamped at zero
    /// before the square root, so near-degenerate distributions cannot yield
    /// NaN through cancellation.
    pub fn axis_summaries(&self) -> Result<Vec<AxisSummary>> {
        if self.sumw == 0.0 {
            return Err(Error::EmptyStats);
        }
        Ok((0..self.dim)
            .map(|a| {
                let mean = self.sumwx[a] / self.sumw;
                let variance = (self.sumwx2[a] / self.sumw - mean * mean).max(0.0);
                AxisSummary {
                    mean,
                    stddev: variance.sqrt(),
                }
            })
            .collect())
    }
}
