//! Binned axes.
//!
//! Every axis maps a coordinate to a bin index in `0..=nbins + 1`, where bin
//! `0` is the underflow bin, bins `1..=nbins` are the regular bins, and bin
//! `nbins + 1` is the overflow bin. Regular bins are half-open `[lo, hi)`
//! intervals; a coordinate equal to the upper axis edge lands in overflow.

use crate::error::{Error, Result};

/// Synthesize the edge positions of a uniform binning.
///
/// The first and last edges are exactly `min` and `max`; interior edges are
/// computed as `min + i * (max - min) / nbins` so that the same positions are
/// reproduced no matter how the axis was constructed.
pub fn uniform_edges(nbins: usize, min: f64, max: f64) -> Vec<f64> {
    let width = max - min;
    let n = nbins as f64;
    (0..=nbins)
        .map(|i| {
            if i == 0 {
                min
            } else if i == nbins {
                max
            } else {
                min + (i as f64) * width / n
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Fixed {
        nbins: usize,
        min: f64,
        max: f64,
        // Cached uniform_edges(nbins, min, max); the fast lookup path snaps
        // its candidate bin against these so fixed and variable axes with
        // identical edges always agree.
        edges: Vec<f64>,
    },
    Variable {
        edges: Vec<f64>,
    },
}

/// A 1-D binned axis, either uniform (`fixed`) or with explicit edges
/// (`variable`).
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    repr: Repr,
}

impl Axis {
    /// Uniform binning: `nbins` equal-width bins covering `[min, max)`.
    pub fn fixed(nbins: usize, min: f64, max: f64) -> Result<Axis> {
        if nbins == 0 {
            return Err(Error::invalid_axis("nbins must be at least 1"));
        }
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::invalid_axis(format!(
                "axis range [{min}, {max}) must be finite"
            )));
        }
        if !(min < max) {
            return Err(Error::invalid_axis(format!(
                "axis range [{min}, {max}) is empty or inverted"
            )));
        }
        let edges = uniform_edges(nbins, min, max);
        // Rounding in the edge formula must not produce a non-increasing
        // sequence; for pathological ranges (huge min with tiny width) it
        // can, and such an axis is rejected rather than silently misbinned.
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid_axis(format!(
                "range [{min}, {max}) is too narrow for {nbins} bins"
            )));
        }
        Ok(Axis {
            repr: Repr::Fixed { nbins, min, max, edges },
        })
    }

    /// Explicit bin edges. Requires at least two edges, strictly increasing,
    /// all finite. `edges[i]` and `edges[i + 1]` bound regular bin `i + 1`.
    pub fn variable(edges: Vec<f64>) -> Result<Axis> {
        if edges.len() < 2 {
            return Err(Error::invalid_axis("need at least two bin edges"));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::invalid_axis("bin edges must be finite"));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid_axis("bin edges must be strictly increasing"));
        }
        Ok(Axis {
            repr: Repr::Variable { edges },
        })
    }

    /// Number of regular bins (excludes the two flow bins).
    pub fn nbins(&self) -> usize {
        match &self.repr {
            Repr::Fixed { nbins, .. } => *nbins,
            Repr::Variable { edges } => edges.len() - 1,
        }
    }

    /// Number of bins including underflow and overflow: `nbins + 2`.
    pub fn total_bins(&self) -> usize {
        self.nbins() + 2
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self.repr, Repr::Fixed { .. })
    }

    /// Lower edge of the axis range.
    pub fn low(&self) -> f64 {
        self.edges()[0]
    }

    /// Upper edge of the axis range.
    pub fn high(&self) -> f64 {
        *self.edges().last().unwrap()
    }

    /// All `nbins + 1` edge positions, in increasing order.
    pub fn edges(&self) -> &[f64] {
        match &self.repr {
            Repr::Fixed { edges, .. } => edges,
            Repr::Variable { edges } => edges,
        }
    }

    /// Whether `coord` falls into a regular bin (`low <= coord < high`).
    /// NaN is never in range.
    pub fn in_range(&self, coord: f64) -> bool {
        coord >= self.low() && coord < self.high()
    }

    /// Map a coordinate to its bin index.
    ///
    /// Returns `0` for underflow, `nbins + 1` for overflow, and the regular
    /// bin index otherwise. Non-finite coordinates are an error.
    pub fn find_bin(&self, coord: f64) -> Result<usize> {
        if !coord.is_finite() {
            return Err(Error::invalid_input(format!(
                "cannot bin non-finite coordinate {coord}"
            )));
        }
        Ok(match &self.repr {
            Repr::Fixed { nbins, min, max, edges } => {
                if coord < *min {
                    0
                } else if coord >= *max {
                    nbins + 1
                } else {
                    let frac = (coord - min) / (max - min);
                    let mut bin = 1 + (frac * *nbins as f64) as usize;
                    if bin > *nbins {
                        bin = *nbins;
                    }
                    // The arithmetic candidate can be off by one when coord
                    // sits within rounding error of an interior edge; snap it
                    // to the cached edges so [lo, hi) holds exactly.
                    while bin > 1 && coord < edges[bin - 1] {
                        bin -= 1;
                    }
                    while coord >= edges[bin] {
                        bin += 1;
                    }
                    bin
                }
            }
            Repr::Variable { edges } => {
                let nbins = edges.len() - 1;
                if coord < edges[0] {
                    0
                } else if coord >= edges[nbins] {
                    nbins + 1
                } else {
                    // Number of edges <= coord; coord is bounded by the outer
                    // edges, so this lands in 1..=nbins.
                    edges.partition_point(|e| *e <= coord)
                }
            }
        })
    }
}

// ============================================================================
// tests
// ============================================================================
