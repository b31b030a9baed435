//! Histogram definitions and state.
//!
//! A [`HistogramSpec`] names the input columns and binning; a
//! [`HistogramState`] owns the flat bin contents and the moment sums. Bin
//! contents are stored in one linear array covering all bins including flow
//! bins, with axis 0 varying fastest.

use crate::axis::Axis;
use crate::error::{Error, Result};
use crate::stats::{AxisSummary, StatsAccumulator};

pub type BinIndex = usize;

/// Flatten per-axis bin indices into the linear index.
///
/// Each axis contributes `total_bins() = nbins + 2` positions; the stride of
/// axis `k` is the product of the total bin counts of axes `0..k`. Errors if
/// the index tuple has the wrong arity or any index is out of bounds.
pub fn global_bin(per_axis: &[BinIndex], axes: &[Axis]) -> Result<BinIndex> {
    if per_axis.len() != axes.len() {
        return Err(Error::invalid_input(format!(
            "got {} bin indices for {} axes",
            per_axis.len(),
            axes.len()
        )));
    }
    let mut flat = 0;
    let mut stride = 1;
    for (&bin, axis) in per_axis.iter().zip(axes) {
        if bin >= axis.total_bins() {
            return Err(Error::invalid_input(format!(
                "bin index {bin} out of range for axis with {} bins",
                axis.total_bins()
            )));
        }
        flat += bin * stride;
        stride *= axis.total_bins();
    }
    Ok(flat)
}

/// What to histogram: axes plus the dataset columns feeding them.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSpec {
    name: String,
    axes: Vec<Axis>,
    coord_columns: Vec<String>,
    weight_column: Option<String>,
}

impl HistogramSpec {
    /// One coordinate column per axis; `weight_column` of `None` means every
    /// entry has weight 1.
    pub fn new(
        name: impl Into<String>,
        axes: Vec<Axis>,
        coord_columns: Vec<String>,
        weight_column: Option<String>,
    ) -> Result<HistogramSpec> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::invalid_config("histogram name must not be empty"));
        }
        if axes.is_empty() {
            return Err(Error::invalid_config("histogram needs at least one axis"));
        }
        if coord_columns.len() != axes.len() {
            return Err(Error::invalid_config(format!(
                "{} axes but {} coordinate columns",
                axes.len(),
                coord_columns.len()
            )));
        }
        Ok(HistogramSpec {
            name,
            axes,
            coord_columns,
            weight_column,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn coord_columns(&self) -> &[String] {
        &self.coord_columns
    }

    pub fn weight_column(&self) -> Option<&str> {
        self.weight_column.as_deref()
    }

    /// All columns this histogram reads: coordinates, then the weight column
    /// if there is one.
    pub fn input_columns(&self) -> Vec<&str> {
        let mut cols: Vec<&str> = self.coord_columns.iter().map(|s| s.as_str()).collect();
        if let Some(w) = self.weight_column.as_deref() {
            cols.push(w);
        }
        cols
    }

    /// Total flat bin count, flow bins included.
    pub fn total_bins(&self) -> usize {
        self.axes.iter().map(|a| a.total_bins()).product()
    }
}

/// Bin contents plus statistics for one histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramState {
    spec: HistogramSpec,
    contents: Vec<f64>,
    stats: StatsAccumulator,
}

impl HistogramState {
    pub fn new(spec: HistogramSpec) -> HistogramState {
        let contents = vec![0.0; spec.total_bins()];
        let stats = StatsAccumulator::new(spec.dim());
        HistogramState {
            spec,
            contents,
            stats,
        }
    }

    pub fn spec(&self) -> &HistogramSpec {
        &self.spec
    }

    /// Flat bin contents, indexed by [`global_bin`].
    pub fn contents(&self) -> &[f64] {
        &self.contents
    }

    pub(crate) fn contents_mut(&mut self) -> &mut [f64] {
        &mut self.contents
    }

    pub fn stats(&self) -> &StatsAccumulator {
        &self.stats
    }

    pub(crate) fn stats_mut(&mut self) -> &mut StatsAccumulator {
        &mut self.stats
    }

    /// Sum of all bin contents, flow bins included. Equals the total filled
    /// weight: filling conserves weight no matter where entries land.
    pub fn content_sum(&self) -> f64 {
        self.contents.iter().sum()
    }

    pub fn axis_summaries(&self) -> Result<Vec<AxisSummary>> {
        self.stats.axis_summaries()
    }

    /// Fill a single entry.
    ///
    /// The entry's weight is added to the bin the coordinates select (flow
    /// bins included) and the entry is counted. Only in-range entries reach
    /// the moment sums. Non-finite coordinates or weight are an error and
    /// leave the state untouched.
    pub fn fill(&mut self, coords: &[f64], weight: f64) -> Result<()> {
        if coords.len() != self.spec.dim() {
            return Err(Error::invalid_input(format!(
                "got {} coordinates for a {}-d histogram",
                coords.len(),
                self.spec.dim()
            )));
        }
        if !weight.is_finite() {
            return Err(Error::invalid_input(format!("non-finite weight {weight}")));
        }
        // Resolve all bins before mutating anything.
        let mut flat = 0;
        let mut stride = 1;
        let mut in_range = true;
        for (&c, axis) in coords.iter().zip(self.spec.axes()) {
            let bin = axis.find_bin(c)?;
            in_range &= (1..=axis.nbins()).contains(&bin);
            flat += bin * stride;
            stride *= axis.total_bins();
        }
        self.contents[flat] += weight;
        self.stats.add_entries(1);
        if in_range {
            self.stats.accumulate(coords, weight);
        }
        Ok(())
    }

    /// Fold another histogram's contents and statistics into this one.
    /// Both must share the same spec.
    pub fn merge_from(&mut self, other: &HistogramState) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::Incompatible(format!(
                "cannot merge '{}' into '{}': shapes differ",
                other.spec.name(),
                self.spec.name()
            )));
        }
        for (s, o) in self.contents.iter_mut().zip(&other.contents) {
            *s += o;
        }
        self.stats.add(&other.stats);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec_1d(nbins: usize) -> HistogramSpec {
        HistogramSpec::new(
            "h",
            vec![Axis::fixed(nbins, 0.0, 1.0).unwrap()],
            vec!["x".into()],
            None,
        )
        .unwrap()
    }

    #[test]
    fn global_bin_1d_is_identity() {
        let axes = vec![Axis::fixed(1000, 0.0, 1.0).unwrap()];
        assert_eq!(global_bin(&[5], &axes).unwrap(), 5);
        assert_eq!(global_bin(&[0], &axes).unwrap(), 0);
        assert_eq!(global_bin(&[1001], &axes).unwrap(), 1001);
        assert!(global_bin(&[1002], &axes).is_err());
        assert!(global_bin(&[0, 0], &axes).is_err());
    }

    #[test]
    fn global_bin_2d_axis0_fastest() {
        let axes = vec![
            Axis::fixed(2, 0.0, 1.0).unwrap(), // 4 positions
            Axis::fixed(3, 0.0, 1.0).unwrap(), // 5 positions
        ];
        assert_eq!(global_bin(&[0, 0], &axes).unwrap(), 0);
        assert_eq!(global_bin(&[1, 2], &axes).unwrap(), 9); // 1 + 2 * 4
        assert_eq!(global_bin(&[3, 4], &axes).unwrap(), 19);
    }

    #[test]
    fn global_bin_is_a_bijection() {
        let axes = vec![
            Axis::fixed(2, 0.0, 1.0).unwrap(),
            Axis::variable(vec![0.0, 0.5, 1.0]).unwrap(),
            Axis::fixed(1, 0.0, 1.0).unwrap(),
        ];
        let total: usize = axes.iter().map(|a| a.total_bins()).product();
        let mut seen: Vec<usize> = Vec::new();
        for k in 0..axes[2].total_bins() {
            for j in 0..axes[1].total_bins() {
                for i in 0..axes[0].total_bins() {
                    seen.push(global_bin(&[i, j, k], &axes).unwrap());
                }
            }
        }
        let mut sorted = seen.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..total).collect::<Vec<_>>());
    }

    #[test]
    fn fill_routes_weight_and_counts_entries() {
        let mut h = HistogramState::new(spec_1d(1000));
        h.fill(&[0.5], 1.0).unwrap();
        assert_eq!(h.contents()[501], 1.0);
        assert_eq!(h.stats().sumw(), 1.0);
        assert_eq!(h.stats().n_entries(), 1);

        // Underflow: counted, binned, excluded from the sums.
        h.fill(&[-1.0], 1.0).unwrap();
        assert_eq!(h.contents()[0], 1.0);
        assert_eq!(h.stats().sumw(), 1.0);
        assert_eq!(h.stats().n_entries(), 2);
    }

    #[test]
    fn zero_weight_fill_counts_but_moves_nothing() {
        let mut h = HistogramState::new(spec_1d(10));
        h.fill(&[0.5], 0.0).unwrap();
        assert_eq!(h.content_sum(), 0.0);
        assert_eq!(h.stats().sumw(), 0.0);
        assert_eq!(h.stats().n_entries(), 1);
    }

    #[test]
    fn invalid_fill_leaves_state_untouched() {
        let mut h = HistogramState::new(spec_1d(10));
        h.fill(&[0.25], 2.0).unwrap();
        let before = h.clone();
        assert!(h.fill(&[f64::NAN], 1.0).is_err());
        assert!(h.fill(&[0.5], f64::INFINITY).is_err());
        assert!(h.fill(&[0.5, 0.5], 1.0).is_err());
        assert_eq!(h, before);
    }

    #[test]
    fn merge_adds_contents_and_stats() {
        let mut a = HistogramState::new(spec_1d(4));
        let mut b = HistogramState::new(spec_1d(4));
        a.fill(&[0.1], 1.0).unwrap();
        b.fill(&[0.1], 2.0).unwrap();
        b.fill(&[0.9], 1.0).unwrap();
        a.merge_from(&b).unwrap();
        assert_eq!(a.contents()[1], 3.0);
        assert_eq!(a.contents()[4], 1.0);
        assert_eq!(a.stats().sumw(), 4.0);
        assert_eq!(a.stats().n_entries(), 3);

        let other = HistogramState::new(spec_1d(5));
        assert!(a.merge_from(&other).is_err());
    }

    #[test]
    fn merging_an_empty_histogram_is_identity() {
        let mut a = HistogramState::new(spec_1d(8));
        a.fill(&[0.3], 1.5).unwrap();
        let before = a.clone();
        a.merge_from(&HistogramState::new(spec_1d(8))).unwrap();
        assert_eq!(a, before);
    }

    #[test]
    fn fill_2d() {
        let spec = HistogramSpec::new(
            "xy",
            vec![
                Axis::fixed(2, 0.0, 1.0).unwrap(),
                Axis::fixed(2, 0.0, 1.0).unwrap(),
            ],
            vec!["x".into(), "y".into()],
            None,
        )
        .unwrap();
        let mut h = HistogramState::new(spec);
        h.fill(&[0.25, 0.75], 1.0).unwrap();
        // x bin 1, y bin 2, strides (1, 4) -> flat 9.
        assert_eq!(h.contents()[9], 1.0);
        assert_eq!(h.stats().sumwxy(0, 1), 0.1875);
    }

    proptest! {
        /// Weight in equals weight across bins, wherever entries land.
        #[test]
        fn filling_conserves_weight(coords in proptest::collection::vec(-2.0f64..2.0, 0..100)) {
            let mut h = HistogramState::new(spec_1d(16));
            for &c in &coords {
                h.fill(&[c], 1.0).unwrap();
            }
            prop_assert_eq!(h.content_sum(), coords.len() as f64);
            prop_assert_eq!(h.stats().n_entries(), coords.len() as u64);
        }
    }
}
