//! Overlapping-window displacements and their histograms.
//!
//! A series `ξ_1..ξ_N` is read as `N - s + 1` trajectories of length `s`,
//! one starting at every index. The displacement of trajectory `i` is the
//! window sum `x_i(s) = ξ_i + ... + ξ_{i+s-1}`. Displacements are binned on a
//! uniform grid anchored at the smallest displacement.

use serde::Serialize;

use crate::series_io::{RawSeries, SeriesStats};
use crate::{Error, Result};

/// Default bin width as a multiple of the series standard deviation.
pub const DEFAULT_BIN_FRACTION: f64 = 0.9;

/// Rolling sums are recomputed from scratch at this period to bound drift.
const RESYNC_PERIOD: usize = 1 << 16;

/// Window sums of one series at one window length.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementEnsemble {
    s: usize,
    displacements: Vec<f64>,
}

impl DisplacementEnsemble {
    pub fn s(&self) -> usize {
        self.s
    }

    pub fn displacements(&self) -> &[f64] {
        &self.displacements
    }

    /// `N - s + 1`.
    pub fn trajectory_count(&self) -> usize {
        self.displacements.len()
    }
}

/// All `N - s + 1` window sums of length `s`, in order of starting index.
pub fn displacements(series: &RawSeries, s: usize) -> Result<DisplacementEnsemble> {
    let n = series.len();
    if s == 0 || s > n {
        return Err(Error::Range(format!(
            "segment length s = {s} must lie in 1..={n}"
        )));
    }
    Ok(DisplacementEnsemble {
        s,
        displacements: window_sums(series.values(), s),
    })
}

/// Rolling window sums; caller guarantees `1 <= s <= values.len()`.
pub(crate) fn window_sums(values: &[f64], s: usize) -> Vec<f64> {
    if s == 1 {
        return values.to_vec();
    }
    let count = values.len() - s + 1;
    let mut out = Vec::with_capacity(count);
    let mut acc = 0.0;
    for i in 0..count {
        if i % RESYNC_PERIOD == 0 {
            acc = values[i..i + s].iter().sum();
        } else {
            acc += values[i + s - 1] - values[i - 1];
        }
        out.push(acc);
    }
    out
}

/// Bin width `ε = fraction · σ`, shared by every window length.
pub fn bin_width(stats: &SeriesStats, fraction: f64) -> Result<f64> {
    if !(fraction.is_finite() && fraction > 0.0) {
        return Err(Error::Range(format!(
            "bin fraction must be a positive number, got {fraction}"
        )));
    }
    // also rejects NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(stats.std > 0.0) {
        return Err(Error::Degenerate(
            "series is constant (zero standard deviation); bin width would be zero".into(),
        ));
    }
    Ok(fraction * stats.std)
}

/// Uniform bin grid. Bin `j` (0-based) covers `[x_min + j·ε, x_min + (j+1)·ε)`;
/// the last bin is closed on the right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinGrid {
    pub x_min: f64,
    pub width: f64,
    pub bin_count: usize,
}

impl BinGrid {
    pub fn left_edge(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.width
    }

    pub fn center(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.width
    }

    fn index_of(&self, x: f64) -> usize {
        let j = ((x - self.x_min) / self.width).floor();
        // clamps the closed right edge and any rounding overshoot
        (j.max(0.0) as usize).min(self.bin_count - 1)
    }
}

/// Bin occupancy counts over a [`BinGrid`], including empty bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    grid: BinGrid,
    counts: Vec<u64>,
    total: u64,
}

impl Histogram {
    /// Histogram over a unit grid from raw counts. Useful when only the
    /// occupancy pattern matters.
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if counts.is_empty() || total == 0 {
            return Err(Error::EmptyInput(
                "histogram needs at least one count".into(),
            ));
        }
        Ok(Self {
            grid: BinGrid {
                x_min: 0.0,
                width: 1.0,
                bin_count: counts.len(),
            },
            counts,
            total,
        })
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    /// Counts of the occupied bins only, in grid order.
    pub fn occupied_counts(&self) -> Vec<u64> {
        self.counts.iter().copied().filter(|&c| c > 0).collect()
    }

    /// `(bin_index, left_edge, count)` rows with a 1-based bin index.
    pub fn rows(&self) -> impl Iterator<Item = (usize, f64, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(|(j, &c)| (j + 1, self.grid.left_edge(j), c))
    }
}

/// Bins the ensemble on a grid of width `width` anchored at its minimum.
pub fn build_histogram(ensemble: &DisplacementEnsemble, width: f64) -> Result<Histogram> {
    histogram_of(ensemble.displacements(), width)
}

pub(crate) fn histogram_of(xs: &[f64], width: f64) -> Result<Histogram> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("no displacements to bin".into()));
    }
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::Range(format!(
            "bin width must be positive, got {width}"
        )));
    }
    let (x_min, x_max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let bin_count = if x_max > x_min {
        (((x_max - x_min) / width).ceil() as usize).max(1)
    } else {
        1
    };
    let grid = BinGrid {
        x_min,
        width,
        bin_count,
    };
    let mut counts = vec![0u64; bin_count];
    for &x in xs {
        counts[grid.index_of(x)] += 1;
    }
    Ok(Histogram {
        grid,
        counts,
        total: xs.len() as u64,
    })
}
