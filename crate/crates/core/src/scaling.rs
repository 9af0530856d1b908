//! Entropy curves, scaling fits, local scaling and transition detection.
//!
//! For a scale-invariant process the diffusion entropy grows as
//! `S(s) = A + δ ln s`, so `δ` is the least-squares slope of the entropy
//! curve against `ln s`.

use rayon::prelude::*;
use serde::Serialize;

use crate::diffusion::{bin_width, histogram_of, window_sums, Histogram, DEFAULT_BIN_FRACTION};
use crate::entropy::EstimatorKind;
use crate::series_io::{RawSeries, SeriesStats};
use crate::{Error, Result};

/// Smallest number of trajectories an entropy point may be computed from.
pub const MIN_TRAJECTORIES: usize = 32;
/// Default largest window length of the s-grid.
pub const DEFAULT_S_MAX: usize = 20;
/// Grid points above this window length are thinned geometrically.
pub const THIN_ABOVE: usize = 64;
pub const THIN_RATIO: f64 = 1.05;
pub const DEFAULT_SEGMENT_LENGTH: usize = 650;
pub const DEFAULT_TRANSITION_WINDOW: usize = 60;
pub const DEFAULT_TRANSITION_THRESHOLD: f64 = 0.08;

/// Everything that determines an entropy curve and its fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingConfig {
    pub estimator: EstimatorKind,
    /// Bin width as a multiple of the series standard deviation.
    pub bin_fraction: f64,
    /// Keep zero-count bins between the extreme displacements.
    pub include_empty_bins: bool,
    pub min_trajectories: usize,
    /// Largest grid window length; `None` means `min(20, N/4)`.
    pub s_max: Option<usize>,
    /// Lower end of the fit window; `None` means the first grid point.
    pub s_min: Option<usize>,
    /// Thin the grid above [`THIN_ABOVE`].
    pub thin_grid: bool,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorKind::Balanced,
            bin_fraction: DEFAULT_BIN_FRACTION,
            include_empty_bins: true,
            min_trajectories: MIN_TRAJECTORIES,
            s_max: None,
            s_min: None,
            thin_grid: true,
        }
    }
}

impl ScalingConfig {
    pub fn with_estimator(mut self, estimator: EstimatorKind) -> Self {
        self.estimator = estimator;
        self
    }

    /// Window lengths used for a series of length `n`.
    pub fn grid(&self, n: usize) -> Result<Vec<usize>> {
        let cap = (n + 1).saturating_sub(self.min_trajectories);
        let upper = match self.s_max {
            Some(s) if s > cap => {
                return Err(Error::Range(format!(
                    "s = {s} leaves fewer than {} trajectories in a series of length {n}",
                    self.min_trajectories
                )))
            }
            Some(s) => s,
            None => DEFAULT_S_MAX.min(n / 4).min(cap),
        };
        if upper < 2 {
            return Err(Error::InsufficientData(format!(
                "series of length {n} is too short for an entropy curve"
            )));
        }
        Ok(default_s_grid(upper, self.thin_grid))
    }
}

/// `1..=upper`, keeping above [`THIN_ABOVE`] only the integers nearest to
/// a geometric progression of ratio [`THIN_RATIO`] when `thin` is set.
pub fn default_s_grid(upper: usize, thin: bool) -> Vec<usize> {
    let mut grid: Vec<usize> = (1..=upper.min(THIN_ABOVE)).collect();
    if upper <= THIN_ABOVE {
        return grid;
    }
    if !thin {
        grid.extend(THIN_ABOVE + 1..=upper);
        return grid;
    }
    let mut target = THIN_ABOVE as f64;
    loop {
        target *= THIN_RATIO;
        let s = target.round() as usize;
        if s > upper {
            break;
        }
        if s > *grid.last().unwrap() {
            grid.push(s);
        }
    }
    grid
}

/// One point of an entropy curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub s: usize,
    pub entropy: f64,
    pub total_trajectories: usize,
    pub bin_count: usize,
}

impl CurvePoint {
    pub fn ln_s(&self) -> f64 {
        (self.s as f64).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyCurve {
    pub points: Vec<CurvePoint>,
    pub estimator: EstimatorKind,
    pub bin_fraction: f64,
    pub series_length: usize,
}

/// Entropy of the displacement histogram at each `s` in `s_grid`.
///
/// The bin width is `bin_fraction · σ` of the whole series, shared by
/// every `s`.
pub fn entropy_curve(
    series: &RawSeries,
    config: &ScalingConfig,
    s_grid: &[usize],
) -> Result<EntropyCurve> {
    curve_of(series.values(), config, s_grid, config.estimator)
}

/// Displacement histograms at each `s` in the grid.
pub fn histograms(
    series: &RawSeries,
    config: &ScalingConfig,
    s_grid: &[usize],
) -> Result<Vec<(usize, Histogram)>> {
    let values = series.values();
    let width = bin_width(&SeriesStats::of(values), config.bin_fraction)?;
    check_grid(values.len(), config, s_grid)?;
    s_grid
        .iter()
        .map(|&s| Ok((s, histogram_of(&window_sums(values, s), width)?)))
        .collect()
}

fn check_grid(n: usize, config: &ScalingConfig, s_grid: &[usize]) -> Result<()> {
    let mut previous = 0;
    for &s in s_grid {
        if s == 0 || s > n || n - s + 1 < config.min_trajectories {
            return Err(Error::Range(format!(
                "s = {s} is not usable for a series of length {n} (needs 1 <= s and N - s + 1 >= {})",
                config.min_trajectories
            )));
        }
        if s <= previous {
            return Err(Error::Range(format!(
                "s-grid must be strictly increasing at s = {s}"
            )));
        }
        previous = s;
    }
    Ok(())
}

fn curve_of(
    values: &[f64],
    config: &ScalingConfig,
    s_grid: &[usize],
    estimator: EstimatorKind,
) -> Result<EntropyCurve> {
    let width = bin_width(&SeriesStats::of(values), config.bin_fraction)?;
    check_grid(values.len(), config, s_grid)?;
    let points = s_grid
        .iter()
        .map(|&s| {
            let hist = histogram_of(&window_sums(values, s), width)?;
            let total = hist.total();
            let (entropy, bin_count) = if config.include_empty_bins {
                (estimator.of_counts(hist.counts(), total), hist.bin_count())
            } else {
                let occupied = hist.occupied_counts();
                (estimator.of_counts(&occupied, total), occupied.len())
            };
            Ok(CurvePoint {
                s,
                entropy,
                total_trajectories: total as usize,
                bin_count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EntropyCurve {
        points,
        estimator,
        bin_fraction: config.bin_fraction,
        series_length: values.len(),
    })
}

/// Least-squares line `entropy = intercept + delta · ln s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub delta: f64,
    pub intercept: f64,
    pub s_min: usize,
    pub s_max: usize,
    pub r_squared: f64,
    pub stderr_delta: f64,
    pub point_count: usize,
}

/// Ordinary least squares of entropy on `ln s` over points with
/// `s_min <= s <= s_max`.
pub fn fit_scaling(curve: &EntropyCurve, s_min: usize, s_max: usize) -> Result<ScalingFit> {
    let selected: Vec<&CurvePoint> = curve
        .points
        .iter()
        .filter(|p| p.s >= s_min && p.s <= s_max)
        .collect();
    let k = selected.len();
    if k < 2 {
        return Err(Error::InsufficientData(format!(
            "{k} curve point(s) in s = {s_min}..={s_max}; a fit needs at least 2"
        )));
    }
    let xs: Vec<f64> = selected.iter().map(|p| p.ln_s()).collect();
    let ys: Vec<f64> = selected.iter().map(|p| p.entropy).collect();
    let n = k as f64;
    let x_bar = xs.iter().sum::<f64>() / n;
    let y_bar = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - x_bar, y - y_bar);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let delta = sxy / sxx;
    let intercept = y_bar - delta * x_bar;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - delta * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let stderr_delta = if k > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(ScalingFit {
        delta,
        intercept,
        s_min: selected[0].s,
        s_max: selected[k - 1].s,
        r_squared,
        stderr_delta,
        point_count: k,
    })
}

/// A curve together with its default-window fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub curve: EntropyCurve,
    pub fit: ScalingFit,
}

/// Default pipeline: grid from `config`, curve, fit over
/// `[config.s_min or first grid s, last grid s]`.
pub fn analyze(series: &RawSeries, config: &ScalingConfig) -> Result<Analysis> {
    analyze_values(series.values(), config)
}

pub(crate) fn analyze_values(values: &[f64], config: &ScalingConfig) -> Result<Analysis> {
    let grid = config.grid(values.len())?;
    let curve = curve_of(values, config, &grid, config.estimator)?;
    let s_min = config.s_min.unwrap_or(grid[0]);
    let fit = fit_scaling(&curve, s_min, *grid.last().unwrap())?;
    Ok(Analysis { curve, fit })
}

/// Settings for [`local_scaling`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalScalingConfig {
    pub segment_length: usize,
    /// Reported index is `segment end - offset`.
    pub offset: i64,
    /// Step between consecutive segment ends.
    pub stride: usize,
    pub scaling: ScalingConfig,
}

impl Default for LocalScalingConfig {
    fn default() -> Self {
        Self {
            segment_length: DEFAULT_SEGMENT_LENGTH,
            offset: 0,
            stride: 1,
            scaling: ScalingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalPoint {
    /// Segment end (1-based index of its last sample) minus the offset.
    pub t: i64,
    pub delta: f64,
    pub r_squared: f64,
    pub stderr_delta: f64,
}

/// `δ` fitted on sliding fixed-length segments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalScalingSeries {
    pub points: Vec<LocalPoint>,
    pub segment_length: usize,
    pub offset: i64,
    pub stride: usize,
}

impl LocalScalingSeries {
    /// Wraps externally produced local estimates. `points` must be evenly
    /// spaced by `stride`.
    pub fn from_deltas(deltas: &[f64], segment_length: usize, stride: usize) -> Self {
        let points = deltas
            .iter()
            .enumerate()
            .map(|(i, &delta)| LocalPoint {
                t: (segment_length + i * stride) as i64,
                delta,
                r_squared: 1.0,
                stderr_delta: 0.0,
            })
            .collect();
        Self {
            points,
            segment_length,
            offset: 0,
            stride,
        }
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta).collect()
    }
}

/// Fits `δ` on every segment `[t - L + 1, t]` for `t = L, L + stride, ..., N`
/// (1-based) and reports it at `t - offset`.
pub fn local_scaling(
    series: &RawSeries,
    config: &LocalScalingConfig,
) -> Result<LocalScalingSeries> {
    let values = series.values();
    let l = config.segment_length;
    if config.stride == 0 {
        return Err(Error::Range("stride must be positive".into()));
    }
    if l == 0 || values.len() < l {
        return Err(Error::InsufficientData(format!(
            "series of length {} is shorter than the segment length {l}",
            values.len()
        )));
    }
    // validate the per-segment grid once, up front
    config.scaling.grid(l)?;
    let ends: Vec<usize> = (l..=values.len()).step_by(config.stride).collect();
    let points = ends
        .par_iter()
        .map(|&end| {
            let fit = analyze_values(&values[end - l..end], &config.scaling)
                .map_err(|e| match e {
                    Error::Degenerate(msg) => {
                        Error::Degenerate(format!("segment ending at t = {end}: {msg}"))
                    }
                    other => other,
                })?
                .fit;
            Ok(LocalPoint {
                t: end as i64 - config.offset,
                delta: fit.delta,
                r_squared: fit.r_squared,
                stderr_delta: fit.stderr_delta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalScalingSeries {
        points,
        segment_length: l,
        offset: config.offset,
        stride: config.stride,
    })
}

/// A sharp change in the local scaling exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionEvent {
    pub t: i64,
    pub delta_before: f64,
    pub delta_after: f64,
    pub magnitude: f64,
}

/// [`detect_transitions_with_lag`] with the lag set to the response width
/// of the local estimator, `segment_length - 1`.
///
/// A break in the source series at `b` only fully shows up in segments that
/// end at `b + L - 1` or later; segments ending in between mix both regimes.
/// Comparing pre-break segments with fully post-break ones places the peak
/// of the difference at the break itself.
pub fn detect_transitions(
    local: &LocalScalingSeries,
    window: usize,
    threshold: f64,
) -> Result<Vec<TransitionEvent>> {
    detect_transitions_with_lag(
        local,
        window,
        threshold,
        local.segment_length.saturating_sub(1),
    )
}

/// Windowed mean-difference detector with non-maximum suppression.
///
/// At candidate point `i` the mean of `δ` over the `window` points before
/// `i` is compared with the mean over `window` points starting `lag` index
/// units after `i`. Points where `|difference| >= threshold` and the
/// difference is maximal within `±window` become events. `window` and
/// `lag` are in source-index units and divided by the series stride.
pub fn detect_transitions_with_lag(
    local: &LocalScalingSeries,
    window: usize,
    threshold: f64,
    lag: usize,
) -> Result<Vec<TransitionEvent>> {
    if window == 0 {
        return Err(Error::Range("transition window must be positive".into()));
    }
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::Range(format!(
            "transition threshold must be positive, got {threshold}"
        )));
    }
    let stride = local.stride.max(1);
    let w = (window / stride).max(1);
    let lag = lag / stride;
    let d = local.deltas();
    let n = d.len();
    if n < 2 * w + lag {
        return Err(Error::InsufficientData(format!(
            "{n} local points; transition detection needs at least {}",
            2 * w + lag
        )));
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in &d {
        prefix.push(prefix.last().unwrap() + v);
    }
    let mean = |a: usize, b: usize| (prefix[b] - prefix[a]) / (b - a) as f64;

    // candidates i in [w, n - lag - w]
    let first = w;
    let last = n - lag - w;
    let diffs: Vec<(f64, f64)> = (first..=last)
        .map(|i| (mean(i - w, i), mean(i + lag, i + lag + w)))
        .collect();
    let magnitude = |k: usize| (diffs[k].1 - diffs[k].0).abs();

    let mut events = Vec::new();
    for k in 0..diffs.len() {
        let m = magnitude(k);
        if m < threshold {
            continue;
        }
        let lo = k.saturating_sub(w);
        let hi = (k + w).min(diffs.len() - 1);
        // ties resolve to the earliest index of a plateau
        let dominated =
            (lo..k).any(|j| magnitude(j) >= m) || (k + 1..=hi).any(|j| magnitude(j) > m);
        if !dominated {
            let (before, after) = diffs[k];
            events.push(TransitionEvent {
                t: local.points[first + k].t,
                delta_before: before,
                delta_after: after,
                magnitude: m,
            });
        }
    }
    Ok(events)
}
