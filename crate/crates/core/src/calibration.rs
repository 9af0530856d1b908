//! Monte Carlo sampling distribution of the scaling estimate on fGn.
//!
//! Every replica is an independent fGn series with seed
//! [`derive_seed`]`(master_seed, replica_index)`, analyzed with the default
//! curve-and-fit pipeline. Estimates are stored by replica index, so the
//! result does not depend on how replicas are scheduled.

use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::EstimatorKind;
use crate::fbm::{derive_seed, generate, FbmConfig, FbmMethod};
use crate::scaling::{analyze_values, ScalingConfig};
use crate::{Error, Result};

/// Half-width of the certainty interval used for certainty curves.
pub const DEFAULT_DELTA_H: f64 = 0.08;
pub const DEFAULT_REPLICAS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationConfig {
    pub hurst: f64,
    pub length: usize,
    pub replicas: usize,
    pub delta_h: f64,
    pub master_seed: u64,
    pub method: FbmMethod,
    pub scaling: ScalingConfig,
}

impl CalibrationConfig {
    pub fn new(hurst: f64, length: usize, replicas: usize, master_seed: u64) -> Self {
        Self {
            hurst,
            length,
            replicas,
            delta_h: DEFAULT_DELTA_H,
            master_seed,
            method: FbmMethod::Circulant,
            scaling: ScalingConfig::default(),
        }
    }
}

/// A replica that produced no estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedReplica {
    pub index: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub hurst: f64,
    pub length: usize,
    pub replicas: usize,
    pub delta_h: f64,
    pub master_seed: u64,
    pub estimator: EstimatorKind,
    pub bin_fraction: f64,
    /// Fitted `δ` of each non-skipped replica, in replica order.
    #[serde(skip)]
    pub estimates: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the estimates.
    pub std: f64,
    pub p_conf: f64,
    pub skipped: Vec<SkippedReplica>,
}

impl CalibrationResult {
    /// Fraction of estimates within `[hurst - delta_h, hurst + delta_h]`.
    pub fn p_conf_at(&self, delta_h: f64) -> f64 {
        p_conf(&self.estimates, self.hurst, delta_h)
    }

    pub fn skewness(&self) -> f64 {
        moments(&self.estimates).skewness
    }

    pub fn excess_kurtosis(&self) -> f64 {
        moments(&self.estimates).excess_kurtosis
    }
}

/// Share of `estimates` inside the closed interval `center ± delta_h`.
pub fn p_conf(estimates: &[f64], center: f64, delta_h: f64) -> f64 {
    if estimates.is_empty() {
        return 0.0;
    }
    let inside = estimates
        .iter()
        .filter(|&&d| (d - center).abs() <= delta_h)
        .count();
    inside as f64 / estimates.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Population moments; skewness and kurtosis are zero for a degenerate sample.
pub fn moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return Moments {
            mean: f64::NAN,
            std: 0.0,
            skewness: 0.0,
            excess_kurtosis: 0.0,
        };
    }
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Moments {
        mean,
        std: m2.sqrt(),
        skewness,
        excess_kurtosis,
    }
}

/// Runs the Monte Carlo ensemble described by `config`.
pub fn calibrate(config: &CalibrationConfig) -> Result<CalibrationResult> {
    if config.replicas == 0 {
        return Err(Error::Range("replicas must be at least 1".into()));
    }
    if !(config.delta_h.is_finite() && config.delta_h > 0.0) {
        return Err(Error::Range(format!(
            "delta_h must be positive, got {}",
            config.delta_h
        )));
    }
    FbmConfig::new(
        config.hurst,
        config.length,
        config.master_seed,
        config.method,
    )
    .validate()?;
    config.scaling.grid(config.length)?;

    let outcomes: Vec<Result<std::result::Result<f64, SkippedReplica>>> = (0..config.replicas)
        .into_par_iter()
        .map(|index| {
            let seed = derive_seed(config.master_seed, index as u64);
            let path = generate(&FbmConfig::new(
                config.hurst,
                config.length,
                seed,
                config.method,
            ))?;
            match analyze_values(path.increments.values(), &config.scaling) {
                Ok(a) => Ok(Ok(a.fit.delta)),
                Err(Error::Degenerate(reason)) => Ok(Err(SkippedReplica {
                    index,
                    seed,
                    reason,
                })),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut estimates = Vec::with_capacity(config.replicas);
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome? {
            Ok(d) => estimates.push(d),
            Err(s) => skipped.push(s),
        }
    }
    let m = moments(&estimates);
    Ok(CalibrationResult {
        hurst: config.hurst,
        length: config.length,
        replicas: config.replicas,
        delta_h: config.delta_h,
        master_seed: config.master_seed,
        estimator: config.scaling.estimator,
        bin_fraction: config.scaling.bin_fraction,
        p_conf: p_conf(&estimates, config.hurst, config.delta_h),
        mean: m.mean,
        std: m.std,
        estimates,
        skipped,
    })
}

/// `(length, p_conf)` for each length, sorted by length. `template` supplies
/// everything except the length.
pub fn certainty_curve(
    template: &CalibrationConfig,
    lengths: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let mut lengths = lengths.to_vec();
    lengths.sort_unstable();
    lengths
        .into_iter()
        .map(|length| {
            let cfg = CalibrationConfig {
                length,
                ..template.clone()
            };
            Ok((length, calibrate(&cfg)?.p_conf))
        })
        .collect()
}
