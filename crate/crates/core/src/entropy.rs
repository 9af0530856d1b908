//! Entropy estimators for displacement histograms.
//!
//! Three estimators are provided, all in nats:
//!
//! - **naive**: the plug-in entropy `-Σ p̂ ln p̂` with `p̂ = N_j / T`;
//! - **corrected**: naive plus the leading bias term `(M - 1) / (2T)`;
//! - **balanced**: a sum over *all* `M` bins, empty ones included, of the
//!   per-bin estimate
//!
//! ```text
//! Ŝ[n] = (n + 1) / (T + 2) · Σ_{k = n+2}^{T+2} 1/k
//! ```
//!
//! which minimises squared bias plus variance of a single binomial cell,
//! averaged uniformly over the cell probability. Here `T` is the number of
//! trajectories (`N - s + 1`) and `M` the bin count.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::diffusion::Histogram;
use crate::{Error, Result};

/// Which entropy estimator to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Naive,
    Corrected,
    #[default]
    Balanced,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [
        EstimatorKind::Naive,
        EstimatorKind::Corrected,
        EstimatorKind::Balanced,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Naive => "naive",
            EstimatorKind::Corrected => "corrected",
            EstimatorKind::Balanced => "balanced",
        }
    }

    pub fn entropy(&self, hist: &Histogram) -> EntropyValue {
        match self {
            EstimatorKind::Naive => naive_entropy(hist),
            EstimatorKind::Corrected => corrected_entropy(hist),
            EstimatorKind::Balanced => balanced_entropy(hist),
        }
    }

    /// Evaluates the estimator on a raw count vector; `total` is its sum.
    pub(crate) fn of_counts(&self, counts: &[u64], total: u64) -> f64 {
        match self {
            EstimatorKind::Naive => naive_of_counts(counts, total),
            EstimatorKind::Corrected => {
                naive_of_counts(counts, total) + miller_madow_term(counts.len(), total)
            }
            EstimatorKind::Balanced => balanced_of_counts(counts, total),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "naive" => Ok(EstimatorKind::Naive),
            "corrected" => Ok(EstimatorKind::Corrected),
            "balanced" => Ok(EstimatorKind::Balanced),
            other => Err(format!(
                "unknown estimator `{other}` (expected naive, corrected or balanced)"
            )),
        }
    }
}

/// An entropy estimate with the sample and bin counts it was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyValue {
    pub value: f64,
    pub estimator: EstimatorKind,
    pub sample_count: u64,
    pub bin_count: usize,
}

impl EntropyValue {
    fn new(value: f64, estimator: EstimatorKind, hist: &Histogram) -> Self {
        Self {
            value,
            estimator,
            sample_count: hist.total(),
            bin_count: hist.bin_count(),
        }
    }
}

/// Plug-in entropy with `0 · ln 0 = 0`.
pub fn naive_entropy(hist: &Histogram) -> EntropyValue {
    EntropyValue::new(
        naive_of_counts(hist.counts(), hist.total()),
        EstimatorKind::Naive,
        hist,
    )
}

/// Plug-in entropy plus `(M - 1) / (2T)`.
pub fn corrected_entropy(hist: &Histogram) -> EntropyValue {
    EntropyValue::new(
        EstimatorKind::Corrected.of_counts(hist.counts(), hist.total()),
        EstimatorKind::Corrected,
        hist,
    )
}

/// Sum of [`balanced_term`] over every bin of the histogram.
pub fn balanced_entropy(hist: &Histogram) -> EntropyValue {
    EntropyValue::new(
        balanced_of_counts(hist.counts(), hist.total()),
        EstimatorKind::Balanced,
        hist,
    )
}

/// Per-bin balanced estimate for a bin holding `n` of `total` samples.
pub fn balanced_term(n: u64, total: u64) -> Result<f64> {
    if total == 0 {
        return Err(Error::Range("total must be positive".into()));
    }
    if n > total {
        return Err(Error::Range(format!("count {n} exceeds total {total}")));
    }
    let h = harmonic_table(total as usize + 2);
    Ok(h.balanced(n as usize, total as usize))
}

fn naive_of_counts(counts: &[u64], total: u64) -> f64 {
    let t = total as f64;
    let ln_t = t.ln();
    // -Σ (c/T) ln(c/T) = ln T - (1/T) Σ c ln c
    let sum_c_ln_c: f64 = counts
        .iter()
        .filter(|&&c| c > 1)
        .map(|&c| {
            let c = c as f64;
            c * c.ln()
        })
        .sum();
    (ln_t - sum_c_ln_c / t).max(0.0)
}

fn miller_madow_term(bins: usize, total: u64) -> f64 {
    (bins as f64 - 1.0) / (2.0 * total as f64)
}

fn balanced_of_counts(counts: &[u64], total: u64) -> f64 {
    let total = total as usize;
    let h = harmonic_table(total + 2);
    counts.iter().map(|&c| h.balanced(c as usize, total)).sum()
}

/// Prefix table of harmonic numbers `H_k = Σ_{i=1}^{k} 1/i`.
#[derive(Debug)]
pub struct HarmonicTable {
    prefix: Vec<f64>,
}

impl HarmonicTable {
    /// Table covering `H_0 ..= H_max`.
    pub fn new(max: usize) -> Self {
        let mut prefix = Vec::with_capacity(max + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for k in 1..=max {
            acc += 1.0 / k as f64;
            prefix.push(acc);
        }
        Self { prefix }
    }

    pub fn max(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn get(&self, k: usize) -> f64 {
        self.prefix[k]
    }

    fn balanced(&self, n: usize, total: usize) -> f64 {
        let tail = self.prefix[total + 2] - self.prefix[n + 1];
        (n as f64 + 1.0) / (total as f64 + 2.0) * tail
    }
}

static HARMONIC: OnceLock<RwLock<Arc<HarmonicTable>>> = OnceLock::new();

/// Shared table with at least `H_0 ..= H_max`. Grows by doubling; readers
/// always receive a complete, immutable table.
pub fn harmonic_table(max: usize) -> Arc<HarmonicTable> {
    let cell = HARMONIC.get_or_init(|| RwLock::new(Arc::new(HarmonicTable::new(4096))));
    {
        let table = cell.read().unwrap_or_else(|e| e.into_inner());
        if table.max() >= max {
            return Arc::clone(&table);
        }
    }
    let mut table = cell.write().unwrap_or_else(|e| e.into_inner());
    if table.max() < max {
        *table = Arc::new(HarmonicTable::new(max.next_power_of_two()));
    }
    Arc::clone(&table)
}
