//! Exact synthesis of fractional Gaussian noise and fractional Brownian motion.
//!
//! Increments are unit-variance fGn with autocovariance
//!
//! ```text
//! γ(k) = ½ (|k+1|^{2H} − 2|k|^{2H} + |k−1|^{2H})
//! ```
//!
//! and the path is their running sum. Two exact methods are available:
//! circulant embedding (Davies–Harte, `O(n log n)`) and Hosking's recursive
//! conditional sampling via Durbin–Levinson (`O(n²)`).
//!
//! Randomness comes from ChaCha20 seeded with [`rand::SeedableRng::seed_from_u64`];
//! normals use the `rand_distr` ziggurat sampler. The combination is named by
//! [`RNG_ALGORITHM`] and is part of every provenance record.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::series_io::RawSeries;
use crate::{Error, Result};

/// Identifier of the random stream used by [`generate`].
pub const RNG_ALGORITHM: &str = "chacha20/rand_distr-0.5-ziggurat-normal";

/// Relative tolerance below which negative embedding eigenvalues are
/// treated as rounding noise.
const EIGEN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FbmMethod {
    #[default]
    Circulant,
    Hosking,
}

impl fmt::Display for FbmMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FbmMethod::Circulant => "circulant",
            FbmMethod::Hosking => "hosking",
        })
    }
}

impl FromStr for FbmMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "circulant" => Ok(FbmMethod::Circulant),
            "hosking" => Ok(FbmMethod::Hosking),
            other => Err(format!(
                "unknown method `{other}` (expected circulant or hosking)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbmConfig {
    pub hurst: f64,
    pub length: usize,
    pub seed: u64,
    pub method: FbmMethod,
}

impl FbmConfig {
    pub fn new(hurst: f64, length: usize, seed: u64, method: FbmMethod) -> Self {
        Self {
            hurst,
            length,
            seed,
            method,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst)?;
        if self.length < 2 {
            return Err(Error::Range(format!(
                "fBm length must be at least 2, got {}",
                self.length
            )));
        }
        Ok(())
    }
}

/// One synthetic sample path.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    /// Fractional Gaussian noise, `γ(0) = 1`.
    pub increments: RawSeries,
    /// Running sum of the increments.
    pub path: RawSeries,
    pub config: FbmConfig,
    /// Method that actually produced the sample; differs from
    /// `config.method` only after a circulant fallback.
    pub method_used: FbmMethod,
}

/// Provenance record written next to synthesized series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub hurst: f64,
    pub length: usize,
    pub seed: u64,
    pub method: FbmMethod,
    pub method_used: FbmMethod,
    pub rng: &'static str,
}

impl FbmPath {
    pub fn provenance(&self) -> Provenance {
        Provenance {
            hurst: self.config.hurst,
            length: self.config.length,
            seed: self.config.seed,
            method: self.config.method,
            method_used: self.method_used,
            rng: RNG_ALGORITHM,
        }
    }
}

fn check_hurst(hurst: f64) -> Result<()> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(Error::Range(format!(
            "Hurst parameter must lie in (0, 1), got {hurst}"
        )))
    }
}

/// Autocovariance of unit-variance fGn at lag `k`.
pub fn fgn_autocovariance(k: usize, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    Ok(autocov(k, hurst))
}

fn autocov(k: usize, hurst: f64) -> f64 {
    let two_h = 2.0 * hurst;
    let k = k as f64;
    let lower = if k == 0.0 {
        1.0
    } else {
        (k - 1.0).abs().powf(two_h)
    };
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + lower)
}

/// Per-replica seed: SplitMix64 finaliser applied to `master ^ index`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ index)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws one fBm path. Identical configs give bit-identical output.
pub fn generate(config: &FbmConfig) -> Result<FbmPath> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let (increments, method_used) = match config.method {
        FbmMethod::Hosking => (
            hosking(config.hurst, config.length, &mut rng),
            FbmMethod::Hosking,
        ),
        FbmMethod::Circulant => match circulant(config.hurst, config.length, &mut rng) {
            Some(x) => (x, FbmMethod::Circulant),
            None => {
                log::warn!(
                    "circulant embedding has negative eigenvalues for H = {}, n = {}; falling back to Hosking",
                    config.hurst,
                    config.length
                );
                (
                    hosking(config.hurst, config.length, &mut rng),
                    FbmMethod::Hosking,
                )
            }
        },
    };
    let path: Vec<f64> = increments
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    Ok(FbmPath {
        increments: RawSeries::new(increments)?.with_origin("synthetic"),
        path: RawSeries::new(path)?.with_origin("synthetic"),
        config: *config,
        method_used,
    })
}

/// Eigenvalues of the circulant embedding of `γ(0..=n)`, or `None` when the
/// embedding is not non-negative definite.
fn embedding_eigenvalues(hurst: f64, n: usize) -> Option<Vec<f64>> {
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let lag = if j <= n { j } else { m - j };
            Complex::new(autocov(lag, hurst), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut row);
    let max = row.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    let mut eig = Vec::with_capacity(m);
    for c in &row {
        if c.re < -EIGEN_TOLERANCE * max {
            return None;
        }
        eig.push(c.re.max(0.0));
    }
    Some(eig)
}

fn circulant(hurst: f64, n: usize, rng: &mut ChaCha20Rng) -> Option<Vec<f64>> {
    let eig = embedding_eigenvalues(hurst, n)?;
    let m = eig.len();
    let mut w: Vec<Complex<f64>> = eig
        .iter()
        .map(|&lambda| {
            let scale = (lambda / m as f64).sqrt();
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex::new(scale * re, scale * im)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut w);
    Some(w[..n].iter().map(|c| c.re).collect())
}

fn hosking(hurst: f64, n: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let gamma: Vec<f64> = (0..n).map(|k| autocov(k, hurst)).collect();
    let mut x = Vec::with_capacity(n);
    let z0: f64 = StandardNormal.sample(rng);
    x.push(z0 * gamma[0].sqrt());

    // phi holds the order-t prediction coefficients φ_{t,1..t}
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut next: Vec<f64> = Vec::with_capacity(n);
    let mut v = gamma[0];
    for t in 1..n {
        let num = gamma[t]
            - phi
                .iter()
                .enumerate()
                .map(|(j, p)| p * gamma[t - 1 - j])
                .sum::<f64>();
        let reflection = num / v;
        next.clear();
        next.extend((0..t - 1).map(|j| phi[j] - reflection * phi[t - 2 - j]));
        next.push(reflection);
        std::mem::swap(&mut phi, &mut next);
        v *= 1.0 - reflection * reflection;

        let mean: f64 = phi.iter().enumerate().map(|(j, p)| p * x[t - 1 - j]).sum();
        let z: f64 = StandardNormal.sample(rng);
        x.push(mean + v.max(0.0).sqrt() * z);
    }
    x
}
