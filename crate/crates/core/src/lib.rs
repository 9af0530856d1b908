//! Scaling (Hurst-type) exponents of short time series.
//!
//! The central estimator is the balanced estimator of diffusion entropy:
//! a series is mapped to the ensemble of overlapping window sums at each
//! window length `s`, the displacements are binned on a grid of fixed width,
//! and the entropy of the resulting histogram is computed with a per-bin
//! estimator that balances small-sample bias against variance. The slope of
//! entropy against `ln s` is the scaling exponent `δ`; for fractional
//! Gaussian noise `δ = H`.
//!
//! Modules, bottom-up:
//!
//! - [`series_io`]: loading series, return transforms, summary statistics.
//! - [`diffusion`]: window sums and histograms.
//! - [`entropy`]: naive, bias-corrected and balanced entropy estimators.
//! - [`fbm`]: exact fractional Gaussian noise / Brownian motion synthesis.
//! - [`scaling`]: entropy curves, slope fits, local scaling and transitions.
//! - [`calibration`]: Monte Carlo sampling distribution of `δ` over fBm ensembles.
//!
//! ```
//! use hurstlab::fbm::{generate, FbmConfig, FbmMethod};
//! use hurstlab::scaling::{analyze, ScalingConfig};
//!
//! let path = generate(&FbmConfig::new(0.7, 1000, 7, FbmMethod::Circulant)).unwrap();
//! let analysis = analyze(&path.increments, &ScalingConfig::default()).unwrap();
//! assert!((analysis.fit.delta - 0.7).abs() < 0.2);
//! ```

#![forbid(unsafe_code)]

pub mod calibration;
pub mod diffusion;
pub mod entropy;
mod error;
pub mod fbm;
pub mod scaling;
pub mod series_io;

pub use error::{Error, Result};
