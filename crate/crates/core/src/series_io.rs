//! Series ingestion, return transforms and summary statistics.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// An ordered, non-empty sequence of finite samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    values: Vec<f64>,
    label: Option<String>,
    origin: Option<String>,
}

impl RawSeries {
    /// Wraps `values`, rejecting empty input and non-finite samples.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("series has no values".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "value at index {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self {
            values,
            label: None,
            origin: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = Some(origin.into());
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn origin(&self) -> Option<&str> {
        self.origin.as_deref()
    }

    pub fn stats(&self) -> SeriesStats {
        SeriesStats::of(&self.values)
    }
}

/// Population mean and variance of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesStats {
    pub mean: f64,
    /// Divide-by-N variance.
    pub variance: f64,
    pub std: f64,
}

impl SeriesStats {
    /// Computes statistics on deviations from the first sample.
    ///
    /// Working relative to `values[0]` makes the variance exactly invariant
    /// under exact shifts of the data, and keeps cancellation small for
    /// series sitting far from zero.
    ///
    /// `values` must be non-empty.
    pub fn of(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "stats of an empty slice");
        let anchor = values[0];
        let n = values.len() as f64;
        let mean_dev = values.iter().map(|v| v - anchor).sum::<f64>() / n;
        let variance = values
            .iter()
            .map(|v| {
                let d = (v - anchor) - mean_dev;
                d * d
            })
            .sum::<f64>()
            / n;
        Self {
            mean: anchor + mean_dev,
            variance,
            std: variance.sqrt(),
        }
    }
}

/// On-disk layout of a series file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeriesFormat {
    /// One value per line; blank lines and lines starting with `#` are skipped.
    Plain,
    /// Headed CSV, the named column is read.
    Csv { column: String },
}

/// Reads a series from `path`.
pub fn load_series(path: impl AsRef<Path>, format: &SeriesFormat) -> Result<RawSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let series = match format {
        SeriesFormat::Plain => parse_plain(BufReader::new(file)),
        SeriesFormat::Csv { column } => parse_csv(file, column),
    }
    .map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })?;
    Ok(series.with_origin(path.display().to_string()))
}

/// Parses the plain one-value-per-line format.
pub fn parse_plain<R: BufRead>(reader: R) -> Result<RawSeries> {
    let mut values = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| Error::Io {
            path: "<input>".into(),
            source,
        })?;
        let token = line.trim();
        if token.is_empty() || token.starts_with('#') {
            continue;
        }
        values.push(parse_value(token, line_no)?);
    }
    finish(values)
}

/// Parses a headed CSV and extracts `column`.
pub fn parse_csv<R: Read>(reader: R, column: &str) -> Result<RawSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let col = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::MissingColumn(column.to_string()))?;

    let mut values = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(e)),
        }
        let line_no = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let token = record.get(col).ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("row has no field for column `{column}`"),
        })?;
        values.push(parse_value(token, line_no)?);
    }
    finish(values)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: "<input>".into(),
            source,
        },
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn parse_value(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("`{token}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("`{token}` is not a finite number"),
        });
    }
    Ok(v)
}

fn finish(values: Vec<f64>) -> Result<RawSeries> {
    if values.is_empty() {
        return Err(Error::EmptyInput("no values were parsed".into()));
    }
    RawSeries::new(values)
}

/// Writes `series` in the plain format using shortest round-trip decimals,
/// preceded by `header` lines (each prefixed with `# `).
pub fn write_plain<W: Write>(
    mut w: W,
    series: &RawSeries,
    header: &[String],
) -> std::io::Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    for v in series.values() {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

/// How a price series is turned into returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnMode {
    /// `log_b(p(t+Δt) / p(t))`.
    #[default]
    LogRatio,
    /// `log_b(p(t+Δt)) / log_b(p(t))`, the ratio of logarithms.
    Literal,
}

impl fmt::Display for ReturnMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReturnMode::LogRatio => "log_ratio",
            ReturnMode::Literal => "literal",
        })
    }
}

impl FromStr for ReturnMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "log_ratio" => Ok(ReturnMode::LogRatio),
            "literal" => Ok(ReturnMode::Literal),
            other => Err(format!("unknown return mode `{other}`")),
        }
    }
}

/// Default return horizon: five trading days.
pub const DEFAULT_DELTA_T: usize = 5;

/// Builds the `Δt`-step return series of `prices`. Output length is
/// `prices.len() - delta_t`.
pub fn compute_returns(
    prices: &RawSeries,
    delta_t: usize,
    base: f64,
    mode: ReturnMode,
) -> Result<RawSeries> {
    if delta_t == 0 {
        return Err(Error::Range("delta_t must be a positive integer".into()));
    }
    if !(base.is_finite() && base > 1.0) {
        return Err(Error::Range(format!("log base must exceed 1, got {base}")));
    }
    let p = prices.values();
    if delta_t >= p.len() {
        return Err(Error::InsufficientData(format!(
            "delta_t = {delta_t} needs more than {delta_t} prices, got {}",
            p.len()
        )));
    }
    if let Some(i) = p.iter().position(|&v| v <= 0.0) {
        return Err(Error::Domain(format!(
            "price at index {i} is not positive ({})",
            p[i]
        )));
    }
    let ln_base = base.ln();
    let out: Vec<f64> = match mode {
        ReturnMode::LogRatio => p
            .iter()
            .zip(&p[delta_t..])
            .map(|(now, later)| (later / now).ln() / ln_base)
            .collect(),
        ReturnMode::Literal => {
            if let Some(i) = p[..p.len() - delta_t].iter().position(|&v| v == 1.0) {
                return Err(Error::Domain(format!(
                    "price at index {i} equals 1; its logarithm is a zero denominator"
                )));
            }
            // log_b(a) / log_b(c) is base-independent
            p.iter()
                .zip(&p[delta_t..])
                .map(|(now, later)| later.ln() / now.ln())
                .collect()
        }
    };
    let mut series = RawSeries::new(out)?;
    if let Some(label) = prices.label() {
        series = series.with_label(format!("{label}:returns"));
    }
    Ok(series)
}
