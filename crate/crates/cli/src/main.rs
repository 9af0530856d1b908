//! `hurstlab` command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hurstlab::calibration::{
    calibrate, certainty_curve, CalibrationConfig, DEFAULT_DELTA_H, DEFAULT_REPLICAS,
};
use hurstlab::diffusion::DEFAULT_BIN_FRACTION;
use hurstlab::entropy::EstimatorKind;
use hurstlab::fbm::{derive_seed, generate, FbmConfig, FbmMethod};
use hurstlab::scaling::{
    analyze, detect_transitions_with_lag, entropy_curve, fit_scaling, histograms, local_scaling,
    EntropyCurve, LocalScalingConfig, ScalingConfig, ScalingFit, DEFAULT_SEGMENT_LENGTH,
    DEFAULT_TRANSITION_THRESHOLD, DEFAULT_TRANSITION_WINDOW, MIN_TRAJECTORIES,
};
use hurstlab::series_io::{
    compute_returns, load_series, parse_csv, parse_plain, write_plain, RawSeries, ReturnMode,
    SeriesFormat, DEFAULT_DELTA_T,
};

/// Scaling exponents of short time series by diffusion entropy.
#[derive(Debug, Parser)]
#[command(name = "hurstlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Entropy curve and scaling fit of one series.
    Analyze(AnalyzeArgs),
    /// Sliding-segment scaling exponent and transition events.
    Local(LocalArgs),
    /// Monte Carlo sampling distribution of the estimate on synthetic fGn.
    Calibrate(CalibrateArgs),
    /// Synthesize fractional Gaussian noise or its running sum.
    Synth(SynthArgs),
    /// Entropy curves and fits of all three estimators side by side.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Plain,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Returns {
    None,
    #[value(name = "log_ratio")]
    LogRatio,
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Estimator {
    Naive,
    Corrected,
    Balanced,
}

impl From<Estimator> for EstimatorKind {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::Naive => EstimatorKind::Naive,
            Estimator::Corrected => EstimatorKind::Corrected,
            Estimator::Balanced => EstimatorKind::Balanced,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Circulant,
    Hosking,
}

impl From<Method> for FbmMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Circulant => FbmMethod::Circulant,
            Method::Hosking => FbmMethod::Hosking,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SeriesKind {
    Increments,
    Path,
}

#[derive(Debug, Clone, Args, Serialize)]
struct InputArgs {
    /// Input series file; `-` reads standard input.
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// Input layout.
    #[arg(long, value_enum, default_value_t = Format::Plain)]
    format: Format,
    /// Column to read when --format csv.
    #[arg(long, default_value = "value")]
    column: String,
    /// Treat the input as prices and analyze their Δt-step returns.
    #[arg(long, value_enum, default_value_t = Returns::None)]
    returns: Returns,
    /// Return horizon Δt, used with --returns.
    #[arg(long, default_value_t = DEFAULT_DELTA_T)]
    delta_t: usize,
    /// Logarithm base for returns; must exceed 1.
    #[arg(long, default_value_t = std::f64::consts::E, allow_negative_numbers = true)]
    log_base: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
struct ScalingArgs {
    /// Bin width as a multiple of the series standard deviation.
    #[arg(long, default_value_t = DEFAULT_BIN_FRACTION, allow_negative_numbers = true)]
    bin_fraction: f64,
    /// Keep zero-count bins between the extreme displacements.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    include_empty_bins: bool,
    /// Lower end of the fit window [default: first grid point, 1].
    #[arg(long)]
    s_min: Option<usize>,
    /// Largest window length in the grid [default: min(20, N/4)].
    #[arg(long)]
    s_max: Option<usize>,
    /// Thin the window grid geometrically above s = 64.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    thin_grid: bool,
}

impl ScalingArgs {
    fn config(&self, estimator: EstimatorKind) -> Result<ScalingConfig, Failure> {
        positive("--bin-fraction", self.bin_fraction)?;
        if self.s_min == Some(0) {
            return Err(Failure::Usage("--s-min must be at least 1".into()));
        }
        Ok(ScalingConfig {
            estimator,
            bin_fraction: self.bin_fraction,
            include_empty_bins: self.include_empty_bins,
            min_trajectories: MIN_TRAJECTORIES,
            s_max: self.s_max,
            s_min: self.s_min,
            thin_grid: self.thin_grid,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct OutputArgs {
    /// JSON result destination; `-` writes standard output.
    #[arg(long, default_value = "-")]
    output: PathBuf,
    /// Also write the curve or per-window series as CSV to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Entropy estimator.
    #[arg(long, value_enum, default_value_t = Estimator::Balanced)]
    estimator: Estimator,
    #[command(flatten)]
    scaling: ScalingArgs,
    #[command(flatten)]
    out: OutputArgs,
    /// Write every histogram as CSV (s, bin_index, left_edge, count).
    #[arg(long)]
    dump_histograms: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LocalArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Entropy estimator.
    #[arg(long, value_enum, default_value_t = Estimator::Balanced)]
    estimator: Estimator,
    #[command(flatten)]
    scaling: ScalingArgs,
    #[command(flatten)]
    out: OutputArgs,
    /// Samples per segment.
    #[arg(long, default_value_t = DEFAULT_SEGMENT_LENGTH)]
    segment_length: usize,
    /// Reported index is the segment end minus this offset.
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    offset: i64,
    /// Step between consecutive segment ends.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Transition detector averaging window, in samples.
    #[arg(long, default_value_t = DEFAULT_TRANSITION_WINDOW)]
    window: usize,
    /// Minimum |mean difference| of the exponent for an event.
    #[arg(long, default_value_t = DEFAULT_TRANSITION_THRESHOLD, allow_negative_numbers = true)]
    threshold: f64,
    /// Gap between the before and after windows, in samples
    /// [default: segment length - 1].
    #[arg(long)]
    lag: Option<usize>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Hurst exponent of the synthetic replicas.
    #[arg(long, allow_negative_numbers = true)]
    hurst: f64,
    /// Replica length.
    #[arg(long, default_value_t = DEFAULT_SEGMENT_LENGTH)]
    length: usize,
    /// Number of replicas.
    #[arg(long, default_value_t = DEFAULT_REPLICAS)]
    replicas: usize,
    /// Half-width of the certainty interval around --hurst.
    #[arg(long, default_value_t = DEFAULT_DELTA_H, allow_negative_numbers = true)]
    delta_h: f64,
    /// Master seed; replica i uses a seed derived from (seed, i).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// fGn synthesis method.
    #[arg(long, value_enum, default_value_t = Method::Circulant)]
    method: Method,
    /// Also compute the certainty level at these lengths (comma separated).
    #[arg(long, value_delimiter = ',')]
    lengths: Vec<usize>,
    /// Entropy estimator.
    #[arg(long, value_enum, default_value_t = Estimator::Balanced)]
    estimator: Estimator,
    #[command(flatten)]
    scaling: ScalingArgs,
    /// JSON result destination; `-` writes standard output.
    #[arg(long, default_value = "-")]
    output: PathBuf,
    /// Write the per-replica estimates as CSV (replica, seed, delta).
    #[arg(long)]
    dump_estimates: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Hurst exponent in (0, 1).
    #[arg(long, allow_negative_numbers = true)]
    hurst: f64,
    /// Number of samples.
    #[arg(long)]
    length: usize,
    /// RNG seed; equal seeds give bit-identical series.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// fGn synthesis method.
    #[arg(long, value_enum, default_value_t = Method::Circulant)]
    method: Method,
    /// Write the noise or its running sum.
    #[arg(long, value_enum, default_value_t = SeriesKind::Increments)]
    series: SeriesKind,
    /// Series destination; `-` writes standard output.
    #[arg(long, default_value = "-")]
    output: PathBuf,
    /// Provenance JSON destination [default: <output>.json; none for stdout].
    #[arg(long)]
    provenance: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    scaling: ScalingArgs,
    #[command(flatten)]
    out: OutputArgs,
}

/// Failure classes mapped to exit codes 1 and 2.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl From<hurstlab::Error> for Failure {
    fn from(e: hurstlab::Error) -> Self {
        if e.is_data_error() {
            Failure::Data(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn positive(flag: &str, v: f64) -> Result<(), Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "{flag} must be a positive number, got {v}"
        )))
    }
}

fn usage(flag: &str) -> impl FnOnce(hurstlab::Error) -> Failure + '_ {
    move |e| match e {
        hurstlab::Error::Range(msg) => Failure::Usage(format!("{flag}: {msg}")),
        other => other.into(),
    }
}

fn is_stdio(p: &Path) -> bool {
    p.as_os_str() == "-"
}

fn create(path: &Path) -> Result<Box<dyn Write>, Failure> {
    if is_stdio(path) {
        return Ok(Box::new(BufWriter::new(io::stdout().lock())));
    }
    let f = File::create(path)
        .map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn write_failed(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Data(format!("cannot write {}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(io::Error::from)
        .and_then(|_| writeln!(w))
        .and_then(|_| w.flush())
        .map_err(write_failed(path))
}

/// Writes `rows` as CSV preceded by a `# config: {...}` comment line.
fn write_csv<C: Serialize>(
    path: &Path,
    config: &C,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), Failure> {
    let mut w = create(path)?;
    let line = serde_json::to_string(config).expect("config serializes");
    writeln!(w, "# config: {line}").map_err(write_failed(path))?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(header)
        .and_then(|_| rows.into_iter().try_for_each(|r| csv.write_record(&r)))
        .and_then(|_| csv.flush().map_err(csv::Error::from))
        .map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

fn read_input(args: &InputArgs) -> Result<RawSeries, Failure> {
    let format = match args.format {
        Format::Plain => SeriesFormat::Plain,
        Format::Csv => SeriesFormat::Csv {
            column: args.column.clone(),
        },
    };
    let series = if is_stdio(&args.input) {
        let stdin = io::stdin().lock();
        match &format {
            SeriesFormat::Plain => parse_plain(stdin),
            SeriesFormat::Csv { column } => parse_csv(stdin, column),
        }
        .map(|s| s.with_origin("<stdin>"))
    } else {
        load_series(&args.input, &format)
    };
    let series = series.map_err(|e| match e {
        hurstlab::Error::Parse { line, message } => Failure::Data(format!(
            "{}: parse error at line {line}: {message}",
            args.input.display()
        )),
        other => other.into(),
    })?;
    let mode = match args.returns {
        Returns::None => return Ok(series),
        Returns::LogRatio => ReturnMode::LogRatio,
        Returns::Literal => ReturnMode::Literal,
    };
    if args.delta_t == 0 {
        return Err(Failure::Usage(
            "--delta-t must be a positive integer".into(),
        ));
    }
    if !(args.log_base.is_finite() && args.log_base > 1.0) {
        return Err(Failure::Usage(format!(
            "--log-base must exceed 1, got {}",
            args.log_base
        )));
    }
    Ok(compute_returns(&series, args.delta_t, args.log_base, mode)?)
}

/// Grid for a series of length `n`, with --s-max errors attributed to the flag.
fn grid_for(cfg: &ScalingConfig, n: usize) -> Result<Vec<usize>, Failure> {
    let grid = cfg.grid(n).map_err(usage("--s-max"))?;
    if let Some(s) = cfg.s_min {
        if s >= *grid.last().unwrap() {
            return Err(Failure::Usage(format!(
                "--s-min {s} leaves fewer than two grid points (largest s is {})",
                grid.last().unwrap()
            )));
        }
    }
    Ok(grid)
}

/// The scaling settings with grid bounds materialized for a given length.
#[derive(Debug, Serialize)]
struct ResolvedScaling {
    #[serde(skip_serializing_if = "Option::is_none")]
    estimator: Option<EstimatorKind>,
    bin_fraction: f64,
    include_empty_bins: bool,
    min_trajectories: usize,
    s_min: usize,
    s_max: usize,
    thin_grid: bool,
}

fn resolve(cfg: &ScalingConfig, grid: &[usize], with_estimator: bool) -> ResolvedScaling {
    ResolvedScaling {
        estimator: with_estimator.then_some(cfg.estimator),
        bin_fraction: cfg.bin_fraction,
        include_empty_bins: cfg.include_empty_bins,
        min_trajectories: cfg.min_trajectories,
        s_min: cfg.s_min.unwrap_or(grid[0]),
        s_max: *grid.last().unwrap(),
        thin_grid: cfg.thin_grid,
    }
}

#[derive(Debug, Serialize)]
struct RunConfig<'a, E: Serialize> {
    subcommand: &'static str,
    version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<&'a InputArgs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    series_length: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scaling: Option<ResolvedScaling>,
    #[serde(flatten)]
    extra: E,
}

#[derive(Debug, Serialize)]
struct NoExtra {}

fn curve_rows(curve: &EntropyCurve) -> impl Iterator<Item = Vec<String>> + '_ {
    curve.points.iter().map(|p| {
        vec![
            p.s.to_string(),
            p.ln_s().to_string(),
            p.entropy.to_string(),
            p.total_trajectories.to_string(),
            p.bin_count.to_string(),
        ]
    })
}

fn run_analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let scaling = args.scaling.config(args.estimator.into())?;
    let series = read_input(&args.input)?;
    let grid = grid_for(&scaling, series.len())?;
    let config = RunConfig {
        subcommand: "analyze",
        version: env!("CARGO_PKG_VERSION"),
        input: Some(&args.input),
        series_length: Some(series.len()),
        scaling: Some(resolve(&scaling, &grid, true)),
        extra: NoExtra {},
    };
    let analysis = analyze(&series, &scaling)?;
    log::info!(
        "delta = {:.4} over s = {}..={}",
        analysis.fit.delta,
        analysis.fit.s_min,
        analysis.fit.s_max
    );

    if let Some(path) = &args.out.csv {
        write_csv(
            path,
            &config,
            &["s", "ln_s", "entropy", "total_trajectories", "bin_count"],
            curve_rows(&analysis.curve),
        )?;
    }
    if let Some(path) = &args.dump_histograms {
        let hists = histograms(&series, &scaling, &grid)?;
        let rows = hists.iter().flat_map(|(s, h)| {
            h.rows().map(move |(j, edge, c)| {
                vec![
                    s.to_string(),
                    j.to_string(),
                    edge.to_string(),
                    c.to_string(),
                ]
            })
        });
        write_csv(
            path,
            &config,
            &["s", "bin_index", "left_edge", "count"],
            rows,
        )?;
    }
    #[derive(Serialize)]
    struct Report<'a, C> {
        config: C,
        fit: &'a ScalingFit,
    }
    write_json(
        &args.out.output,
        &Report {
            config: &config,
            fit: &analysis.fit,
        },
    )
}

fn run_local(args: &LocalArgs) -> Result<(), Failure> {
    let scaling = args.scaling.config(args.estimator.into())?;
    if args.segment_length == 0 {
        return Err(Failure::Usage("--segment-length must be positive".into()));
    }
    if args.stride == 0 {
        return Err(Failure::Usage("--stride must be positive".into()));
    }
    if args.window == 0 {
        return Err(Failure::Usage("--window must be positive".into()));
    }
    positive("--threshold", args.threshold)?;
    let series = read_input(&args.input)?;
    let grid = grid_for(&scaling, args.segment_length).map_err(|e| match e {
        Failure::Data(msg) => Failure::Usage(format!("--segment-length: {msg}")),
        usage => usage,
    })?;
    let lag = args.lag.unwrap_or(args.segment_length - 1);

    #[derive(Serialize)]
    struct Extra {
        segment_length: usize,
        offset: i64,
        stride: usize,
        window: usize,
        threshold: f64,
        lag: usize,
    }
    let config = RunConfig {
        subcommand: "local",
        version: env!("CARGO_PKG_VERSION"),
        input: Some(&args.input),
        series_length: Some(series.len()),
        scaling: Some(resolve(&scaling, &grid, true)),
        extra: Extra {
            segment_length: args.segment_length,
            offset: args.offset,
            stride: args.stride,
            window: args.window,
            threshold: args.threshold,
            lag,
        },
    };
    let local = local_scaling(
        &series,
        &LocalScalingConfig {
            segment_length: args.segment_length,
            offset: args.offset,
            stride: args.stride,
            scaling,
        },
    )?;
    let transitions = detect_transitions_with_lag(&local, args.window, args.threshold, lag)?;
    log::info!(
        "{} local points, {} transitions",
        local.points.len(),
        transitions.len()
    );

    if let Some(path) = &args.out.csv {
        let rows = local.points.iter().map(|p| {
            vec![
                p.t.to_string(),
                p.delta.to_string(),
                p.r_squared.to_string(),
                p.stderr_delta.to_string(),
            ]
        });
        write_csv(
            path,
            &config,
            &["t", "delta", "r_squared", "stderr_delta"],
            rows,
        )?;
    }
    #[derive(Serialize)]
    struct Report<'a, C, T> {
        config: C,
        points: usize,
        transitions: &'a [T],
    }
    write_json(
        &args.out.output,
        &Report {
            config: &config,
            points: local.points.len(),
            transitions: &transitions,
        },
    )
}

fn run_calibrate(args: &CalibrateArgs) -> Result<(), Failure> {
    let scaling = args.scaling.config(args.estimator.into())?;
    if args.replicas == 0 {
        return Err(Failure::Usage("--replicas must be at least 1".into()));
    }
    positive("--delta-h", args.delta_h)?;
    FbmConfig::new(args.hurst, args.length, args.seed, args.method.into())
        .validate()
        .map_err(usage("--hurst/--length"))?;
    let grid = grid_for(&scaling, args.length).map_err(|e| match e {
        Failure::Data(msg) => Failure::Usage(format!("--length: {msg}")),
        usage => usage,
    })?;
    let cfg = CalibrationConfig {
        hurst: args.hurst,
        length: args.length,
        replicas: args.replicas,
        delta_h: args.delta_h,
        master_seed: args.seed,
        method: args.method.into(),
        scaling,
    };
    #[derive(Serialize)]
    struct Extra<'a> {
        hurst: f64,
        length: usize,
        replicas: usize,
        delta_h: f64,
        master_seed: u64,
        method: FbmMethod,
        lengths: &'a [usize],
    }
    let config = RunConfig {
        subcommand: "calibrate",
        version: env!("CARGO_PKG_VERSION"),
        input: None,
        series_length: None,
        scaling: Some(resolve(&cfg.scaling, &grid, true)),
        extra: Extra {
            hurst: cfg.hurst,
            length: cfg.length,
            replicas: cfg.replicas,
            delta_h: cfg.delta_h,
            master_seed: cfg.master_seed,
            method: cfg.method,
            lengths: &args.lengths,
        },
    };
    let result = calibrate(&cfg)?;
    log::info!(
        "mean {:.4}, std {:.4}, p_conf {:.3}",
        result.mean,
        result.std,
        result.p_conf
    );
    let curve = if args.lengths.is_empty() {
        None
    } else {
        Some(certainty_curve(&cfg, &args.lengths)?)
    };

    if let Some(path) = &args.dump_estimates {
        let skipped: std::collections::HashSet<usize> =
            result.skipped.iter().map(|s| s.index).collect();
        let rows = (0..cfg.replicas)
            .filter(|i| !skipped.contains(i))
            .zip(&result.estimates)
            .map(|(i, d)| {
                vec![
                    i.to_string(),
                    derive_seed(cfg.master_seed, i as u64).to_string(),
                    d.to_string(),
                ]
            });
        write_csv(path, &config, &["replica", "seed", "delta"], rows)?;
    }
    #[derive(Serialize)]
    struct Point {
        length: usize,
        p_conf: f64,
    }
    #[derive(Serialize)]
    struct Report<'a, C> {
        config: C,
        #[serde(flatten)]
        result: &'a hurstlab::calibration::CalibrationResult,
        #[serde(skip_serializing_if = "Option::is_none")]
        certainty_curve: Option<Vec<Point>>,
    }
    write_json(
        &args.output,
        &Report {
            config: &config,
            result: &result,
            certainty_curve: curve.map(|c| {
                c.into_iter()
                    .map(|(length, p_conf)| Point { length, p_conf })
                    .collect()
            }),
        },
    )
}

fn run_synth(args: &SynthArgs) -> Result<(), Failure> {
    let path = generate(&FbmConfig::new(
        args.hurst,
        args.length,
        args.seed,
        args.method.into(),
    ))
    .map_err(usage("--hurst/--length"))?;
    let provenance = path.provenance();

    #[derive(Serialize)]
    struct Sidecar<'a, P> {
        subcommand: &'static str,
        version: &'static str,
        series: SeriesKind,
        #[serde(flatten)]
        provenance: &'a P,
    }
    let sidecar = Sidecar {
        subcommand: "synth",
        version: env!("CARGO_PKG_VERSION"),
        series: args.series,
        provenance: &provenance,
    };
    let series = match args.series {
        SeriesKind::Increments => &path.increments,
        SeriesKind::Path => &path.path,
    };
    let header = vec![format!(
        "config: {}",
        serde_json::to_string(&sidecar).expect("provenance serializes")
    )];
    let mut w = create(&args.output)?;
    write_plain(&mut w, series, &header)
        .and_then(|_| w.flush())
        .map_err(write_failed(&args.output))?;

    let sidecar_path = match &args.provenance {
        Some(p) => Some(p.clone()),
        None if is_stdio(&args.output) => None,
        None => {
            let mut p = args.output.clone().into_os_string();
            p.push(".json");
            Some(PathBuf::from(p))
        }
    };
    if let Some(p) = sidecar_path {
        write_json(&p, &sidecar)?;
    }
    Ok(())
}

fn run_compare(args: &CompareArgs) -> Result<(), Failure> {
    let base = args.scaling.config(EstimatorKind::Balanced)?;
    let series = read_input(&args.input)?;
    let grid = grid_for(&base, series.len())?;
    let config = RunConfig {
        subcommand: "compare",
        version: env!("CARGO_PKG_VERSION"),
        input: Some(&args.input),
        series_length: Some(series.len()),
        scaling: Some(resolve(&base, &grid, false)),
        extra: NoExtra {},
    };
    let s_min = base.s_min.unwrap_or(grid[0]);
    let s_max = *grid.last().unwrap();
    let mut curves = Vec::new();
    let mut fits = serde_json::Map::new();
    for kind in EstimatorKind::ALL {
        let curve = entropy_curve(&series, &base.clone().with_estimator(kind), &grid)?;
        let fit = fit_scaling(&curve, s_min, s_max)?;
        fits.insert(
            kind.as_str().to_owned(),
            serde_json::to_value(fit).expect("fit serializes"),
        );
        curves.push(curve);
    }
    if let Some(path) = &args.out.csv {
        let rows = curves.iter().flat_map(|c| {
            c.points.iter().map(move |p| {
                vec![
                    p.s.to_string(),
                    p.ln_s().to_string(),
                    p.entropy.to_string(),
                    c.estimator.as_str().to_owned(),
                    p.total_trajectories.to_string(),
                    p.bin_count.to_string(),
                ]
            })
        });
        write_csv(
            path,
            &config,
            &[
                "s",
                "ln_s",
                "entropy",
                "estimator",
                "total_trajectories",
                "bin_count",
            ],
            rows,
        )?;
    }
    #[derive(Serialize)]
    struct Report<C> {
        config: C,
        fits: serde_json::Map<String, serde_json::Value>,
    }
    write_json(
        &args.out.output,
        &Report {
            config: &config,
            fits,
        },
    )
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("HURSTLAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Usage(format!(
            "HURSTLAB_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot configure {threads} threads: {e}")))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    init_threads()?;
    match &cli.command {
        Command::Analyze(a) => run_analyze(a),
        Command::Local(a) => run_local(a),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Synth(a) => run_synth(a),
        Command::Compare(a) => run_compare(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
