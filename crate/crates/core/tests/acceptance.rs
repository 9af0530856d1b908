//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run alone with `cargo test -p hurstlab --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{balanced_term_by_quadrature, ols};
use hurstlab::calibration::{calibrate, certainty_curve, moments, CalibrationConfig};
use hurstlab::diffusion::Histogram;
use hurstlab::entropy::{balanced_term, corrected_entropy, naive_entropy, EstimatorKind};
use hurstlab::fbm::{derive_seed, fgn_autocovariance, generate, FbmConfig, FbmMethod};
use hurstlab::scaling::{
    analyze, detect_transitions, entropy_curve, fit_scaling, local_scaling, CurvePoint,
    EntropyCurve, LocalScalingConfig, ScalingConfig, DEFAULT_TRANSITION_THRESHOLD,
    DEFAULT_TRANSITION_WINDOW,
};
use hurstlab::series_io::RawSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn fgn(hurst: f64, n: usize, seed: u64) -> RawSeries {
    generate(&FbmConfig::new(hurst, n, seed, FbmMethod::Circulant))
        .unwrap()
        .increments
}

fn fgn_paths(hurst: f64, n: usize, count: usize, master: u64) -> Vec<RawSeries> {
    (0..count)
        .into_par_iter()
        .map(|i| fgn(hurst, n, derive_seed(master, i as u64)))
        .collect()
}

fn delta_of(x: &RawSeries) -> f64 {
    analyze(x, &ScalingConfig::default()).unwrap().fit.delta
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

// 1. fGn H = 0.7: per-path estimates at N = 650 and N = 4000.
fn criterion_1() -> Outcome {
    let short: Vec<f64> = fgn_paths(0.7, 650, 100, 101)
        .par_iter()
        .map(delta_of)
        .collect();
    let long: Vec<f64> = fgn_paths(0.7, 4000, 20, 102)
        .par_iter()
        .map(delta_of)
        .collect();
    let (m_short, m_long) = (mean(&short), mean(&long));
    let inside = short.iter().filter(|d| (0.60..=0.80).contains(*d)).count();
    let pass = (m_short - 0.70).abs() <= 0.03 && inside >= 90 && (m_long - 0.71).abs() <= 0.03;
    outcome(
        pass,
        format!(
            "(a) N=650 mean {m_short:.4} (target 0.70±0.03), {inside}/100 in [0.60,0.80]; \
             (b) N=4000 mean {m_long:.4} (target 0.71±0.03)"
        ),
    )
}

// 2. Naive entropy bends below balanced at large s.
fn criterion_2() -> Outcome {
    let paths = fgn_paths(0.7, 650, 100, 101);
    let results: Vec<(bool, bool)> = paths
        .par_iter()
        .map(|x| {
            let grid = ScalingConfig::default().grid(x.len()).unwrap();
            let curve =
                |k| entropy_curve(x, &ScalingConfig::default().with_estimator(k), &grid).unwrap();
            let naive = curve(EstimatorKind::Naive);
            let balanced = curve(EstimatorKind::Balanced);
            let last = grid.len() - 1;
            let below = naive.points[last].entropy < balanced.points[last].entropy;
            let (lo, hi) = (grid[grid.len() / 2], grid[last]);
            let flatter = fit_scaling(&naive, lo, hi).unwrap().delta
                < fit_scaling(&balanced, lo, hi).unwrap().delta;
            (below, flatter)
        })
        .collect();
    let below = results.iter().filter(|r| r.0).count();
    let flatter = results.iter().filter(|r| r.1).count();
    outcome(
        below == 100 && flatter >= 95,
        format!("naive < balanced at largest s on {below}/100 paths (need 100); smaller upper-half slope on {flatter}/100 (need ≥95)"),
    )
}

// 3. Sampling distribution at N = 650 for three Hurst exponents.
fn criterion_3() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, h) in [0.5, 0.6, 0.7].into_iter().enumerate() {
        let r = calibrate(&CalibrationConfig::new(h, 650, 1000, 300 + i as u64)).unwrap();
        let m = moments(&r.estimates);
        pass &= (m.mean - h).abs() < 0.02 && m.skewness.abs() < 0.5 && r.skipped.is_empty();
        parts.push(format!(
            "H={h}: mean {:.4} sd {:.4} skew {:+.3} kurt {:+.3}",
            m.mean, m.std, m.skewness, m.excess_kurtosis
        ));
    }
    outcome(pass, parts.join("; "))
}

// 4. Certainty level grows with length and saturates.
fn criterion_4() -> Outcome {
    let replicas = 500;
    let template = CalibrationConfig::new(0.7, 0, replicas, 400);
    let curve = certainty_curve(&template, &[200, 400, 650, 1000, 2000]).unwrap();
    let se = |p: f64| (p * (1.0 - p) / replicas as f64).sqrt();
    let monotone = curve.windows(2).all(|w| {
        let (p0, p1) = (w[0].1, w[1].1);
        p1 - p0 >= -2.0 * (se(p0).powi(2) + se(p1).powi(2)).sqrt()
    });
    let p = |len: usize| curve.iter().find(|c| c.0 == len).unwrap().1;
    let early = p(400) - p(200);
    let late = p(2000) - p(1000);
    let listing: Vec<String> = curve.iter().map(|(l, p)| format!("{l}:{p:.3}")).collect();
    outcome(
        monotone && late < early,
        format!(
            "p_conf {}; non-decreasing within 2 SE: {monotone}; Δ(1000→2000) {late:.3} < Δ(200→400) {early:.3}",
            listing.join(" ")
        ),
    )
}

// 5. Closed-form balanced term against quadrature of its integral form.
fn criterion_5() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for total in 1..=64u64 {
        for n in 0..=total {
            let err =
                (balanced_term(n, total).unwrap() - balanced_term_by_quadrature(n, total)).abs();
            worst = worst.max(err);
            pairs += 1;
        }
    }
    outcome(
        worst <= 1e-9,
        format!("{pairs} (n, total) pairs, max |error| {worst:.2e} (need ≤ 1e-9)"),
    )
}

// 6. Plug-in bias on a 5-bin distribution with 30 samples.
fn criterion_6() -> Outcome {
    let p: [f64; 5] = [0.1, 0.15, 0.2, 0.25, 0.3];
    let s_true = -p.iter().map(|q| q * q.ln()).sum::<f64>();
    let mut cdf = p;
    for i in 1..cdf.len() {
        cdf[i] += cdf[i - 1];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let (reps, total) = (10_000, 30);
    let (mut naive, mut corrected) = (0.0, 0.0);
    for _ in 0..reps {
        let mut counts = vec![0u64; 5];
        for _ in 0..total {
            let u: f64 = rng.random();
            counts[cdf.iter().position(|&c| u < c).unwrap_or(4)] += 1;
        }
        let h = Histogram::from_counts(counts).unwrap();
        naive += naive_entropy(&h).value;
        corrected += corrected_entropy(&h).value;
    }
    let (naive, corrected) = (naive / reps as f64, corrected / reps as f64);
    let closer = (corrected - s_true).abs() < (naive - s_true).abs();
    let residual = (corrected - s_true).abs();
    outcome(
        closer && residual < 0.01,
        format!("S_true {s_true:.5}, mean naive {naive:.5}, mean corrected {corrected:.5}, residual {residual:.5} (need < 0.01)"),
    )
}

// 7. Generator fidelity: autocovariance and variance growth.
fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for method in [FbmMethod::Circulant, FbmMethod::Hosking] {
        for (i, hurst) in [0.3, 0.7].into_iter().enumerate() {
            let paths: Vec<Vec<f64>> = (0..500u64)
                .into_par_iter()
                .map(|j| {
                    let seed = derive_seed(700 + i as u64, j);
                    generate(&FbmConfig::new(hurst, 1024, seed, method))
                        .unwrap()
                        .increments
                        .into_values()
                })
                .collect();
            let mut worst_z: f64 = 0.0;
            for k in 0..=5 {
                let est: Vec<f64> = paths
                    .iter()
                    .map(|x| {
                        (0..x.len() - k).map(|t| x[t] * x[t + k]).sum::<f64>()
                            / (x.len() - k) as f64
                    })
                    .collect();
                let m = mean(&est);
                let var = est.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (est.len() - 1) as f64;
                let se = (var / est.len() as f64).sqrt();
                worst_z = worst_z.max((m - fgn_autocovariance(k, hurst).unwrap()).abs() / se);
            }
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for t in 10..=1000 {
                let var = paths
                    .iter()
                    .map(|x| x[..t].iter().sum::<f64>().powi(2))
                    .sum::<f64>()
                    / paths.len() as f64;
                xs.push((t as f64).ln());
                ys.push(var.ln());
            }
            let slope = ols(&xs, &ys).0;
            pass &= worst_z <= 3.0 && (slope - 2.0 * hurst).abs() <= 0.1;
            parts.push(format!(
                "{method} H={hurst}: max |z| {worst_z:.2}, Var slope {slope:.3}"
            ));
        }
    }
    outcome(pass, parts.join("; "))
}

// 8. Independent Gaussian noise scales with exponent 1/2.
fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(800);
    let x: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let delta = delta_of(&RawSeries::new(x).unwrap());
    outcome(
        (delta - 0.5).abs() <= 0.05,
        format!("δ̂ {delta:.4} (target 0.5±0.05)"),
    )
}

// 9. Regime change from H = 0.55 to H = 0.85 at sample 1301.
fn criterion_9() -> Outcome {
    let change = 1301i64;
    let hits: Vec<String> = (0..10u64)
        .into_par_iter()
        .map(|seed| {
            let mut x = fgn(0.55, 1300, derive_seed(900, 2 * seed)).into_values();
            x.extend(fgn(0.85, 1300, derive_seed(900, 2 * seed + 1)).into_values());
            let local =
                local_scaling(&RawSeries::new(x).unwrap(), &LocalScalingConfig::default()).unwrap();
            let events = detect_transitions(
                &local,
                DEFAULT_TRANSITION_WINDOW,
                DEFAULT_TRANSITION_THRESHOLD,
            )
            .unwrap();
            events
                .iter()
                .filter(|e| e.magnitude > 0.15 && (e.t - change).abs() <= 120)
                .max_by(|a, b| a.magnitude.total_cmp(&b.magnitude))
                .map(|e| format!("t={} |Δ|={:.2}", e.t, e.magnitude))
                .unwrap_or_else(|| "miss".into())
        })
        .collect();
    let detected = hits.iter().filter(|h| *h != "miss").count();
    outcome(
        detected >= 8,
        format!(
            "detected on {detected}/10 seeds (need ≥8): [{}]",
            hits.join(", ")
        ),
    )
}

// 10. Exact line recovery and exact scale/shift invariance.
fn criterion_10() -> Outcome {
    let (a, b) = (0.37, 0.71);
    let points = (1..=40)
        .map(|s: usize| CurvePoint {
            s,
            entropy: a + b * (s as f64).ln(),
            total_trajectories: 1000,
            bin_count: 10,
        })
        .collect();
    let curve = EntropyCurve {
        points,
        estimator: EstimatorKind::Balanced,
        bin_fraction: 1.0,
        series_length: 1040,
    };
    let fit = fit_scaling(&curve, 1, 40).unwrap();
    let slope_err = ((fit.delta - b) / b).abs();
    let icpt_err = ((fit.intercept - a) / a).abs();
    let line_ok = slope_err <= 1e-12 && icpt_err <= 1e-12;

    // Noise quantized to 2^-24 so power-of-two scalings and 1/16 shifts
    // are exact in floating point.
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let q = (1u64 << 24) as f64;
    let cfg = ScalingConfig::default();
    let mut invariant = 0;
    let cases = 50;
    for _ in 0..cases {
        let x: Vec<f64> = (0..400)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (z * q).round() / q
            })
            .collect();
        let scale = 2f64.powi(rng.random_range(-20..20));
        let shift = rng.random_range(-1024..1024) as f64 / 16.0;
        let base = analyze(&RawSeries::new(x.clone()).unwrap(), &cfg)
            .unwrap()
            .fit
            .delta;
        let scaled = analyze(
            &RawSeries::new(x.iter().map(|v| v * scale).collect()).unwrap(),
            &cfg,
        )
        .unwrap()
        .fit
        .delta;
        let shifted = analyze(
            &RawSeries::new(x.iter().map(|v| v + shift).collect()).unwrap(),
            &cfg,
        )
        .unwrap()
        .fit
        .delta;
        if scaled == base && shifted == base {
            invariant += 1;
        }
    }
    outcome(
        line_ok && invariant == cases,
        format!(
            "line slope rel err {slope_err:.1e}, intercept rel err {icpt_err:.1e} (need ≤ 1e-12); \
             bit-exact scale+shift invariance on {invariant}/{cases} random inputs"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 fGn H=0.7 estimates at N=650 and N=4000", criterion_1),
        ("2 naive curve bends below balanced", criterion_2),
        ("3 sampling distribution at N=650", criterion_3),
        ("4 certainty curve trend", criterion_4),
        ("5 balanced term vs quadrature", criterion_5),
        ("6 plug-in bias law", criterion_6),
        ("7 fGn generator fidelity", criterion_7),
        ("8 Gaussian noise gives 0.5", criterion_8),
        ("9 structural break detection", criterion_9),
        ("10 exact recovery and invariance", criterion_10),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} criterion {name} ({:.1}s): {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
