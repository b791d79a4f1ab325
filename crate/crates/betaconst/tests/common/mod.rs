//! Shared helpers for the integration suites.
//!
//! `reference_test` is a deliberately naive, from-the-definitions
//! reimplementation of the whole statistic pipeline (plain index loops, no
//! shared code with the library) used as an equivalence oracle. The rest are
//! generic numerics: Kolmogorov-Smirnov distances, Simpson quadrature for the
//! divergence limit, moment helpers, and a random-instance generator.

#![allow(dead_code)]

use betaconst::stats::ObservationGrid;
use betaconst::stats::{DenominatorGuard, ThresholdMode, TruncationSpec};
use betaconst::testing::{normal_cdf, BetaMode, TestConfig};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

/// Block detail of the reference pipeline.
#[derive(Debug, Clone)]
pub struct RefBlock {
    pub c: f64,
    pub v1: f64,
    pub v2: f64,
    /// None for block 1 and guard-skipped blocks.
    pub t: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RefDay {
    pub value: f64,
    pub blocks: Vec<RefBlock>,
    pub skipped: usize,
    pub contributing: usize,
}

#[derive(Debug, Clone)]
pub struct RefOutcome {
    pub beta: f64,
    pub statistic: f64,
    pub scaled_alternative: f64,
    pub days: Vec<RefDay>,
}

/// Threshold selection mirrored from the definitions, not the library code.
#[derive(Debug, Clone, Copy)]
pub enum RefThreshold {
    Fixed { alpha_x: f64, alpha_y: f64 },
    Adaptive { c: f64 },
    Off,
}

/// Straight-line implementation of the full statistic from the displays:
/// per-day truncation mask, block sums, self-normalized block ratios, the
/// day statistic sqrt(k/(2n)) * sum_{j>=2} T_j, the 1/sqrt(T) window
/// aggregation, and the pooled least-squares beta when `beta` is None.
pub fn reference_test(
    x: &[f64],
    y: &[f64],
    n_per_day: usize,
    k: usize,
    beta: Option<f64>,
    threshold: RefThreshold,
    varpi: f64,
    guard_floor: f64,
) -> RefOutcome {
    let n = n_per_day;
    let days = (x.len() - 1) / n;
    assert_eq!(x.len(), days * n + 1, "levels must cover whole days");

    // Per-day increments and keep masks.
    let mut day_dx: Vec<Vec<f64>> = Vec::new();
    let mut day_dy: Vec<Vec<f64>> = Vec::new();
    let mut day_keep: Vec<Vec<bool>> = Vec::new();
    for d in 0..days {
        let mut dx = Vec::with_capacity(n);
        let mut dy = Vec::with_capacity(n);
        for i in 0..n {
            dx.push(x[d * n + i + 1] - x[d * n + i]);
            dy.push(y[d * n + i + 1] - y[d * n + i]);
        }
        let delta_pow = (1.0 / n as f64).powf(varpi);
        let (tx, ty) = match threshold {
            RefThreshold::Fixed { alpha_x, alpha_y } => (alpha_x * delta_pow, alpha_y * delta_pow),
            RefThreshold::Adaptive { c } => {
                let bipower = |d: &[f64]| {
                    let mut s = 0.0;
                    for i in 1..d.len() {
                        s += d[i].abs() * d[i - 1].abs();
                    }
                    std::f64::consts::PI / 2.0 * s
                };
                (
                    c * bipower(&dx).sqrt() * delta_pow,
                    c * bipower(&dy).sqrt() * delta_pow,
                )
            }
            RefThreshold::Off => (f64::INFINITY, f64::INFINITY),
        };
        let keep: Vec<bool> = (0..n)
            .map(|i| dx[i].abs() <= tx && dy[i].abs() <= ty)
            .collect();
        day_dx.push(dx);
        day_dy.push(dy);
        day_keep.push(keep);
    }

    // Pooled least-squares beta over every kept increment of the window.
    let b = beta.unwrap_or_else(|| {
        let mut num = 0.0;
        let mut den = 0.0;
        for d in 0..days {
            for i in 0..n {
                if day_keep[d][i] {
                    num += day_dx[d][i] * day_dy[d][i];
                    den += day_dx[d][i] * day_dx[d][i];
                }
            }
        }
        num / den
    });

    let blocks_per_day = n / k;
    let mut out_days = Vec::with_capacity(days);
    let mut sum_days = 0.0;
    for d in 0..days {
        let mut blocks = Vec::with_capacity(blocks_per_day);
        let mut sum_t = 0.0;
        let mut skipped = 0;
        let mut contributing = 0;
        for j in 1..=blocks_per_day {
            let mut c_sum = 0.0;
            let mut v1_sum = 0.0;
            let mut v2_sum = 0.0;
            for i in (j - 1) * k..j * k {
                if day_keep[d][i] {
                    let dx = day_dx[d][i];
                    let r = day_dy[d][i] - b * dx;
                    c_sum += dx * r;
                    v1_sum += dx * dx;
                    v2_sum += r * r;
                }
            }
            let c = n as f64 / (k as f64).sqrt() * c_sum;
            let v1 = n as f64 / k as f64 * v1_sum;
            let v2 = n as f64 / k as f64 * v2_sum;
            let t = if j >= 2 {
                let prev: &RefBlock = &blocks[j - 2];
                let denom = prev.v1 * prev.v2;
                if denom < guard_floor {
                    skipped += 1;
                    None
                } else {
                    let t = (c * c - v1 * v2) / denom;
                    sum_t += t;
                    contributing += 1;
                    Some(t)
                }
            } else {
                None
            };
            blocks.push(RefBlock { c, v1, v2, t });
        }
        let value = (k as f64 / (2.0 * n as f64)).sqrt() * sum_t;
        sum_days += value;
        out_days.push(RefDay {
            value,
            blocks,
            skipped,
            contributing,
        });
    }

    let statistic = sum_days / (days as f64).sqrt();
    RefOutcome {
        beta: b,
        statistic,
        scaled_alternative: statistic / ((days * n * k) as f64).sqrt(),
        days: out_days,
    }
}

/// Kolmogorov-Smirnov distance of a sample against the standard normal.
pub fn ks_normal(sample: &[f64]) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut dist = 0.0f64;
    for (i, v) in sorted.iter().enumerate() {
        let f = normal_cdf(*v);
        dist = dist.max((f - i as f64 / n).abs());
        dist = dist.max((f - (i as f64 + 1.0) / n).abs());
    }
    dist
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut dist = 0.0f64;
    while i < sa.len() && j < sb.len() {
        if sa[i] <= sb[j] {
            i += 1;
        } else {
            j += 1;
        }
        dist = dist.max((i as f64 / na - j as f64 / nb).abs());
    }
    dist
}

/// Simpson quadrature of `f` over [0, 1].
pub fn simpson(f: impl Fn(f64) -> f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = 1.0 / m as f64;
    let mut acc = f(0.0) + f(1.0);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

/// Divergence limit of the scaled statistic for deterministic paths
/// (time in window-fraction units): with beta-bar the variance-weighted beta
/// average, the limit is
///
/// ```text
/// (1/sqrt(2)) * Int_0^1 (beta_s - bbar)^2 s2_s / ((beta_s - bbar)^2 s2_s + s2t_s) ds
/// ```
pub fn alternative_limit(
    beta: impl Fn(f64) -> f64 + Copy,
    sigma2: impl Fn(f64) -> f64 + Copy,
    sigma2_tilde: impl Fn(f64) -> f64 + Copy,
) -> f64 {
    let weight = simpson(|s| sigma2(s), 20_000);
    let bbar = simpson(|s| beta(s) * sigma2(s), 20_000) / weight;
    let integrand = |s: f64| {
        let dev = (beta(s) - bbar) * (beta(s) - bbar) * sigma2(s);
        dev / (dev + sigma2_tilde(s))
    };
    simpson(integrand, 20_000) / 2.0f64.sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Relative closeness with an absolute floor of 1, suitable for values whose
/// natural scale is order one or larger.
pub fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// A random test instance: a small multi-day grid with jumps sprinkled in,
/// plus a config drawn over threshold modes, block sizes, and beta handling.
pub struct Instance {
    pub grid: ObservationGrid,
    pub config: TestConfig,
    /// The same threshold mode in reference vocabulary.
    pub threshold: RefThreshold,
}

pub fn random_instance(seed: u64, max_n: usize) -> Instance {
    let mut rng = StdRng::seed_from_u64(seed);
    let k = rng.random_range(2..=8usize);
    let max_blocks = (max_n / k).max(2);
    let blocks = rng.random_range(2..=max_blocks.min(6));
    let leftover = rng.random_range(0..k);
    let n = (k * blocks + leftover).min(max_n);
    let days = rng.random_range(1..=3usize);

    let beta = rng.random_range(-2.0..2.0);
    let sigma = rng.random_range(0.5..2.0);
    let sigma_tilde = rng.random_range(0.2..2.0);
    let scale = 1.0 / (n as f64).sqrt();

    let mut x = vec![0.0f64];
    let mut y = vec![0.0f64];
    for _ in 0..days * n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let w: f64 = StandardNormal.sample(&mut rng);
        let mut dx = sigma * z * scale;
        let mut dy = beta * dx + sigma_tilde * w * scale;
        // Occasional co-jumps and idiosyncratic jumps.
        if rng.random_bool(0.02) {
            dx += rng.random_range(3.0..10.0) * sigma * scale * rng.random_range(-1.0f64..1.0).signum();
        }
        if rng.random_bool(0.02) {
            dy += rng.random_range(3.0..10.0) * sigma_tilde * scale * rng.random_range(-1.0f64..1.0).signum();
        }
        x.push(x.last().unwrap() + dx);
        y.push(y.last().unwrap() + dy);
    }
    let grid = ObservationGrid::new(n, days, x, y).expect("generated grid is well formed");

    let threshold = match rng.random_range(0..3) {
        0 => RefThreshold::Off,
        1 => RefThreshold::Adaptive {
            c: rng.random_range(2.0..6.0),
        },
        _ => RefThreshold::Fixed {
            alpha_x: rng.random_range(0.5..3.0) * sigma,
            alpha_y: rng.random_range(0.5..3.0) * sigma_tilde.max(sigma * beta.abs()),
        },
    };
    let varpi = rng.random_range(0.40..0.49);
    let beta_mode = if rng.random_bool(0.5) {
        BetaMode::Estimated
    } else {
        BetaMode::Known {
            value: beta + rng.random_range(-0.3..0.3),
        }
    };
    // Mostly the tiny default floor; occasionally a high floor that forces
    // guard skips so the skip accounting is exercised end to end.
    let floor = if rng.random_bool(0.2) { 0.3 } else { 1e-12 };

    let mode = match threshold {
        RefThreshold::Fixed { alpha_x, alpha_y } => ThresholdMode::Fixed { alpha_x, alpha_y },
        RefThreshold::Adaptive { c } => ThresholdMode::Adaptive { c },
        RefThreshold::Off => ThresholdMode::Off,
    };
    let config = TestConfig {
        k_n: k,
        beta: beta_mode,
        truncation: TruncationSpec { mode, varpi },
        guard: DenominatorGuard {
            floor,
            policy: betaconst::stats::GuardPolicy::Skip,
        },
        ..TestConfig::default()
    };
    Instance {
        grid,
        config,
        threshold,
    }
}
