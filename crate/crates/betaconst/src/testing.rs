//! The constant-beta hypothesis test over a multi-day window.
//!
//! Each day contributes the self-normalized block statistic S_d(b) from
//! [`crate::stats::day_statistic`]; blocks never straddle a day boundary. The
//! window statistic over T days is
//!
//! ```text
//! Z(b) = (S_1(b) + ... + S_T(b)) / sqrt(T)
//! ```
//!
//! which is asymptotically N(0,1) under the null hypothesis that the
//! regression coefficient equals b throughout the window, and diverges at
//! rate sqrt(n k) under a time-varying coefficient. The test is one-sided:
//! reject at level q when Z exceeds the upper q-quantile of N(0,1).
//!
//! `b` is either supplied ([`BetaMode::Known`]) or replaced by the pooled
//! window estimate from [`crate::stats::pooled_beta`] ([`BetaMode::Estimated`]),
//! which changes neither the null limit nor the divergence rate.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::stats::{
    beta_avar, day_statistic, pooled_beta, truncate, DayStatistic, DenominatorGuard,
    ObservationGrid, TruncationSpec,
};

/// Fraction of guard-skipped blocks above which a window's outcome is
/// flagged invalid.
const MAX_SKIPPED_FRACTION: f64 = 0.10;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Standard normal quantile; `p` must lie in (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Whether the tested beta is supplied or estimated from the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaMode {
    Known { value: f64 },
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestConfig {
    /// Block size k; the benchmark design uses 19 (two blocks per 38-step
    /// day).
    pub k_n: usize,
    pub beta: BetaMode,
    pub truncation: TruncationSpec,
    /// Significance levels in (0, 1]; level 1 always rejects.
    pub levels: Vec<f64>,
    pub guard: DenominatorGuard,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            k_n: 19,
            beta: BetaMode::Estimated,
            truncation: TruncationSpec::default(),
            levels: vec![0.10, 0.05, 0.01],
            guard: DenominatorGuard::default(),
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_n < 2 {
            return Err(Error::Config(format!(
                "block size must be at least 2, got {}",
                self.k_n
            )));
        }
        if let BetaMode::Known { value } = self.beta {
            if !value.is_finite() {
                return Err(Error::Config("known beta must be finite".into()));
            }
        }
        self.truncation.validate()?;
        if self.levels.is_empty() {
            return Err(Error::Config("at least one significance level required".into()));
        }
        for level in &self.levels {
            if !(*level > 0.0 && *level <= 1.0) {
                return Err(Error::Config(format!(
                    "significance levels must lie in (0, 1], got {level}"
                )));
            }
        }
        self.guard.validate()
    }
}

/// Decision at one significance level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelDecision {
    pub level: f64,
    /// Upper critical value Phi^{-1}(1 - level).
    pub critical: f64,
    pub reject: bool,
}

/// Pooled beta estimate with its plug-in variance and 95% confidence
/// interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledEstimate {
    pub beta: f64,
    /// Asymptotic variance of sqrt(N) (beta_hat - beta).
    pub avar: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    /// The window statistic Z(b).
    pub statistic: f64,
    /// One-sided upper-tail p-value.
    pub p_value: f64,
    pub decisions: Vec<LevelDecision>,
    /// The beta the statistic was evaluated at (known or pooled).
    pub beta_used: f64,
    /// Present when beta was estimated.
    pub pooled: Option<PooledEstimate>,
    /// statistic / sqrt(N k): estimates the divergence coefficient under a
    /// time-varying beta, and vanishes under the null.
    pub scaled_alternative: f64,
    pub days: Vec<DayStatistic>,
    pub skipped_blocks: usize,
    pub contributing_blocks: usize,
    /// False when more than 10% of the eligible blocks were guard-skipped.
    pub valid: bool,
}

/// Divergence-coefficient estimate: `statistic / sqrt(n_total * k)`.
pub fn scaled_alternative(statistic: f64, n_total: usize, k: usize) -> f64 {
    statistic / ((n_total * k) as f64).sqrt()
}

/// Run the constant-beta test on a window of days.
pub fn run_test(grid: &ObservationGrid, config: &TestConfig) -> Result<TestOutcome> {
    config.validate()?;
    let n = grid.n_per_day();
    if n / config.k_n < 2 {
        return Err(Error::Input(format!(
            "need at least 2 blocks per day: n = {n}, k = {}",
            config.k_n
        )));
    }

    let mut sets = Vec::with_capacity(grid.days());
    for day in 0..grid.days() {
        let (dx, dy) = grid.day_increments(day)?;
        sets.push(truncate(&dx, &dy, &config.truncation)?);
    }

    let (beta_used, pooled) = match config.beta {
        BetaMode::Known { value } => (value, None),
        BetaMode::Estimated => {
            let beta = pooled_beta(&sets)?;
            let avar = beta_avar(&sets, config.k_n)?;
            let n_total = (n * grid.days()) as f64;
            let half_width = normal_quantile(0.975) * (avar / n_total).sqrt();
            (
                beta,
                Some(PooledEstimate {
                    beta,
                    avar,
                    ci_low: beta - half_width,
                    ci_high: beta + half_width,
                }),
            )
        }
    };

    let mut days = Vec::with_capacity(grid.days());
    let mut sum = 0.0;
    let mut skipped = 0;
    let mut contributing = 0;
    for set in &sets {
        let day = day_statistic(set, beta_used, config.k_n, &config.guard)?;
        sum += day.value;
        skipped += day.skipped;
        contributing += day.contributing;
        days.push(day);
    }
    let statistic = sum / (grid.days() as f64).sqrt();
    let p_value = 1.0 - normal_cdf(statistic);

    let decisions = config
        .levels
        .iter()
        .map(|&level| {
            let critical = if level >= 1.0 {
                f64::NEG_INFINITY
            } else {
                normal_quantile(1.0 - level)
            };
            LevelDecision {
                level,
                critical,
                reject: statistic > critical,
            }
        })
        .collect();

    let eligible = skipped + contributing;
    let valid = eligible > 0 && (skipped as f64) <= MAX_SKIPPED_FRACTION * eligible as f64;

    Ok(TestOutcome {
        statistic,
        p_value,
        decisions,
        beta_used,
        pooled,
        scaled_alternative: scaled_alternative(statistic, n * grid.days(), config.k_n),
        days,
        skipped_blocks: skipped,
        contributing_blocks: contributing,
        valid,
    })
}

/// Rate-optimal block size for a beta path of Hölder regularity `alpha`:
/// `floor(n^((4a-1)/(4a+1)))`, clamped to [2, n/2]. Requires `alpha > 5/12`
/// (below that the bias from block averaging dominates at every block size).
pub fn suggest_block_size(n: usize, alpha: f64) -> Result<usize> {
    if !(alpha > 5.0 / 12.0) || !alpha.is_finite() {
        return Err(Error::Input(format!(
            "regularity must exceed 5/12, got {alpha}"
        )));
    }
    if n < 4 {
        return Err(Error::Input(format!("need n >= 4, got {n}")));
    }
    let exponent = (4.0 * alpha - 1.0) / (4.0 * alpha + 1.0);
    // powf can land a hair under an exact integer; nudge before flooring.
    let raw = ((n as f64).powf(exponent) + 1e-9).floor() as usize;
    Ok(raw.clamp(2, n / 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ThresholdMode;

    fn grid_from_increments(n: usize, days: usize, dx: &[f64], dy: &[f64]) -> ObservationGrid {
        assert_eq!(dx.len(), n * days);
        let cum = |d: &[f64]| {
            let mut out = Vec::with_capacity(d.len() + 1);
            out.push(0.0);
            let mut acc = 0.0;
            for v in d {
                acc += v;
                out.push(acc);
            }
            out
        };
        ObservationGrid::new(n, days, cum(dx), cum(dy)).unwrap()
    }

    fn no_truncation() -> TruncationSpec {
        TruncationSpec {
            mode: ThresholdMode::Off,
            varpi: 0.49,
        }
    }

    #[test]
    fn known_beta_hand_example() {
        let dx = [0.1, -0.2, 0.3, 0.1];
        let dy = [0.2, -0.1, 0.2, 0.0];
        let grid = grid_from_increments(4, 1, &dx, &dy);
        let config = TestConfig {
            k_n: 2,
            beta: BetaMode::Known { value: 0.5 },
            truncation: no_truncation(),
            ..TestConfig::default()
        };
        let out = run_test(&grid, &config).unwrap();
        // Single day: statistic = S = -2/15 (hand value from the stats
        // module), p = 1 - Phi(-0.13333) = 0.55303 from normal tables.
        assert!((out.statistic + 2.0 / 15.0).abs() < 1e-14);
        assert!((out.p_value - 0.553_03).abs() < 5e-4);
        assert!(out.decisions.iter().all(|d| !d.reject));
        assert!(out.pooled.is_none());
        assert_eq!(out.beta_used, 0.5);
        let scaled = out.statistic / 8f64.sqrt();
        assert_eq!(out.scaled_alternative, scaled);
        assert!(out.valid);
    }

    #[test]
    fn statistic_scales_with_window_days() {
        // Two identical days: Z = 2 S / sqrt(2) = sqrt(2) S.
        let dx = [0.1, -0.2, 0.3, 0.1];
        let dy = [0.2, -0.1, 0.2, 0.0];
        let rep = |d: &[f64]| [d, d].concat();
        let grid1 = grid_from_increments(4, 1, &dx, &dy);
        let grid2 = grid_from_increments(4, 2, &rep(&dx), &rep(&dy));
        let config = TestConfig {
            k_n: 2,
            beta: BetaMode::Known { value: 0.5 },
            truncation: no_truncation(),
            ..TestConfig::default()
        };
        let s1 = run_test(&grid1, &config).unwrap().statistic;
        let s2 = run_test(&grid2, &config).unwrap().statistic;
        assert!((s2 - 2f64.sqrt() * s1).abs() < 1e-14);
    }

    #[test]
    fn estimated_beta_on_noiseless_data() {
        // dy = 2 dx exactly: pooled beta is 2, residual variation is zero, so
        // every denominator dies and the window is flagged invalid.
        let dx = [0.1, -0.2, 0.3, 0.1];
        let dy: Vec<f64> = dx.iter().map(|v| 2.0 * v).collect();
        let grid = grid_from_increments(4, 1, &dx, &dy);
        let config = TestConfig {
            k_n: 2,
            truncation: no_truncation(),
            ..TestConfig::default()
        };
        let out = run_test(&grid, &config).unwrap();
        let pooled = out.pooled.unwrap();
        assert!((pooled.beta - 2.0).abs() < 1e-15);
        assert_eq!(pooled.avar, 0.0);
        assert!(!out.valid);
        assert_eq!(out.contributing_blocks, 0);
        assert_eq!(out.skipped_blocks, 1);
    }

    #[test]
    fn level_one_always_rejects() {
        let dx = [0.1, -0.2, 0.3, 0.1];
        let dy = [0.2, -0.1, 0.2, 0.0];
        let grid = grid_from_increments(4, 1, &dx, &dy);
        let config = TestConfig {
            k_n: 2,
            beta: BetaMode::Known { value: 0.5 },
            truncation: no_truncation(),
            levels: vec![1.0],
            ..TestConfig::default()
        };
        let out = run_test(&grid, &config).unwrap();
        assert!(out.decisions[0].reject);
        assert_eq!(out.decisions[0].critical, f64::NEG_INFINITY);
    }

    #[test]
    fn config_validation_rejects_bad_levels_and_blocks() {
        let mut config = TestConfig::default();
        config.levels = vec![0.0];
        assert!(config.validate().is_err());
        config.levels = vec![1.01];
        assert!(config.validate().is_err());
        config.levels = vec![];
        assert!(config.validate().is_err());

        let mut config = TestConfig::default();
        config.k_n = 1;
        assert!(config.validate().is_err());

        // k too large for the grid: fewer than 2 blocks per day.
        let grid = grid_from_increments(4, 1, &[0.1; 4], &[0.1; 4]);
        let config = TestConfig {
            k_n: 3,
            truncation: no_truncation(),
            ..TestConfig::default()
        };
        assert!(run_test(&grid, &config).is_err());
    }

    #[test]
    fn block_size_rule_matches_hand_values() {
        // alpha = 1: exponent 3/5, 1024^0.6 = 64.
        assert_eq!(suggest_block_size(1024, 1.0).unwrap(), 64);
        // alpha = 1/2: exponent 1/3, floor(1000^(1/3)) = 10.
        assert_eq!(suggest_block_size(1000, 0.5).unwrap(), 10);
        // Clamped to n/2 when the rule suggests nearly n.
        assert_eq!(suggest_block_size(38, 100.0).unwrap(), 19);
        // Clamped up to 2.
        assert_eq!(suggest_block_size(4, 0.45).unwrap(), 2);
        assert!(suggest_block_size(1024, 5.0 / 12.0).is_err());
        assert!(suggest_block_size(3, 1.0).is_err());
    }

    #[test]
    fn normal_helpers_match_tabulated_values() {
        // The cdf is an erf approximation good to ~1e-11; the quantile is
        // refined to machine precision.
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-10);
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_quantile(0.99) - 2.326_347_874_040_841).abs() < 1e-12);
    }
}
