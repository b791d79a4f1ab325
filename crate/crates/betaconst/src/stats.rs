//! Truncated-increment block statistics.
//!
//! All statistics operate on one trading day of n log-price increments
//! (dx_i, dy_i), i = 1..n, split into floor(n/k) non-overlapping blocks of k
//! consecutive increments; trailing increments beyond the last full block are
//! ignored. Jumps are removed by a hard threshold: increment i is kept when
//! both |dx_i| and |dy_i| are at or below their thresholds (see [`truncate`]).
//! With kept-increment indicator 1{i}:
//!
//! ```text
//! C_j(b)  = n/sqrt(k) * sum_{i in block j} dx_i (dy_i - b dx_i) 1{i}
//! V1_j    = n/k * sum_{i in block j} dx_i^2 1{i}
//! V2_j(b) = n/k * sum_{i in block j} (dy_i - b dx_i)^2 1{i}
//! T_j(b)  = (C_j(b)^2 - V1_j V2_j(b)) / (V1_{j-1} V2_{j-1}(b)),   j >= 2
//! S(b)    = sqrt(k/(2n)) * sum_{j >= 2} T_j(b)
//! ```
//!
//! Dividing by the previous block's variation product keeps each T_j a
//! martingale difference under the null, which makes S(b) asymptotically
//! standard normal when the regression coefficient of Y on X is constant and
//! equal to b; under a time-varying coefficient S(b) grows like
//! sqrt(n k) times a weighted average of the squared deviation from b.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Paired log-price series on an equidistant grid, `days * n_per_day + 1`
/// points per asset. Day d's increments are differences over points
/// `d*n ..= (d+1)*n`, so consecutive days share their boundary point and no
/// overnight increment exists.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationGrid {
    n_per_day: usize,
    days: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl ObservationGrid {
    pub fn new(n_per_day: usize, days: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n_per_day == 0 || days == 0 {
            return Err(Error::Input("grid needs at least one day and one step".into()));
        }
        let points = days * n_per_day + 1;
        if x.len() != points || y.len() != points {
            return Err(Error::Input(format!(
                "grid expects {points} points per series, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
            return Err(Error::Input("grid values must be finite".into()));
        }
        Ok(Self { n_per_day, days, x, y })
    }

    pub fn n_per_day(&self) -> usize {
        self.n_per_day
    }

    pub fn days(&self) -> usize {
        self.days
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// The n increments of one day (0-based day index).
    pub fn day_increments(&self, day: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if day >= self.days {
            return Err(Error::Input(format!(
                "day {day} out of range (have {} days)",
                self.days
            )));
        }
        let start = day * self.n_per_day;
        let diff = |s: &[f64]| {
            (start..start + self.n_per_day)
                .map(|i| s[i + 1] - s[i])
                .collect::<Vec<f64>>()
        };
        Ok((diff(&self.x), diff(&self.y)))
    }
}

/// How jump-truncation thresholds are chosen. The kept set is
/// `|dx_i| <= a_x * (1/n)^varpi` and `|dy_i| <= a_y * (1/n)^varpi` where n is
/// the number of increments in the day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdMode {
    /// Explicit per-asset scale constants a_x, a_y.
    Fixed { alpha_x: f64, alpha_y: f64 },
    /// Scale constants set to `c` times the square root of the day's bipower
    /// variation, per asset, so the threshold tracks the local volatility.
    Adaptive { c: f64 },
    /// Keep every increment.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationSpec {
    pub mode: ThresholdMode,
    /// Threshold exponent, in (0, 1/2); close to 1/2 removes jumps most
    /// aggressively while keeping the diffusive part.
    pub varpi: f64,
}

impl Default for TruncationSpec {
    fn default() -> Self {
        Self {
            mode: ThresholdMode::Adaptive { c: 4.0 },
            varpi: 0.49,
        }
    }
}

impl TruncationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.varpi > 0.0 && self.varpi < 0.5) {
            return Err(Error::Config(format!(
                "varpi must lie in (0, 1/2), got {}",
                self.varpi
            )));
        }
        match self.mode {
            ThresholdMode::Fixed { alpha_x, alpha_y } => {
                if !(alpha_x > 0.0 && alpha_x.is_finite() && alpha_y > 0.0 && alpha_y.is_finite()) {
                    return Err(Error::Config("fixed thresholds must be positive".into()));
                }
            }
            ThresholdMode::Adaptive { c } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::Config(format!(
                        "adaptive threshold multiple must be positive, got {c}"
                    )));
                }
            }
            ThresholdMode::Off => {}
        }
        Ok(())
    }
}

/// One day of increments with the jump-truncation mask applied to them.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSet {
    dx: Vec<f64>,
    dy: Vec<f64>,
    keep: Vec<bool>,
    retained: usize,
    threshold_x: f64,
    threshold_y: f64,
}

impl IncrementSet {
    /// Number of increments in the day, n; the grid spacing is 1/n of a day.
    pub fn len(&self) -> usize {
        self.dx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dx.is_empty()
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn retained(&self) -> usize {
        self.retained
    }

    pub fn thresholds(&self) -> (f64, f64) {
        (self.threshold_x, self.threshold_y)
    }
}

/// Realized bipower variation, a jump-robust estimate of the day's integrated
/// variance: `pi/2 * sum |d_i| |d_{i-1}|`.
fn bipower_variation(d: &[f64]) -> f64 {
    PI / 2.0 * d.windows(2).map(|w| w[0].abs() * w[1].abs()).sum::<f64>()
}

/// Apply jump truncation to one day of increments.
pub fn truncate(dx: &[f64], dy: &[f64], spec: &TruncationSpec) -> Result<IncrementSet> {
    spec.validate()?;
    if dx.len() != dy.len() {
        return Err(Error::Input(format!(
            "increment series lengths differ: {} vs {}",
            dx.len(),
            dy.len()
        )));
    }
    if dx.is_empty() {
        return Err(Error::Input("empty increment series".into()));
    }
    if !dx.iter().chain(dy.iter()).all(|v| v.is_finite()) {
        return Err(Error::Input("increments must be finite".into()));
    }

    let n = dx.len() as f64;
    let delta_pow = (1.0 / n).powf(spec.varpi);
    let (threshold_x, threshold_y) = match spec.mode {
        ThresholdMode::Fixed { alpha_x, alpha_y } => (alpha_x * delta_pow, alpha_y * delta_pow),
        ThresholdMode::Adaptive { c } => {
            if dx.len() < 2 {
                return Err(Error::Input(
                    "adaptive truncation needs at least two increments".into(),
                ));
            }
            let bv_x = bipower_variation(dx);
            let bv_y = bipower_variation(dy);
            if bv_x <= 0.0 || bv_y <= 0.0 {
                return Err(Error::Degenerate(
                    "zero bipower variation; cannot set adaptive threshold".into(),
                ));
            }
            (c * bv_x.sqrt() * delta_pow, c * bv_y.sqrt() * delta_pow)
        }
        ThresholdMode::Off => (f64::INFINITY, f64::INFINITY),
    };

    let keep: Vec<bool> = dx
        .iter()
        .zip(dy.iter())
        .map(|(a, b)| a.abs() <= threshold_x && b.abs() <= threshold_y)
        .collect();
    let retained = keep.iter().filter(|k| **k).count();
    Ok(IncrementSet {
        dx: dx.to_vec(),
        dy: dy.to_vec(),
        keep,
        retained,
        threshold_x,
        threshold_y,
    })
}

fn block_range(inc: &IncrementSet, j: usize, k: usize) -> Result<std::ops::Range<usize>> {
    if k == 0 {
        return Err(Error::Input("block size must be positive".into()));
    }
    let blocks = inc.len() / k;
    if j == 0 || j > blocks {
        return Err(Error::Input(format!(
            "block {j} out of range (have {blocks} blocks of size {k})"
        )));
    }
    Ok((j - 1) * k..j * k)
}

/// Truncated block covariation statistic C_j(b); j is 1-based.
pub fn block_c(inc: &IncrementSet, b: f64, j: usize, k: usize) -> Result<f64> {
    let range = block_range(inc, j, k)?;
    let n = inc.len() as f64;
    let mut sum = 0.0;
    for i in range {
        if inc.keep[i] {
            sum += inc.dx[i] * (inc.dy[i] - b * inc.dx[i]);
        }
    }
    Ok(n / (k as f64).sqrt() * sum)
}

/// Truncated block variation of X, V1_j; j is 1-based.
pub fn block_v1(inc: &IncrementSet, j: usize, k: usize) -> Result<f64> {
    let range = block_range(inc, j, k)?;
    let n = inc.len() as f64;
    let mut sum = 0.0;
    for i in range {
        if inc.keep[i] {
            sum += inc.dx[i] * inc.dx[i];
        }
    }
    Ok(n / k as f64 * sum)
}

/// Truncated block variation of the residual Y - bX, V2_j(b); j is 1-based.
pub fn block_v2(inc: &IncrementSet, b: f64, j: usize, k: usize) -> Result<f64> {
    let range = block_range(inc, j, k)?;
    let n = inc.len() as f64;
    let mut sum = 0.0;
    for i in range {
        if inc.keep[i] {
            let r = inc.dy[i] - b * inc.dx[i];
            sum += r * r;
        }
    }
    Ok(n / k as f64 * sum)
}

/// Per-block summary produced by [`day_statistic`]. `t` is `None` for the
/// first block (no predecessor) and for blocks skipped by the denominator
/// guard.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    /// 1-based block index within the day.
    pub index: usize,
    pub c: f64,
    pub v1: f64,
    pub v2: f64,
    /// Product V1_j * V2_j, the self-normalization denominator offered to the
    /// next block.
    pub v: f64,
    /// Within-block uncentered R^2 of the residual regression,
    /// C_j^2 / (k V1_j V2_j); 0 for blocks with no retained variation.
    pub r_squared: f64,
    /// Retained increments in the block.
    pub retained: usize,
    pub t: Option<f64>,
}

/// What to do when a previous-block denominator V1_{j-1} V2_{j-1} falls below
/// the floor: drop that block's T_j (recorded, so windows with many skips can
/// be flagged) or fail the whole day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardPolicy {
    Skip,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DenominatorGuard {
    pub floor: f64,
    pub policy: GuardPolicy,
}

impl Default for DenominatorGuard {
    fn default() -> Self {
        Self {
            floor: 1e-12,
            policy: GuardPolicy::Skip,
        }
    }
}

impl DenominatorGuard {
    pub fn validate(&self) -> Result<()> {
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return Err(Error::Config(format!(
                "guard floor must be positive, got {}",
                self.floor
            )));
        }
        Ok(())
    }
}

/// One day's aggregated statistic S(b) plus per-block detail.
#[derive(Debug, Clone, PartialEq)]
pub struct DayStatistic {
    /// sqrt(k/(2n)) times the sum of retained T_j.
    pub value: f64,
    pub blocks: Vec<BlockStats>,
    /// Blocks dropped by the denominator guard.
    pub skipped: usize,
    /// Blocks whose T_j entered the sum.
    pub contributing: usize,
}

/// Compute all block statistics and the day-level statistic S(b).
pub fn day_statistic(
    inc: &IncrementSet,
    b: f64,
    k: usize,
    guard: &DenominatorGuard,
) -> Result<DayStatistic> {
    guard.validate()?;
    if !b.is_finite() {
        return Err(Error::Input("beta must be finite".into()));
    }
    if k == 0 {
        return Err(Error::Input("block size must be positive".into()));
    }
    let n = inc.len();
    let blocks_in_day = n / k;
    if blocks_in_day < 2 {
        return Err(Error::Input(format!(
            "need at least 2 blocks per day, got {blocks_in_day} (n = {n}, k = {k})"
        )));
    }

    let mut blocks: Vec<BlockStats> = Vec::with_capacity(blocks_in_day);
    let mut sum_t = 0.0;
    let mut skipped = 0;
    let mut contributing = 0;
    for j in 1..=blocks_in_day {
        let c = block_c(inc, b, j, k)?;
        let v1 = block_v1(inc, j, k)?;
        let v2 = block_v2(inc, b, j, k)?;
        let v = v1 * v2;
        let r_squared = if v > 0.0 { c * c / (k as f64 * v) } else { 0.0 };
        let range = block_range(inc, j, k)?;
        let retained = range.filter(|i| inc.keep[*i]).count();

        let t = if j >= 2 {
            let prev_v = blocks[j - 2].v;
            if prev_v < guard.floor {
                match guard.policy {
                    GuardPolicy::Skip => {
                        skipped += 1;
                        None
                    }
                    GuardPolicy::Error => {
                        return Err(Error::Degenerate(format!(
                            "block {} denominator {prev_v:e} below guard floor",
                            j - 1
                        )));
                    }
                }
            } else {
                let t = (c * c - v) / prev_v;
                sum_t += t;
                contributing += 1;
                Some(t)
            }
        } else {
            None
        };

        blocks.push(BlockStats {
            index: j,
            c,
            v1,
            v2,
            v,
            r_squared,
            retained,
            t,
        });
    }

    let scale = (k as f64 / (2.0 * n as f64)).sqrt();
    Ok(DayStatistic {
        value: scale * sum_t,
        blocks,
        skipped,
        contributing,
    })
}

/// Pooled (window-wide) truncated least-squares beta:
/// `sum dx dy 1{kept} / sum dx^2 1{kept}` over all days.
pub fn pooled_beta(days: &[IncrementSet]) -> Result<f64> {
    if days.is_empty() {
        return Err(Error::Input("no days supplied".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for day in days {
        for i in 0..day.len() {
            if day.keep[i] {
                num += day.dx[i] * day.dy[i];
                den += day.dx[i] * day.dx[i];
            }
        }
    }
    if den <= 0.0 {
        return Err(Error::Degenerate(
            "no retained variation in X; pooled beta undefined".into(),
        ));
    }
    Ok(num / den)
}

/// Plug-in asymptotic variance of the pooled beta estimator. Block-level spot
/// estimates (sigma^2 from V1, a block least-squares beta, and the residual
/// variance at that block beta) feed Riemann sums of the limit variance
///
/// ```text
/// V_beta = [ D A^2 + 2 B^2 Q - 4 B E A ] / A^4
/// A = mean(v1)        Q = mean(v1^2)        B = mean(beta_j v1)
/// E = mean(beta_j v1^2)   D = mean(2 beta_j^2 v1^2 + v1 v2_j)
/// ```
///
/// so that `(beta_hat - beta) ~ N(0, V_beta / N)` with N the total number of
/// observations in the window. The value is clamped at 0. Blocks with no
/// retained X variation are skipped.
pub fn beta_avar(days: &[IncrementSet], k: usize) -> Result<f64> {
    if days.is_empty() {
        return Err(Error::Input("no days supplied".into()));
    }
    if k == 0 {
        return Err(Error::Input("block size must be positive".into()));
    }
    let (mut m1, mut m2, mut mb, mut me, mut md) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut used = 0usize;
    for day in days {
        let blocks_in_day = day.len() / k;
        if blocks_in_day < 2 {
            return Err(Error::Input(format!(
                "need at least 2 blocks per day, got {blocks_in_day}"
            )));
        }
        for j in 1..=blocks_in_day {
            let range = block_range(day, j, k)?;
            let (mut sxx, mut sxy) = (0.0, 0.0);
            for i in range {
                if day.keep[i] {
                    sxx += day.dx[i] * day.dx[i];
                    sxy += day.dx[i] * day.dy[i];
                }
            }
            if sxx <= 0.0 {
                continue;
            }
            let spot_beta = sxy / sxx;
            let v1 = block_v1(day, j, k)?;
            let v2 = block_v2(day, spot_beta, j, k)?;
            m1 += v1;
            m2 += v1 * v1;
            mb += spot_beta * v1;
            me += spot_beta * v1 * v1;
            md += 2.0 * spot_beta * spot_beta * v1 * v1 + v1 * v2;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::Degenerate(
            "every block degenerate; variance plug-in undefined".into(),
        ));
    }
    let w = used as f64;
    let (m1, m2, mb, me, md) = (m1 / w, m2 / w, mb / w, me / w, md / w);
    if m1 <= 0.0 {
        return Err(Error::Degenerate("zero retained variation in X".into()));
    }
    let v = (md * m1 * m1 + 2.0 * mb * mb * m2 - 4.0 * mb * me * m1) / (m1 * m1 * m1 * m1);
    Ok(v.max(0.0))
}

/// Uncentered R^2 between dx and the residual dy - b dx over the kept
/// increments of one day; n times this is the per-day dependence diagnostic.
pub fn sample_r_squared(inc: &IncrementSet, b: f64) -> Result<f64> {
    if !b.is_finite() {
        return Err(Error::Input("beta must be finite".into()));
    }
    let (mut sxx, mut srr, mut sxr) = (0.0, 0.0, 0.0);
    for i in 0..inc.len() {
        if inc.keep[i] {
            let r = inc.dy[i] - b * inc.dx[i];
            sxx += inc.dx[i] * inc.dx[i];
            srr += r * r;
            sxr += inc.dx[i] * r;
        }
    }
    if sxx <= 0.0 || srr <= 0.0 {
        return Err(Error::Degenerate(
            "no retained variation; R^2 undefined".into(),
        ));
    }
    // Cauchy-Schwarz bounds this by 1; clamp float spill.
    Ok((sxr * sxr / (sxx * srr)).min(1.0))
}
