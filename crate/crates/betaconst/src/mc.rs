//! Monte Carlo size and power harness.
//!
//! Simulates many independent windows under either hypothesis, runs the
//! constant-beta test on each, and tabulates rejection rates per window
//! length and significance level with binomial error bars. Under the null
//! the spot beta is pinned at 1; under the alternative it follows a
//! square-root diffusion with the same parameters as the variance factors,
//! started at its long-run mean.
//!
//! Replication seeds are derived from `base_seed` by a splitmix64-style
//! counter hash, so replication `r` of window index `w` can be re-run in
//! isolation and the aggregate report is identical for any number of worker
//! threads: results are collected in replication order and tallied
//! sequentially.
//!
//! Windows that produce no usable statistic (every increment truncated, or
//! too many guarded blocks) are excluded from the rate denominator and
//! surfaced in the `invalid` count, never silently dropped.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::io::format_sig;
use crate::sim::{simulate, BetaSpec, CirParams, SimConfig};
use crate::testing::{run_test, TestConfig};

/// Data-generating regime for a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// Constant beta = 1: the test's size is measured.
    Null,
    /// CIR-driven time-varying beta: the test's power is measured.
    Alternative,
}

impl Hypothesis {
    /// The beta process this regime injects into the simulator.
    pub fn beta_spec(self) -> BetaSpec {
        match self {
            Hypothesis::Null => BetaSpec::Constant { value: 1.0 },
            Hypothesis::Alternative => BetaSpec::Cir {
                params: CirParams::default(),
                initial: 1.0,
            },
        }
    }

    /// Machine-readable label used in CSV output.
    pub fn label(self) -> &'static str {
        match self {
            Hypothesis::Null => "null",
            Hypothesis::Alternative => "alternative",
        }
    }

    /// Human-readable section heading for the text table.
    pub fn heading(self) -> &'static str {
        match self {
            Hypothesis::Null => "Constant beta",
            Hypothesis::Alternative => "Time-varying beta",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "null" | "h0" => Ok(Hypothesis::Null),
            "alternative" | "ha" => Ok(Hypothesis::Alternative),
            other => Err(Error::Config(format!(
                "hypothesis must be null or alternative, got {other:?}"
            ))),
        }
    }
}

/// Full description of a Monte Carlo experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McDesign {
    pub replications: u32,
    /// Window lengths in days; one report section per length.
    pub window_lengths: Vec<u32>,
    pub hypothesis: Hypothesis,
    /// Simulator template; `days`, `beta`, `seed`, and `record_latent` are
    /// overridden per replication.
    pub sim: SimConfig,
    pub test: TestConfig,
    pub base_seed: u64,
}

impl Default for McDesign {
    fn default() -> Self {
        Self {
            replications: 500,
            window_lengths: vec![5, 22, 66],
            hypothesis: Hypothesis::Null,
            sim: SimConfig::default(),
            test: TestConfig::default(),
            base_seed: 1,
        }
    }
}

impl McDesign {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 100 {
            return Err(Error::Config(format!(
                "rate reporting needs at least 100 replications, got {}",
                self.replications
            )));
        }
        if self.window_lengths.is_empty() {
            return Err(Error::Config("window_lengths must not be empty".into()));
        }
        if let Some(w) = self.window_lengths.iter().find(|w| **w == 0) {
            return Err(Error::Config(format!("window length must be >= 1 day, got {w}")));
        }
        self.sim.validate()?;
        self.test.validate()
    }
}

/// Counter-derived per-replication seed (splitmix64 finalizer), so any
/// replication is reproducible on its own and streams never depend on
/// scheduling.
pub fn replication_seed(base_seed: u64, index: u64) -> u64 {
    let mut z = base_seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Rejection tally for one (window length, level) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McCell {
    pub window_days: u32,
    pub level: f64,
    pub rejections: u32,
    /// Replications whose statistic was usable; the rate denominator.
    pub valid: u32,
    /// Replications excluded as degenerate or over the guard budget.
    pub invalid: u32,
    /// rejections / valid; NaN when nothing was valid.
    pub rate: f64,
    /// Binomial standard error sqrt(rate (1 - rate) / valid).
    pub stderr: f64,
}

/// Aggregated Monte Carlo results for one hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub hypothesis: Hypothesis,
    pub replications: u32,
    pub levels: Vec<f64>,
    /// Cells in (window, level) order matching `window_lengths` x `levels`.
    pub cells: Vec<McCell>,
}

/// Run the experiment. Deterministic for a given design regardless of the
/// rayon thread count.
pub fn run_mc(design: &McDesign) -> Result<McReport> {
    design.validate()?;
    let reps = design.replications;
    let levels = design.test.levels.clone();
    let mut cells = Vec::with_capacity(design.window_lengths.len() * levels.len());

    for (wi, &window) in design.window_lengths.iter().enumerate() {
        // Per replication: Some(per-level reject flags) or None if unusable.
        let outcomes: Vec<Option<Vec<bool>>> = (0..reps)
            .into_par_iter()
            .map(|r| -> Result<Option<Vec<bool>>> {
                let mut sim = design.sim.clone();
                sim.days = window;
                sim.beta = design.hypothesis.beta_spec();
                sim.seed = replication_seed(
                    design.base_seed,
                    wi as u64 * u64::from(reps) + u64::from(r),
                );
                sim.record_latent = false;
                let path = simulate(&sim)?;
                match run_test(&path.grid, &design.test) {
                    Ok(out) if out.valid => {
                        Ok(Some(out.decisions.iter().map(|d| d.reject).collect()))
                    }
                    Ok(_) => Ok(None),
                    Err(Error::Degenerate(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;

        for (li, &level) in levels.iter().enumerate() {
            let mut rejections = 0u32;
            let mut valid = 0u32;
            for outcome in &outcomes {
                if let Some(flags) = outcome {
                    valid += 1;
                    rejections += u32::from(flags[li]);
                }
            }
            let rate = f64::from(rejections) / f64::from(valid);
            cells.push(McCell {
                window_days: window,
                level,
                rejections,
                valid,
                invalid: reps - valid,
                rate,
                stderr: (rate * (1.0 - rate) / f64::from(valid)).sqrt(),
            });
        }
    }

    Ok(McReport {
        hypothesis: design.hypothesis,
        replications: reps,
        levels,
        cells,
    })
}

impl McReport {
    /// CSV rendering: header plus one row per (window, level) cell. `reps`
    /// is the rate denominator (valid replications only).
    pub fn csv(&self) -> String {
        let mut out = String::from("hypothesis,window_days,level,rate,stderr,reps,invalid\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.hypothesis.label(),
                c.window_days,
                format_sig(c.level, 9),
                format_sig(c.rate, 9),
                format_sig(c.stderr, 9),
                c.valid,
                c.invalid
            );
        }
        out
    }
}

fn window_label(days: u32) -> String {
    match days {
        5 => "week".into(),
        22 => "month".into(),
        66 => "quarter".into(),
        d => format!("{d}d"),
    }
}

/// Aligned plain-text table: rejection rates in percent, one section per
/// report, one row per window, one column per level.
pub fn table(reports: &[&McReport]) -> String {
    let mut out = String::new();
    if reports.is_empty() {
        return out;
    }
    let levels = &reports[0].levels;
    let label_width = 14usize;
    let col_width = 12usize;

    let _ = write!(out, "{:<label_width$}", "window");
    for level in levels {
        let _ = write!(out, "{:>col_width$}", format!("{}%", format_sig(level * 100.0, 6)));
    }
    let _ = writeln!(out, "{:>10}", "invalid");

    for report in reports {
        let _ = writeln!(
            out,
            "{} ({} replications)",
            report.hypothesis.heading(),
            report.replications
        );
        let windows: Vec<u32> = {
            let mut seen = Vec::new();
            for c in &report.cells {
                if !seen.contains(&c.window_days) {
                    seen.push(c.window_days);
                }
            }
            seen
        };
        for w in windows {
            let _ = write!(out, "  {:<width$}", window_label(w), width = label_width - 2);
            let mut invalid = 0;
            for level in levels {
                let cell = report
                    .cells
                    .iter()
                    .find(|c| c.window_days == w && c.level == *level)
                    .expect("cell exists for every (window, level)");
                invalid = cell.invalid;
                let _ = write!(out, "{:>col_width$}", format!("{:.2}", cell.rate * 100.0));
            }
            let _ = writeln!(out, "{:>10}", invalid);
        }
    }
    out
}
