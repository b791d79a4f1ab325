//! CSV ingestion, export, and rolling-window reports.
//!
//! Data files carry one row per observation with header `date,seq,px,py`
//! (price levels, strictly positive) or `date,seq,rx,ry` (within-day
//! log-returns). Rows are grouped by date; `seq` counts from 0 within each
//! date and every date must contain the same number of rows: n+1 prices or n
//! returns for a grid of n increments per day. Lines starting with `#` before
//! the header are preserved as file comments (the CLI stores seed and config
//! there). Prices are converted to log-prices internally and day boundaries
//! are re-anchored, so overnight gaps never appear as increments.
//!
//! Data files are written with shortest round-trip float formatting: reading
//! a file the crate wrote and writing it again is byte-identical, and a
//! simulated path survives export/import to within float rounding. Report
//! files (`windows.csv`, `summary.csv`, `betas.csv`, `mc.csv`) use a fixed
//! 9-significant-digit decimal format instead.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::stats::ObservationGrid;
use crate::testing::{run_test, TestConfig, TestOutcome};

/// Interpretation of the two value columns of a data file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataMode {
    Prices,
    Returns,
}

impl DataMode {
    fn header(self) -> &'static str {
        match self {
            DataMode::Prices => "date,seq,px,py",
            DataMode::Returns => "date,seq,rx,ry",
        }
    }
}

/// Parsed contents of a data file: per-date value rows for both assets.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    mode: DataMode,
    n_per_day: usize,
    dates: Vec<String>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    comments: Vec<String>,
}

impl PriceTable {
    /// Build a table from parts, validating the documented invariants.
    pub fn new(
        mode: DataMode,
        dates: Vec<String>,
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        comments: Vec<String>,
    ) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::Input("table needs at least one date".into()));
        }
        if a.len() != dates.len() || b.len() != dates.len() {
            return Err(Error::Input("per-date series count must match dates".into()));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Input(format!(
                    "dates must be strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let rows = a[0].len();
        let min_rows = match mode {
            DataMode::Prices => 3,
            DataMode::Returns => 2,
        };
        if rows < min_rows {
            return Err(Error::Input(format!(
                "each date needs at least {min_rows} rows, got {rows}"
            )));
        }
        for (day, (va, vb)) in a.iter().zip(b.iter()).enumerate() {
            if va.len() != rows || vb.len() != rows {
                return Err(Error::Input(format!(
                    "date {} has {} and {} rows; expected {rows}",
                    dates[day],
                    va.len(),
                    vb.len()
                )));
            }
            for v in va.iter().chain(vb.iter()) {
                if !v.is_finite() {
                    return Err(Error::Input(format!("non-finite value on {}", dates[day])));
                }
                if mode == DataMode::Prices && *v <= 0.0 {
                    return Err(Error::Input(format!(
                        "prices must be positive; got {v} on {}",
                        dates[day]
                    )));
                }
            }
        }
        let n_per_day = match mode {
            DataMode::Prices => rows - 1,
            DataMode::Returns => rows,
        };
        Ok(Self {
            mode,
            n_per_day,
            dates,
            a,
            b,
            comments,
        })
    }

    pub fn mode(&self) -> DataMode {
        self.mode
    }

    pub fn n_per_day(&self) -> usize {
        self.n_per_day
    }

    pub fn days(&self) -> usize {
        self.dates.len()
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn comments(&self) -> &[String] {
        &self.comments
    }

    /// Convert to a log-price grid. Price days are chained by re-anchoring
    /// each day's first point to the previous close, dropping overnight
    /// moves; return days accumulate from zero.
    pub fn to_grid(&self) -> Result<ObservationGrid> {
        let n = self.n_per_day;
        let points = self.days() * n + 1;
        let mut x = Vec::with_capacity(points);
        let mut y = Vec::with_capacity(points);
        match self.mode {
            DataMode::Prices => {
                x.push(self.a[0][0].ln());
                y.push(self.b[0][0].ln());
                for day in 0..self.days() {
                    let base_x = x[x.len() - 1] - self.a[day][0].ln();
                    let base_y = y[y.len() - 1] - self.b[day][0].ln();
                    for i in 1..=n {
                        x.push(self.a[day][i].ln() + base_x);
                        y.push(self.b[day][i].ln() + base_y);
                    }
                }
            }
            DataMode::Returns => {
                x.push(0.0);
                y.push(0.0);
                let (mut cx, mut cy) = (0.0, 0.0);
                for day in 0..self.days() {
                    for i in 0..n {
                        cx += self.a[day][i];
                        cy += self.b[day][i];
                        x.push(cx);
                        y.push(cy);
                    }
                }
            }
        }
        ObservationGrid::new(n, self.days(), x, y)
    }

    /// Export a grid as a price table with synthetic `day#####` dates.
    pub fn from_grid(grid: &ObservationGrid, comments: Vec<String>) -> Self {
        let n = grid.n_per_day();
        let mut dates = Vec::with_capacity(grid.days());
        let mut a = Vec::with_capacity(grid.days());
        let mut b = Vec::with_capacity(grid.days());
        for day in 0..grid.days() {
            dates.push(format!("day{:05}", day + 1));
            let range = day * n..=(day + 1) * n;
            a.push(grid.x()[range.clone()].iter().map(|v| v.exp()).collect());
            b.push(grid.y()[range].iter().map(|v| v.exp()).collect());
        }
        Self {
            mode: DataMode::Prices,
            n_per_day: n,
            dates,
            a,
            b,
            comments,
        }
    }

    /// Serialize in canonical form (comments, header, shortest round-trip
    /// floats).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for comment in &self.comments {
            writeln!(w, "{comment}")?;
        }
        writeln!(w, "{}", self.mode.header())?;
        for day in 0..self.days() {
            for i in 0..self.a[day].len() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    self.dates[day], i, self.a[day][i], self.b[day][i]
                )?;
            }
        }
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

/// Read a data file. Parse failures name the 1-based source line.
pub fn read_csv(path: &Path) -> Result<PriceTable> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let name = path.display().to_string();
    parse_csv(&text, &name)
}

fn parse_csv(text: &str, name: &str) -> Result<PriceTable> {
    let fail = |line: u64, msg: String| Error::Parse {
        path: name.to_string(),
        line,
        msg,
    };

    // Comments are only honored before the header.
    let mut comments = Vec::new();
    let mut offset = 0usize;
    for line in text.lines() {
        if line.starts_with('#') {
            comments.push(line.to_string());
            offset += line.len() + 1;
        } else {
            break;
        }
    }
    let body = &text[offset.min(text.len())..];
    let header_line = comments.len() as u64 + 1;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());

    let mode = {
        let headers = reader
            .headers()
            .map_err(|e| fail(header_line, format!("unreadable header: {e}")))?;
        let joined = headers.iter().collect::<Vec<_>>().join(",");
        match joined.as_str() {
            "date,seq,px,py" => DataMode::Prices,
            "date,seq,rx,ry" => DataMode::Returns,
            other => {
                return Err(fail(
                    header_line,
                    format!("expected header date,seq,px,py or date,seq,rx,ry, got {other:?}"),
                ))
            }
        }
    };

    let mut dates: Vec<String> = Vec::new();
    let mut a: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<Vec<f64>> = Vec::new();

    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line() + comments.len() as u64)
                .unwrap_or(header_line);
            fail(line, format!("malformed row: {e}"))
        })?;
        let line = record
            .position()
            .map(|p| p.line() + comments.len() as u64)
            .unwrap_or(header_line);
        if record.len() != 4 {
            return Err(fail(line, format!("expected 4 fields, got {}", record.len())));
        }
        let date = record[0].to_string();
        let seq: usize = record[1]
            .parse()
            .map_err(|e| fail(line, format!("bad seq {:?}: {e}", &record[1])))?;
        let mut vals = [0.0f64; 2];
        for (slot, idx) in vals.iter_mut().zip([2usize, 3]) {
            let field = &record[idx];
            let v: f64 = field
                .parse()
                .map_err(|e| fail(line, format!("bad number {field:?}: {e}")))?;
            if !v.is_finite() {
                return Err(fail(line, format!("non-finite value {field:?}")));
            }
            *slot = v;
        }

        let new_date = dates.last() != Some(&date);
        if new_date {
            if let Some(last) = dates.last() {
                if date <= *last {
                    return Err(fail(
                        line,
                        format!("dates must be strictly increasing: {last:?} then {date:?}"),
                    ));
                }
            }
            dates.push(date);
            a.push(Vec::new());
            b.push(Vec::new());
        }
        let expected_seq = a.last().map_or(0, |v| v.len());
        if seq != expected_seq {
            return Err(fail(
                line,
                format!("seq must count from 0 without gaps; expected {expected_seq}, got {seq}"),
            ));
        }
        a.last_mut().unwrap().push(vals[0]);
        b.last_mut().unwrap().push(vals[1]);
    }

    if dates.is_empty() {
        return Err(fail(header_line, "no data rows".into()));
    }
    let rows = a[0].len();
    for (day, va) in a.iter().enumerate() {
        if va.len() != rows {
            return Err(Error::Input(format!(
                "date {} has {} rows; expected {rows} like the first date",
                dates[day],
                va.len()
            )));
        }
    }
    PriceTable::new(mode, dates, a, b, comments)
}

/// Named window lengths used in the reports, in trading days.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowScheme {
    /// 5 trading days.
    Weekly,
    /// 22 trading days.
    Monthly,
    /// 66 trading days.
    Quarterly,
    Days(u32),
}

impl WindowScheme {
    pub fn length_days(self) -> u32 {
        match self {
            WindowScheme::Weekly => 5,
            WindowScheme::Monthly => 22,
            WindowScheme::Quarterly => 66,
            WindowScheme::Days(d) => d,
        }
    }

    pub fn label(self) -> String {
        match self {
            WindowScheme::Weekly => "week".into(),
            WindowScheme::Monthly => "month".into(),
            WindowScheme::Quarterly => "quarter".into(),
            WindowScheme::Days(d) => format!("{d}d"),
        }
    }

    /// Parse "weekly" | "monthly" | "quarterly" | integer day count.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "weekly" | "week" => Ok(WindowScheme::Weekly),
            "monthly" | "month" => Ok(WindowScheme::Monthly),
            "quarterly" | "quarter" => Ok(WindowScheme::Quarterly),
            other => other
                .parse::<u32>()
                .ok()
                .filter(|d| *d >= 1)
                .map(WindowScheme::Days)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "window scheme must be weekly, monthly, quarterly, or a day count; got {other:?}"
                    ))
                }),
        }
    }
}

/// Partition of a day range into consecutive fixed-length windows; the
/// trailing partial window is dropped and reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPlan {
    pub length_days: u32,
}

impl WindowPlan {
    pub fn new(scheme: WindowScheme) -> Result<Self> {
        let length_days = scheme.length_days();
        if length_days == 0 {
            return Err(Error::Config("window length must be at least 1 day".into()));
        }
        Ok(Self { length_days })
    }

    /// Day ranges of the full windows plus the count of dropped trailing
    /// days.
    pub fn ranges(&self, days: usize) -> (Vec<std::ops::Range<usize>>, usize) {
        let len = self.length_days as usize;
        let count = days / len;
        let ranges = (0..count).map(|w| w * len..(w + 1) * len).collect();
        (ranges, days - count * len)
    }
}

/// How days are grouped into windows: fixed-length runs counted from the
/// first day, or true calendar periods read from the date strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grouping {
    #[default]
    FixedLength,
    /// Group by ISO week / calendar month / calendar quarter. Requires
    /// `YYYY-MM-DD`-prefixed dates; windows are maximal runs sharing the
    /// period, so short edge periods are kept, not dropped.
    Calendar,
}

/// Days since 1970-01-01 of a proleptic Gregorian date (Howard Hinnant's
/// civil-from-days inverse).
fn days_from_civil(y: i64, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = (y - era * 400) as i64;
    let mp = i64::from((m + 9) % 12);
    let doy = (153 * mp + 2) / 5 + i64::from(d) - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn parse_iso_date(s: &str) -> Result<(i64, u32, u32)> {
    let bad = || Error::Input(format!("calendar grouping needs YYYY-MM-DD dates, got {s:?}"));
    let b = s.as_bytes();
    if b.len() < 10 || b[4] != b'-' || b[7] != b'-' {
        return Err(bad());
    }
    let y: i64 = s[0..4].parse().map_err(|_| bad())?;
    let m: u32 = s[5..7].parse().map_err(|_| bad())?;
    let d: u32 = s[8..10].parse().map_err(|_| bad())?;
    if !(1..=12).contains(&m) || !(1..=31).contains(&d) {
        return Err(bad());
    }
    Ok((y, m, d))
}

/// Maximal runs of dates sharing a calendar period under `scheme`.
fn calendar_ranges(dates: &[String], scheme: WindowScheme) -> Result<Vec<std::ops::Range<usize>>> {
    let key = |date: &str| -> Result<i64> {
        let (y, m, d) = parse_iso_date(date)?;
        Ok(match scheme {
            // Monday anchoring the ISO week; 1970-01-01 was a Thursday.
            WindowScheme::Weekly => {
                let days = days_from_civil(y, m, d);
                days - (days + 3).rem_euclid(7)
            }
            WindowScheme::Monthly => y * 12 + i64::from(m) - 1,
            WindowScheme::Quarterly => y * 4 + i64::from(m - 1) / 3,
            WindowScheme::Days(_) => {
                return Err(Error::Config(
                    "calendar grouping applies to weekly, monthly, or quarterly schemes only"
                        .into(),
                ))
            }
        })
    };
    let mut ranges = Vec::new();
    let mut start = 0usize;
    let mut current = key(&dates[0])?;
    for (i, date) in dates.iter().enumerate().skip(1) {
        let k = key(date)?;
        if k != current {
            ranges.push(start..i);
            start = i;
            current = k;
        }
    }
    ranges.push(start..dates.len());
    Ok(ranges)
}

/// One window's result; `outcome` is `None` when the window's data were
/// degenerate (for example every increment truncated).
#[derive(Debug, Clone)]
pub struct WindowRow {
    /// 1-based window index.
    pub index: usize,
    pub start_date: String,
    pub end_date: String,
    pub days: usize,
    pub outcome: Option<TestOutcome>,
}

#[derive(Debug, Clone)]
pub struct WindowReport {
    pub rows: Vec<WindowRow>,
    pub levels: Vec<f64>,
    pub dropped_days: usize,
}

/// Per-level rejection counts over the valid windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSummary {
    pub level: f64,
    pub windows: usize,
    pub valid: usize,
    pub rejected: usize,
    /// rejected / valid; NaN when no window is valid.
    pub rate: f64,
}

impl WindowReport {
    pub fn summary(&self) -> Vec<LevelSummary> {
        self.levels
            .iter()
            .enumerate()
            .map(|(li, &level)| {
                let mut valid = 0;
                let mut rejected = 0;
                for row in &self.rows {
                    if let Some(out) = &row.outcome {
                        if out.valid {
                            valid += 1;
                            if out.decisions[li].reject {
                                rejected += 1;
                            }
                        }
                    }
                }
                LevelSummary {
                    level,
                    windows: self.rows.len(),
                    valid,
                    rejected,
                    rate: rejected as f64 / valid as f64,
                }
            })
            .collect()
    }
}

/// Slice one window of days out of a grid.
fn window_grid(grid: &ObservationGrid, range: &std::ops::Range<usize>) -> Result<ObservationGrid> {
    let n = grid.n_per_day();
    let points = range.start * n..=range.end * n;
    ObservationGrid::new(
        n,
        range.len(),
        grid.x()[points.clone()].to_vec(),
        grid.y()[points].to_vec(),
    )
}

/// Run the constant-beta test over every full window of the table.
pub fn window_report(
    table: &PriceTable,
    scheme: WindowScheme,
    config: &TestConfig,
) -> Result<WindowReport> {
    window_report_grouped(table, scheme, Grouping::FixedLength, config)
}

/// `window_report` with an explicit day-grouping rule.
pub fn window_report_grouped(
    table: &PriceTable,
    scheme: WindowScheme,
    grouping: Grouping,
    config: &TestConfig,
) -> Result<WindowReport> {
    config.validate()?;
    let grid = table.to_grid()?;
    let (ranges, dropped_days) = match grouping {
        Grouping::FixedLength => {
            let plan = WindowPlan::new(scheme)?;
            plan.ranges(grid.days())
        }
        Grouping::Calendar => (calendar_ranges(table.dates(), scheme)?, 0),
    };
    if ranges.is_empty() {
        return Err(Error::Input(format!(
            "no full {}-day window in {} days of data",
            scheme.length_days(),
            grid.days()
        )));
    }

    let mut rows = Vec::with_capacity(ranges.len());
    for (w, range) in ranges.iter().enumerate() {
        let sub = window_grid(&grid, range)?;
        let outcome = match run_test(&sub, config) {
            Ok(out) => Some(out),
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(e),
        };
        rows.push(WindowRow {
            index: w + 1,
            start_date: table.dates[range.start].clone(),
            end_date: table.dates[range.end - 1].clone(),
            days: range.len(),
            outcome,
        });
    }
    Ok(WindowReport {
        rows,
        levels: config.levels.clone(),
        dropped_days,
    })
}

/// Fixed-precision decimal with `sig` significant digits, scientific only
/// when the exponent leaves [-4, sig); the report-file number format.
pub fn format_sig(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    // {:.*e} rounds to sig digits and exposes the post-rounding exponent.
    let formatted = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = formatted.split_once('e').expect("exponential format");
    let exp: i32 = exp.parse().expect("numeric exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= sig as i32 {
        return format!("{}e{}", trim(mantissa), exp);
    }
    let neg = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let point = exp + 1; // digits before the decimal point
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if point <= 0 {
        out.push_str("0.");
        for _ in 0..-point {
            out.push('0');
        }
        out.push_str(&digits);
    } else if (point as usize) >= digits.len() {
        out.push_str(&digits);
        for _ in 0..point as usize - digits.len() {
            out.push('0');
        }
    } else {
        out.push_str(&digits[..point as usize]);
        out.push('.');
        out.push_str(&digits[point as usize..]);
    }
    trim(&out)
}

fn fmt(x: f64) -> String {
    format_sig(x, 9)
}

/// Column label for a significance level: 0.05 -> "5", 0.025 -> "2.5".
fn level_label(level: f64) -> String {
    format_sig(level * 100.0, 6)
}

/// Render `windows.csv`: one row per window, empty stat fields for
/// degenerate windows.
pub fn windows_csv(report: &WindowReport) -> String {
    let mut out = String::new();
    out.push_str("window,start_date,end_date,days,beta,ci_low,ci_high,statistic,p_value");
    for level in &report.levels {
        let _ = write!(out, ",reject_{}", level_label(*level));
    }
    out.push_str(",skipped_blocks,valid\n");
    for row in &report.rows {
        let _ = write!(
            out,
            "{},{},{},{}",
            row.index, row.start_date, row.end_date, row.days
        );
        match &row.outcome {
            Some(o) => {
                match &o.pooled {
                    Some(p) => {
                        let _ = write!(out, ",{},{},{}", fmt(p.beta), fmt(p.ci_low), fmt(p.ci_high));
                    }
                    None => out.push_str(",,,"),
                }
                let _ = write!(out, ",{},{}", fmt(o.statistic), fmt(o.p_value));
                for d in &o.decisions {
                    let _ = write!(out, ",{}", d.reject);
                }
                let _ = write!(out, ",{},{}\n", o.skipped_blocks, o.valid);
            }
            None => {
                out.push_str(",,,,,");
                for _ in &report.levels {
                    out.push(',');
                }
                out.push_str(",false\n");
            }
        }
    }
    out
}

/// Render `summary.csv`: per-level rejection rates over valid windows.
pub fn summary_csv(report: &WindowReport) -> String {
    let mut out = String::from("level,windows,valid,rejected,rate\n");
    for s in report.summary() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt(s.level),
            s.windows,
            s.valid,
            s.rejected,
            fmt(s.rate)
        );
    }
    out
}

/// Render `betas.csv`: the pooled beta path (valid, estimated windows only).
pub fn betas_csv(report: &WindowReport) -> String {
    let mut out = String::from("date,beta,ci_low,ci_high\n");
    for row in &report.rows {
        if let Some(o) = &row.outcome {
            if let (true, Some(p)) = (o.valid, &o.pooled) {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    row.start_date,
                    fmt(p.beta),
                    fmt(p.ci_low),
                    fmt(p.ci_high)
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ThresholdMode;
    use crate::testing::BetaMode;

    #[test]
    fn format_sig_cases() {
        assert_eq!(format_sig(0.0, 9), "0");
        assert_eq!(format_sig(1.0, 9), "1");
        assert_eq!(format_sig(-2.5, 9), "-2.5");
        assert_eq!(format_sig(1234.567_890_12, 9), "1234.56789");
        assert_eq!(format_sig(0.000_123_456_789_012, 9), "0.000123456789");
        assert_eq!(format_sig(1.234_567_89e12, 9), "1.23456789e12");
        assert_eq!(format_sig(1e-7, 9), "1e-7");
        assert_eq!(format_sig(999_999_999.9, 9), "1e9");
        assert_eq!(format_sig(0.1 + 0.2, 9), "0.3");
        assert_eq!(format_sig(123_456_789.0, 9), "123456789");
        assert_eq!(format_sig(f64::NAN, 9), "nan");
    }

    fn sample_table() -> PriceTable {
        PriceTable::new(
            DataMode::Prices,
            vec!["2024-01-02".into(), "2024-01-03".into()],
            vec![vec![100.0, 101.0, 100.5], vec![100.2, 99.8, 100.1]],
            vec![vec![50.0, 50.6, 50.2], vec![50.1, 49.9, 50.05]],
            vec!["# sample".into()],
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let table = sample_table();
        let mut bytes = Vec::new();
        table.write_csv(&mut bytes).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let reread = parse_csv(&text, "mem").unwrap();
        assert_eq!(reread, table);
        let mut again = Vec::new();
        reread.write_csv(&mut again).unwrap();
        assert_eq!(String::from_utf8(again).unwrap(), text);
    }

    #[test]
    fn grid_drops_overnight_gap() {
        let table = sample_table();
        let grid = table.to_grid().unwrap();
        assert_eq!(grid.n_per_day(), 2);
        assert_eq!(grid.days(), 2);
        let (dx, _) = grid.day_increments(1).unwrap();
        // Day 2 increments come from day-2 prices only.
        assert!((dx[0] - (99.8f64 / 100.2).ln()).abs() < 1e-15);
        // The boundary point equals day 1's close: no overnight increment.
        let x = grid.x();
        assert!((x[2] - x[0] - (100.5f64 / 100.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn returns_mode_accumulates() {
        let table = PriceTable::new(
            DataMode::Returns,
            vec!["d1".into(), "d2".into()],
            vec![vec![0.1, -0.2], vec![0.3, 0.1]],
            vec![vec![0.0, 0.1], vec![-0.1, 0.2]],
            vec![],
        )
        .unwrap();
        let grid = table.to_grid().unwrap();
        let (dx, dy) = grid.day_increments(1).unwrap();
        assert!((dx[0] - 0.3).abs() < 1e-15);
        assert!((dy[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("date,seq,px,qq\n", 1, "header"),
            ("date,seq,px,py\nd1,0,100,50\nd1,2,101,51\n", 3, "seq"),
            ("date,seq,px,py\nd1,0,100,abc\n", 2, "number"),
            (
                "# c\ndate,seq,px,py\nd2,0,100,50\nd2,1,101,51\nd2,2,102,52\nd1,0,100,50\n",
                6,
                "increasing",
            ),
        ];
        for (text, want_line, what) in cases {
            match parse_csv(text, "mem") {
                Err(Error::Parse { line, .. }) => {
                    assert_eq!(line, want_line, "{what}: wrong line in error")
                }
                other => panic!("{what}: expected parse error, got {other:?}"),
            }
        }

        // Nonpositive price and ragged dates are rejected too.
        assert!(parse_csv("date,seq,px,py\nd1,0,0.0,50\nd1,1,1,51\nd1,2,1,52\n", "mem").is_err());
        assert!(parse_csv(
            "date,seq,px,py\nd1,0,1,50\nd1,1,1,51\nd1,2,1,52\nd2,0,1,50\n",
            "mem"
        )
        .is_err());
    }

    #[test]
    fn calendar_grouping() {
        assert_eq!(days_from_civil(1970, 1, 1), 0);
        assert_eq!(days_from_civil(2024, 1, 1), 19723); // a Monday

        let dates: Vec<String> = [
            "2024-01-30",
            "2024-01-31",
            "2024-02-01",
            "2024-02-02",
            "2024-02-05",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let months = calendar_ranges(&dates, WindowScheme::Monthly).unwrap();
        assert_eq!(months, vec![0..2, 2..5]);
        // Tue/Wed/Thu/Fri share an ISO week; the following Monday starts a
        // new one.
        let weeks = calendar_ranges(&dates, WindowScheme::Weekly).unwrap();
        assert_eq!(weeks, vec![0..4, 4..5]);
        let quarters = calendar_ranges(&dates, WindowScheme::Quarterly).unwrap();
        assert_eq!(quarters, vec![0..5]);

        assert!(calendar_ranges(&dates, WindowScheme::Days(3)).is_err());
        let bad = vec!["day00001".to_string()];
        assert!(calendar_ranges(&bad, WindowScheme::Monthly).is_err());
    }

    #[test]
    fn window_plan_drops_partial_tail() {
        let plan = WindowPlan::new(WindowScheme::Weekly).unwrap();
        let (ranges, dropped) = plan.ranges(23);
        assert_eq!(ranges.len(), 4);
        assert_eq!(dropped, 3);
        assert_eq!(ranges[3], 15..20);
        assert_eq!(WindowScheme::parse("66").unwrap(), WindowScheme::Days(66));
        assert!(WindowScheme::parse("sometimes").is_err());
    }

    #[test]
    fn window_report_on_proportional_data() {
        // y moves at exactly twice x: every window estimates beta = 2 and is
        // flagged invalid (zero residual variation kills the denominators).
        let n = 8;
        let days = 4;
        let mut x = vec![0.0];
        for i in 0..n * days {
            x.push(x[i] + if i % 2 == 0 { 0.01 } else { -0.008 });
        }
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let grid = ObservationGrid::new(n, days, x, y).unwrap();
        let table = PriceTable::from_grid(&grid, vec![]);
        let config = TestConfig {
            k_n: 4,
            beta: BetaMode::Estimated,
            truncation: crate::stats::TruncationSpec {
                mode: ThresholdMode::Off,
                varpi: 0.49,
            },
            ..TestConfig::default()
        };
        let report = window_report(&table, WindowScheme::Days(2), &config).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            let out = row.outcome.as_ref().unwrap();
            let pooled = out.pooled.as_ref().unwrap();
            assert!((pooled.beta - 2.0).abs() < 1e-9, "beta {}", pooled.beta);
            assert!(!out.valid);
        }
        let csv = windows_csv(&report);
        assert!(csv.lines().count() == 3);
        assert!(csv.contains(",false"));
    }

    #[test]
    fn export_then_ingest_matches_increments() {
        let mut x = vec![0.0];
        let mut y = vec![0.0];
        for i in 0..12usize {
            let t = i as f64;
            x.push(x[i] + 0.05 * (t * 0.7).sin() - 0.01);
            y.push(y[i] + 0.04 * (t * 0.3).cos());
        }
        let grid = ObservationGrid::new(4, 3, x, y).unwrap();
        let table = PriceTable::from_grid(&grid, vec!["# test".into()]);
        let mut bytes = Vec::new();
        table.write_csv(&mut bytes).unwrap();
        let reread = parse_csv(&String::from_utf8(bytes).unwrap(), "mem")
            .unwrap()
            .to_grid()
            .unwrap();
        for day in 0..3 {
            let (dx0, dy0) = grid.day_increments(day).unwrap();
            let (dx1, dy1) = reread.day_increments(day).unwrap();
            for i in 0..4 {
                assert!((dx0[i] - dx1[i]).abs() < 1e-12);
                assert!((dy0[i] - dy1[i]).abs() < 1e-12);
            }
        }
    }
}
