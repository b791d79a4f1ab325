//! Command-line front end: `simulate`, `test`, `mc`, and `window`.
//!
//! Configuration comes from three layers with rising precedence: built-in
//! defaults, a JSON config file (`--config`, sections `sim`, `test`, `mc`,
//! `window`; unknown keys are rejected), and command-line flags. The merged
//! effective config is echoed on stdout so every run is reproducible from
//! its own log. When no seed is supplied the CLI draws one from OS entropy,
//! prints it, and embeds it in the output file header.
//!
//! Exit status is 0 when the command completed (including analyses flagged
//! invalid in their validity columns) and 2 on configuration, parse, or I/O
//! errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use betaconst::io::{
    self, format_sig, windows_csv, Grouping, PriceTable, WindowScheme,
};
use betaconst::mc::{self, run_mc, Hypothesis, McDesign, McReport};
use betaconst::sim::{simulate, BetaSpec, CirParams, JumpConfig, SimConfig};
use betaconst::testing::{run_test, BetaMode, TestConfig, TestOutcome};
use betaconst::{Error, Result};

#[derive(Parser)]
#[command(
    name = "betaconst",
    version,
    about = "Constant-beta testing for high-frequency bivariate data",
    propagate_version = true
)]
struct Cli {
    /// JSON config file with optional sim/test/mc/window sections.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed override: path seed for simulate, base seed for mc
    /// (default: from the config file, else drawn from OS entropy).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread count (default: machine parallelism).
    #[arg(long, global = true, env = "BETACONST_THREADS")]
    threads: Option<usize>,

    /// Directory for generated files (default: current directory).
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a bivariate path and write simulated.csv.
    Simulate(SimulateArgs),
    /// Run the constant-beta test on one data file.
    Test(TestArgs),
    /// Monte Carlo size/power study; prints a rate table and writes mc.csv.
    Mc(McArgs),
    /// Windowed analysis; writes windows.csv, summary.csv, betas.csv.
    Window(WindowArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Days to simulate (default 22).
    #[arg(long)]
    days: Option<u32>,

    /// Beta dynamics: "constant", "cir", or a numeric constant
    /// (default constant 1).
    #[arg(long)]
    beta: Option<String>,

    /// Jump regime: "formula", "prose", or "off" (default formula).
    #[arg(long)]
    jumps: Option<String>,
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV with header date,seq,px,py or date,seq,rx,ry.
    data: PathBuf,

    /// Block size (default: half the observations per day).
    #[arg(long = "kn")]
    kn: Option<usize>,

    /// "estimate" or a numeric known beta (default estimate).
    #[arg(long)]
    beta: Option<String>,

    /// Also write the outcome as test.csv to the output directory.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct McArgs {
    /// Replications per window length (default 500).
    #[arg(long)]
    reps: Option<u32>,

    /// Comma-separated window lengths in days (default 5,22,66).
    #[arg(long)]
    windows: Option<String>,

    /// "null", "alternative", or "both" (default both).
    #[arg(long)]
    hypothesis: Option<String>,
}

#[derive(Args)]
struct WindowArgs {
    /// Input CSV with header date,seq,px,py or date,seq,rx,ry.
    data: PathBuf,

    /// weekly | monthly | quarterly | a day count (default weekly).
    #[arg(long)]
    scheme: Option<String>,

    /// Group by true calendar periods (ISO week / month / quarter) instead
    /// of fixed-length day runs; needs YYYY-MM-DD dates.
    #[arg(long)]
    calendar: bool,

    /// Block size (default: half the observations per day).
    #[arg(long = "kn")]
    kn: Option<usize>,
}

/// Config file shape; each section mirrors the library type it configures.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    sim: Option<serde_json::Value>,
    test: Option<serde_json::Value>,
    mc: Option<McSection>,
    window: Option<WindowSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct McSection {
    replications: Option<u32>,
    window_lengths: Option<Vec<u32>>,
    hypothesis: Option<Hypothesis>,
    base_seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct WindowSection {
    scheme: Option<String>,
    calendar: Option<bool>,
}

/// Config file contents merged over defaults, remembering which keys were
/// explicitly present (they participate in precedence decisions).
struct Loaded {
    sim: SimConfig,
    sim_seed_given: bool,
    test: TestConfig,
    test_kn_given: bool,
    mc: McSection,
    window: WindowSection,
}

fn load_config(path: Option<&Path>) -> Result<Loaded> {
    let mut loaded = Loaded {
        sim: SimConfig::default(),
        sim_seed_given: false,
        test: TestConfig::default(),
        test_kn_given: false,
        mc: McSection::default(),
        window: WindowSection::default(),
    };
    let Some(path) = path else { return Ok(loaded) };
    let text = fs::read_to_string(path)?;
    let file: FileConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if let Some(sim) = file.sim {
        loaded.sim_seed_given = sim.get("seed").is_some();
        loaded.sim = serde_json::from_value(sim)
            .map_err(|e| Error::Config(format!("{}: sim section: {e}", path.display())))?;
    }
    if let Some(test) = file.test {
        loaded.test_kn_given = test.get("k_n").is_some();
        loaded.test = serde_json::from_value(test)
            .map_err(|e| Error::Config(format!("{}: test section: {e}", path.display())))?;
    }
    if let Some(mc) = file.mc {
        loaded.mc = mc;
    }
    if let Some(window) = file.window {
        loaded.window = window;
    }
    Ok(loaded)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let Cli {
        config,
        seed,
        threads,
        out,
        command,
    } = cli;
    if let Some(threads) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    if !out.is_dir() {
        return Err(Error::Config(format!(
            "output directory {} does not exist",
            out.display()
        )));
    }
    let loaded = load_config(config.as_deref())?;
    match command {
        Command::Simulate(args) => cmd_simulate(&loaded, seed, &out, &args),
        Command::Test(args) => cmd_test(&loaded, &out, &args),
        Command::Mc(args) => cmd_mc(&loaded, seed, &out, &args),
        Command::Window(args) => cmd_window(&loaded, &out, &args),
    }
}

fn parse_beta_spec(s: &str) -> Result<BetaSpec> {
    match s {
        "constant" => Ok(BetaSpec::Constant { value: 1.0 }),
        "cir" => Ok(BetaSpec::Cir {
            params: CirParams::default(),
            initial: 1.0,
        }),
        other => other
            .parse::<f64>()
            .map(|value| BetaSpec::Constant { value })
            .map_err(|_| {
                Error::Config(format!(
                    "beta must be constant, cir, or a number, got {other:?}"
                ))
            }),
    }
}

fn parse_beta_mode(s: &str) -> Result<BetaMode> {
    match s {
        "estimate" | "estimated" => Ok(BetaMode::Estimated),
        other => other
            .parse::<f64>()
            .map(|value| BetaMode::Known { value })
            .map_err(|_| {
                Error::Config(format!("beta must be \"estimate\" or a number, got {other:?}"))
            }),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Config(format!("config echo: {e}")))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_simulate(loaded: &Loaded, seed_flag: Option<u64>, out: &Path, args: &SimulateArgs) -> Result<()> {
    let mut sim = loaded.sim.clone();
    if let Some(days) = args.days {
        sim.days = days;
    }
    if let Some(beta) = &args.beta {
        sim.beta = parse_beta_spec(beta)?;
    }
    if let Some(jumps) = &args.jumps {
        sim.jumps = match jumps.as_str() {
            "formula" => Some(JumpConfig::formula()),
            "prose" => Some(JumpConfig::prose()),
            "off" => None,
            other => {
                return Err(Error::Config(format!(
                    "jumps must be formula, prose, or off, got {other:?}"
                )))
            }
        };
    }
    if let Some(s) = seed_flag {
        sim.seed = s;
    } else if !loaded.sim_seed_given {
        sim.seed = rand::random();
    }
    let config_json = to_json(&sim)?;
    println!("seed: {}", sim.seed);
    println!("effective config: {config_json}");

    let path = simulate(&sim)?;
    let comments = vec![format!("# seed: {}", sim.seed), format!("# config: {config_json}")];
    let table = PriceTable::from_grid(&path.grid, comments);
    let file = out.join("simulated.csv");
    table.write_csv_path(&file)?;
    println!("wrote {}", file.display());
    Ok(())
}

/// Resolve the block size: flag beats config file beats the half-day
/// default.
fn resolve_kn(cfg: &mut TestConfig, flag: Option<usize>, kn_given: bool, n_per_day: usize) {
    if let Some(kn) = flag {
        cfg.k_n = kn;
    } else if !kn_given {
        cfg.k_n = (n_per_day / 2).max(2);
    }
}

fn cmd_test(loaded: &Loaded, out: &Path, args: &TestArgs) -> Result<()> {
    let table = io::read_csv(&args.data)?;
    let mut cfg = loaded.test.clone();
    resolve_kn(&mut cfg, args.kn, loaded.test_kn_given, table.n_per_day());
    if let Some(beta) = &args.beta {
        cfg.beta = parse_beta_mode(beta)?;
    }
    println!("effective config: {}", to_json(&cfg)?);

    let grid = table.to_grid()?;
    let outcome = run_test(&grid, &cfg)?;
    print_outcome(&outcome);
    if args.csv {
        write_file(&out.join("test.csv"), &outcome_csv(&outcome))?;
    }
    Ok(())
}

fn print_outcome(outcome: &TestOutcome) {
    println!("statistic: {}", format_sig(outcome.statistic, 9));
    println!("p-value: {}", format_sig(outcome.p_value, 9));
    match &outcome.pooled {
        Some(p) => println!(
            "beta (estimated): {}  95% CI [{}, {}]",
            format_sig(p.beta, 9),
            format_sig(p.ci_low, 9),
            format_sig(p.ci_high, 9)
        ),
        None => println!("beta (known): {}", format_sig(outcome.beta_used, 9)),
    }
    for d in &outcome.decisions {
        println!(
            "level {}%: {}",
            format_sig(d.level * 100.0, 6),
            if d.reject { "reject" } else { "no rejection" }
        );
    }
    println!(
        "blocks: {} contributing, {} skipped; valid: {}",
        outcome.contributing_blocks, outcome.skipped_blocks, outcome.valid
    );
}

fn outcome_csv(outcome: &TestOutcome) -> String {
    let mut header = String::from("statistic,p_value,beta,ci_low,ci_high");
    let mut row = format!(
        "{},{}",
        format_sig(outcome.statistic, 9),
        format_sig(outcome.p_value, 9)
    );
    match &outcome.pooled {
        Some(p) => {
            row.push_str(&format!(
                ",{},{},{}",
                format_sig(p.beta, 9),
                format_sig(p.ci_low, 9),
                format_sig(p.ci_high, 9)
            ));
        }
        None => row.push_str(&format!(",{},,", format_sig(outcome.beta_used, 9))),
    }
    for d in &outcome.decisions {
        header.push_str(&format!(",reject_{}", format_sig(d.level * 100.0, 6)));
        row.push_str(&format!(",{}", d.reject));
    }
    header.push_str(",skipped_blocks,contributing_blocks,valid\n");
    row.push_str(&format!(
        ",{},{},{}\n",
        outcome.skipped_blocks, outcome.contributing_blocks, outcome.valid
    ));
    header + &row
}

fn parse_windows(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|part| {
            part.trim().parse::<u32>().map_err(|_| {
                Error::Config(format!("windows must be comma-separated day counts, got {part:?}"))
            })
        })
        .collect()
}

fn cmd_mc(loaded: &Loaded, seed_flag: Option<u64>, out: &Path, args: &McArgs) -> Result<()> {
    let mut design = McDesign {
        sim: loaded.sim.clone(),
        test: loaded.test.clone(),
        ..McDesign::default()
    };
    resolve_kn(
        &mut design.test,
        None,
        loaded.test_kn_given,
        design.sim.steps_per_day as usize,
    );
    if let Some(r) = loaded.mc.replications {
        design.replications = r;
    }
    if let Some(w) = &loaded.mc.window_lengths {
        design.window_lengths = w.clone();
    }
    if let Some(r) = args.reps {
        design.replications = r;
    }
    if let Some(w) = &args.windows {
        design.window_lengths = parse_windows(w)?;
    }

    let hypotheses: Vec<Hypothesis> = match args.hypothesis.as_deref() {
        Some("both") => vec![Hypothesis::Null, Hypothesis::Alternative],
        Some(other) => vec![Hypothesis::parse(other)?],
        None => match loaded.mc.hypothesis {
            Some(h) => vec![h],
            None => vec![Hypothesis::Null, Hypothesis::Alternative],
        },
    };

    if let Some(s) = seed_flag {
        design.base_seed = s;
    } else if let Some(s) = loaded.mc.base_seed {
        design.base_seed = s;
    } else {
        design.base_seed = rand::random();
    }
    println!("base seed: {}", design.base_seed);
    println!(
        "effective config: {}",
        to_json(&json!({
            "replications": design.replications,
            "window_lengths": design.window_lengths,
            "hypotheses": hypotheses.iter().map(|h| h.label()).collect::<Vec<_>>(),
            "base_seed": design.base_seed,
            "sim": design.sim,
            "test": design.test,
        }))?
    );

    let mut reports: Vec<McReport> = Vec::new();
    for h in hypotheses {
        let mut d = design.clone();
        d.hypothesis = h;
        reports.push(run_mc(&d)?);
    }
    let refs: Vec<&McReport> = reports.iter().collect();
    print!("{}", mc::table(&refs));

    let mut csv = format!("# base_seed: {}\n", design.base_seed);
    csv.push_str(&reports[0].csv());
    for report in &reports[1..] {
        let body = report.csv();
        let (_, rows) = body.split_once('\n').expect("csv has a header line");
        csv.push_str(rows);
    }
    write_file(&out.join("mc.csv"), &csv)
}

fn cmd_window(loaded: &Loaded, out: &Path, args: &WindowArgs) -> Result<()> {
    let table = io::read_csv(&args.data)?;
    let mut cfg = loaded.test.clone();
    resolve_kn(&mut cfg, args.kn, loaded.test_kn_given, table.n_per_day());
    let scheme_str = args
        .scheme
        .clone()
        .or_else(|| loaded.window.scheme.clone())
        .unwrap_or_else(|| "weekly".into());
    let scheme = WindowScheme::parse(&scheme_str)?;
    let grouping = if args.calendar || loaded.window.calendar.unwrap_or(false) {
        Grouping::Calendar
    } else {
        Grouping::FixedLength
    };
    println!(
        "effective config: {}",
        to_json(&json!({
            "scheme": scheme.label(),
            "calendar": grouping == Grouping::Calendar,
            "test": cfg,
        }))?
    );

    let report = io::window_report_grouped(&table, scheme, grouping, &cfg)?;
    write_file(&out.join("windows.csv"), &windows_csv(&report))?;
    write_file(&out.join("summary.csv"), &io::summary_csv(&report))?;
    write_file(&out.join("betas.csv"), &io::betas_csv(&report))?;

    println!(
        "windows: {} ({} trailing days dropped)",
        report.rows.len(),
        report.dropped_days
    );
    for s in report.summary() {
        println!(
            "level {}%: rejected {} of {} valid windows (rate {})",
            format_sig(s.level * 100.0, 6),
            s.rejected,
            s.valid,
            format_sig(s.rate, 9)
        );
    }
    Ok(())
}
