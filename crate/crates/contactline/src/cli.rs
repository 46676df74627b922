//! Command-line driver: `simulate`, `fit`, `sweep`.
//!
//! Exit codes follow [`Error::exit_code`]: 0 on clean termination (a
//! detected blow-up is a *successful* run), 1 on config/input problems, 2 on
//! numerical faults, 3 on failed fits.

use std::collections::BTreeMap;
use std::ffi::OsStr;
use std::path::{Path, PathBuf};
use std::{env, fs, thread};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::blowup::{self, FitResult};
use crate::config::{parse_config, ParsedConfig, RunConfig, ValueSource};
use crate::discretization::onesided_wall_derivatives;
use crate::error::{Error, Result};
use crate::ic::sample_initial_state;
use crate::integrator::{run_simulation_observed, TerminationReason};
use crate::io::{read_series_csv, write_json, write_series_csv, write_snapshot_csv};

/// Environment variable overriding the output root (below an explicit
/// `--out`, above the config's `output.dir`).
pub const OUT_ENV: &str = "CONTACTLINE_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "contactline",
    version,
    about = "Finite-time blow-up simulations of a reduced contact-line model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation; writes series.csv, profile snapshots, summary.json.
    Simulate {
        /// Config file, key=value lines or JSON; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides config output.dir and CONTACTLINE_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit blow-up laws to a recorded series; writes fit.json next to it.
    Fit {
        /// Path to a series.csv produced by `simulate`.
        #[arg(long)]
        series: PathBuf,
        #[arg(long, value_enum)]
        law: LawChoice,
        /// Window start (physical t, or T for loglogT); repeatable.
        #[arg(long, required = true)]
        start: Vec<f64>,
        /// Window end paired with the --start at the same position;
        /// unmatched starts run to the last record.
        #[arg(long)]
        end: Vec<f64>,
    },
    /// Run one simulation per (a, b) pair, concurrently; writes index.json.
    Sweep {
        /// CSV of initial-profile pairs, one `a,b` per line.
        #[arg(long)]
        pairs: PathBuf,
        /// Base config applied to every run.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawChoice {
    Power,
    Log,
    /// Log-log slope in rescaled time (uses the T column).
    #[value(name = "loglogT")]
    LoglogT,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out } => cmd_simulate(config.as_deref(), out),
        Command::Fit {
            series,
            law,
            start,
            end,
        } => cmd_fit(&series, law, &start, &end),
        Command::Sweep { pairs, config } => cmd_sweep(&pairs, config.as_deref()),
    }
}

fn io_err(context: String) -> impl FnOnce(std::io::Error) -> Error {
    move |source| Error::Io { context, source }
}

fn read_config(path: Option<&Path>) -> Result<ParsedConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p)
            .map_err(io_err(format!("reading config {}", p.display())))?,
        None => String::new(),
    };
    parse_config(&text)
}

/// Output-root precedence: explicit flag, then [`OUT_ENV`], then the config.
fn resolve_out(flag: Option<PathBuf>, env_root: Option<&OsStr>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p;
    }
    if let Some(root) = env_root {
        return PathBuf::from(root);
    }
    PathBuf::from(&cfg.output.dir)
}

/// What one finished run reports upward (summary.json and sweep index).
#[derive(Debug, Clone, Copy, Serialize)]
struct RunOutcome {
    reason: TerminationReason,
    terminal_time: f64,
    terminal_clock: f64,
    /// Discrete initial velocity from the one-sided wall extraction.
    v0: f64,
    steps_accepted: usize,
    steps_attempted: usize,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    reason: TerminationReason,
    terminal_time: f64,
    terminal_clock: f64,
    steps_accepted: usize,
    steps_attempted: usize,
    v0: f64,
    snapshots: Vec<String>,
    config: &'a RunConfig,
    provenance: &'a BTreeMap<String, ValueSource>,
}

/// Simulate one parsed config into `outdir`.
fn run_one(parsed: &ParsedConfig, outdir: &Path) -> Result<RunOutcome> {
    let cfg = &parsed.config;
    let icp = cfg.ic_params()?;
    let grid = cfg.grid()?;
    let solver = cfg.solver_config();
    fs::create_dir_all(outdir)
        .map_err(io_err(format!("creating output dir {}", outdir.display())))?;

    let init = sample_initial_state(&icp, &grid, solver.beta_floor)?;
    let tr0 = onesided_wall_derivatives(&init.u, grid.dx);
    let v0 = tr0.u4 / tr0.beta;

    let mut snap_times = cfg.output.snapshot_times.clone();
    snap_times.sort_by(f64::total_cmp);
    snap_times.dedup();
    let mut next_snap = 0;
    let mut snaps: Vec<(f64, Vec<f64>)> = Vec::new();
    let series = run_simulation_observed(&icp, &grid, &solver, |state, t| {
        // capture at the first accepted state at or past each requested time
        while next_snap < snap_times.len() && t >= snap_times[next_snap] {
            snaps.push((snap_times[next_snap], state.u.clone()));
            next_snap += 1;
        }
    })?;

    write_series_csv(&outdir.join("series.csv"), &series)?;
    let mut snapshot_files = Vec::new();
    for (ts, u) in &snaps {
        let name = format!("u_t{ts}.csv");
        write_snapshot_csv(&outdir.join(&name), &grid, u)?;
        snapshot_files.push(name);
    }

    let outcome = RunOutcome {
        reason: series.reason,
        terminal_time: series.terminal_time(),
        terminal_clock: series.terminal_clock(),
        v0,
        steps_accepted: series.records.len(),
        steps_attempted: series.steps_attempted,
    };
    let summary = RunSummary {
        reason: outcome.reason,
        terminal_time: outcome.terminal_time,
        terminal_clock: outcome.terminal_clock,
        steps_accepted: outcome.steps_accepted,
        steps_attempted: outcome.steps_attempted,
        v0,
        snapshots: snapshot_files,
        config: cfg,
        provenance: &parsed.provenance,
    };
    write_json(&outdir.join("summary.json"), &summary)?;
    Ok(outcome)
}

fn cmd_simulate(config: Option<&Path>, out: Option<PathBuf>) -> Result<()> {
    let parsed = read_config(config)?;
    let outdir = resolve_out(out, env::var_os(OUT_ENV).as_deref(), &parsed.config);
    run_one(&parsed, &outdir)?;
    Ok(())
}

/// One row of fit.json. Power/log rows carry the full [`FitResult`]; the
/// rescaled-clock estimator has no `t0` by construction, so its rows carry
/// only the slope pair.
#[derive(Serialize)]
#[serde(untagged)]
enum FitRow {
    Law(FitResult),
    LogLog {
        law: &'static str,
        q: f64,
        p: f64,
        window: [f64; 2],
        count: usize,
    },
}

fn cmd_fit(series: &Path, law: LawChoice, starts: &[f64], ends: &[f64]) -> Result<()> {
    if ends.len() > starts.len() {
        return Err(Error::Parse(format!(
            "got {} --end values for {} --start values",
            ends.len(),
            starts.len()
        )));
    }
    let records = read_series_csv(series)?;
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let big_t: Vec<f64> = records.iter().map(|r| r.big_t).collect();
    let v: Vec<f64> = records.iter().map(|r| r.v).collect();

    let mut rows = Vec::with_capacity(starts.len());
    for (i, &start) in starts.iter().enumerate() {
        let end = ends.get(i).copied().unwrap_or(f64::INFINITY);
        let row = match law {
            LawChoice::Power => FitRow::Law(blowup::fit_power_law(&t, &v, start, end)?),
            LawChoice::Log => FitRow::Law(blowup::fit_log_law(&t, &v, start, end)?),
            LawChoice::LoglogT => {
                let (q, p) = blowup::fit_loglog_t(&big_t, &v, start, end)?;
                let used: Vec<f64> = big_t
                    .iter()
                    .zip(&v)
                    .filter(|&(&ti, &vi)| ti >= start && ti <= end && ti > 0.0 && vi < 0.0)
                    .map(|(&ti, _)| ti)
                    .collect();
                FitRow::LogLog {
                    law: "loglogT",
                    q,
                    p,
                    window: [used[0], *used.last().expect("fit used >= 4 points")],
                    count: used.len(),
                }
            }
        };
        rows.push(row);
    }
    write_json(&series.with_file_name("fit.json"), &rows)
}

fn parse_pairs(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if idx == 0 && line.eq_ignore_ascii_case("a,b") {
            continue; // optional header row
        }
        let lineno = idx + 1;
        let (a_txt, b_txt) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("line {lineno}: expected 'a,b', got '{line}'")))?;
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {lineno}: bad number '{}'", s.trim())))
        };
        out.push((parse(a_txt)?, parse(b_txt)?));
    }
    if out.is_empty() {
        return Err(Error::Parse("pair list is empty".into()));
    }
    Ok(out)
}

/// Deterministic run-directory names: `a<A>_b<B>`, with ordinal suffixes
/// `-1`, `-2`, … on every occurrence of a duplicated pair.
fn sweep_dir_names(pairs: &[(f64, f64)]) -> Vec<String> {
    let base: Vec<String> = pairs
        .iter()
        .map(|&(a, b)| format!("a{a}_b{b}"))
        .collect();
    let mut total: BTreeMap<&str, usize> = BTreeMap::new();
    for name in &base {
        *total.entry(name).or_insert(0) += 1;
    }
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    base.iter()
        .map(|name| {
            if total[name.as_str()] > 1 {
                let k = seen.entry(name).or_insert(0);
                *k += 1;
                format!("{name}-{k}")
            } else {
                name.clone()
            }
        })
        .collect()
}

#[derive(Serialize)]
struct IndexEntry {
    a: f64,
    b: f64,
    dir: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[serde(flatten)]
    outcome: Option<RunOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn cmd_sweep(pairs_path: &Path, config: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(pairs_path)
        .map_err(io_err(format!("reading pairs {}", pairs_path.display())))?;
    let pairs = parse_pairs(&text)?;
    let base = read_config(config)?;
    let outroot = resolve_out(None, env::var_os(OUT_ENV).as_deref(), &base.config);
    let names = sweep_dir_names(&pairs);

    // per-pair configs: override the profile parameters, keep everything else
    let jobs: Vec<(ParsedConfig, PathBuf)> = pairs
        .iter()
        .zip(&names)
        .map(|(&(a, b), name)| {
            let mut parsed = base.clone();
            parsed.config.ic.a = a;
            parsed.config.ic.b = b;
            parsed.config.output.dir = outroot.join(name).to_string_lossy().into_owned();
            parsed.provenance.insert("ic.a".into(), ValueSource::User);
            parsed.provenance.insert("ic.b".into(), ValueSource::User);
            let dir = outroot.join(name);
            (parsed, dir)
        })
        .collect();

    let outcomes: Vec<Result<RunOutcome>> = thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(parsed, dir)| scope.spawn(move || run_one(parsed, dir)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let mut entries = Vec::with_capacity(pairs.len());
    let mut first_err: Option<Error> = None;
    let mut any_ok = false;
    for ((&(a, b), name), outcome) in pairs.iter().zip(&names).zip(outcomes) {
        let entry = match outcome {
            Ok(out) => {
                any_ok = true;
                IndexEntry {
                    a,
                    b,
                    dir: name.clone(),
                    status: "ok",
                    outcome: Some(out),
                    error: None,
                }
            }
            Err(e) => {
                let msg = e.to_string();
                if first_err.is_none() {
                    first_err = Some(e);
                }
                IndexEntry {
                    a,
                    b,
                    dir: name.clone(),
                    status: "error",
                    outcome: None,
                    error: Some(msg),
                }
            }
        };
        entries.push(entry);
    }
    write_json(&outroot.join("index.json"), &entries)?;
    if !any_ok {
        // every run failed: surface the first failure as the sweep's own
        return Err(first_err.expect("at least one pair was attempted"));
    }
    Ok(())
}
