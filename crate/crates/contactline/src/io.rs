//! On-disk schemas and atomic file output.
//!
//! Three formats leave this module:
//!
//! * `series.csv` — one row per accepted step, fixed header
//!   [`SERIES_HEADER`], floats printed with 17 significant decimal digits so
//!   re-parsing reproduces the binary values exactly (rate fits amplify
//!   rounding near `t0`, so "close" is not good enough);
//! * `u_t<TIME>.csv` — profile snapshots, columns `x,u`, boundary points
//!   included;
//! * JSON documents (`summary.json`, `fit.json`, `index.json`) written via
//!   [`write_json`].
//!
//! Every write is whole-file atomic (write to a sibling temp file, then
//! rename), so concurrent sweep runs and interrupted processes never leave a
//! half-written artifact behind.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::discretization::Grid;
use crate::error::{Error, Result};
use crate::integrator::{StepRecord, TimeSeries};

/// Exact header row of `series.csv`.
pub const SERIES_HEADER: &str = "step,t,T,dt,V,beta,u4,u5,beta_prime_analytic,beta_prime_numeric";

fn io_err(context: String) -> impl FnOnce(std::io::Error) -> Error {
    move |source| Error::Io { context, source }
}

/// 17 significant decimal digits: the shortest width that round-trips every
/// f64 bit pattern.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write `bytes` to `path` atomically (temp file in the same directory, then
/// rename over the target).
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Validation(format!("not a file path: {}", path.display())))?;
    let mut tmp = path.to_path_buf();
    tmp.set_file_name(format!(".{}.tmp-{}", file_name.to_string_lossy(), std::process::id()));
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
    }
    fs::write(&tmp, bytes).map_err(io_err(format!("writing {}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(io_err(format!("renaming {} -> {}", tmp.display(), path.display())))?;
    Ok(())
}

/// Serialize any value as pretty JSON (trailing newline) and write atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Write the step records of a run as `series.csv`.
pub fn write_series_csv(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut text = String::with_capacity(64 + 200 * series.records.len());
    text.push_str(SERIES_HEADER);
    text.push('\n');
    for r in &series.records {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.step,
            fmt17(r.t),
            fmt17(r.big_t),
            fmt17(r.dt),
            fmt17(r.v),
            fmt17(r.beta),
            fmt17(r.u4),
            fmt17(r.u5),
            fmt17(r.beta_prime_analytic),
            fmt17(r.beta_prime_numeric),
        ));
    }
    atomic_write(path, text.as_bytes())
}

/// Re-parse a `series.csv`. The header must match [`SERIES_HEADER`] byte for
/// byte; every row must carry exactly ten fields.
pub fn read_series_csv(path: &Path) -> Result<Vec<StepRecord>> {
    let text =
        fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SERIES_HEADER => {}
        Some(h) => {
            return Err(Error::Parse(format!(
                "{}: unexpected header '{h}'",
                path.display()
            )))
        }
        None => return Err(Error::Parse(format!("{}: empty file", path.display()))),
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::Parse(format!(
                "{}: line {lineno}: expected 10 fields, got {}",
                path.display(),
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|_| {
                Error::Parse(format!(
                    "{}: line {lineno}: bad number '{}'",
                    path.display(),
                    fields[i]
                ))
            })
        };
        records.push(StepRecord {
            step: fields[0].parse::<usize>().map_err(|_| {
                Error::Parse(format!(
                    "{}: line {lineno}: bad step index '{}'",
                    path.display(),
                    fields[0]
                ))
            })?,
            t: num(1)?,
            big_t: num(2)?,
            dt: num(3)?,
            v: num(4)?,
            beta: num(5)?,
            u4: num(6)?,
            u5: num(7)?,
            beta_prime_analytic: num(8)?,
            beta_prime_numeric: num(9)?,
        });
    }
    Ok(records)
}

/// Write one profile snapshot (`x,u` rows over the full grid, boundary
/// points `u(0) = u(L) = 0` included).
pub fn write_snapshot_csv(path: &Path, grid: &Grid, u_interior: &[f64]) -> Result<()> {
    assert_eq!(
        u_interior.len(),
        grid.n,
        "snapshot expects {} interior values, got {}",
        grid.n,
        u_interior.len()
    );
    let mut text = String::with_capacity(48 * (grid.n + 2));
    text.push_str("x,u\n");
    text.push_str(&format!("{},{}\n", fmt17(0.0), fmt17(0.0)));
    for (i, &u) in u_interior.iter().enumerate() {
        text.push_str(&format!("{},{}\n", fmt17(grid.x(i + 1)), fmt17(u)));
    }
    text.push_str(&format!("{},{}\n", fmt17(grid.length), fmt17(0.0)));
    atomic_write(path, text.as_bytes())
}
