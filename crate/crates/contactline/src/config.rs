//! Run configuration: dotted-key schema, defaults, parsing, provenance.
//!
//! A run is configured by at most fifteen keys grouped into five sections
//! (`ic`, `grid`, `solver`, `stop`, `output`). Input is either a sequence of
//! `key=value` lines (`#` comments allowed) or a single JSON document, nested
//! (`{"ic": {"a": 0.5}}`) or flat (`{"ic.a": 0.5}`). Unknown keys are
//! rejected rather than ignored — a typoed key silently falling back to its
//! default is the worst failure mode a long simulation can have.
//!
//! Every constructor invariant of the modules a [`RunConfig`] feeds
//! ([`ICParams`], [`Grid`], [`SolverConfig`]) is re-checked at parse time, so
//! a config that parses cleanly also starts cleanly. The parser records
//! per-key provenance (default vs user) for the run summary.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::discretization::Grid;
use crate::error::{Error, Result};
use crate::ic::ICParams;
use crate::integrator::SolverConfig;

/// Initial-profile section.
#[derive(Debug, Clone, Serialize)]
pub struct IcSection {
    pub a: f64,
    pub b: f64,
}

/// Spatial-grid section.
#[derive(Debug, Clone, Serialize)]
pub struct GridSection {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

/// Time-stepper section.
#[derive(Debug, Clone, Serialize)]
pub struct SolverSection {
    pub tol: f64,
    pub dt_init: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    pub safety: f64,
    pub rescale_n: Option<u32>,
}

/// Termination section.
#[derive(Debug, Clone, Serialize)]
pub struct StopSection {
    #[serde(rename = "V_max")]
    pub v_max: f64,
    pub t_max: Option<f64>,
    pub max_steps: usize,
}

/// Output section.
#[derive(Debug, Clone, Serialize)]
pub struct OutputSection {
    pub dir: String,
    pub snapshot_times: Vec<f64>,
}

/// Fully-defaulted configuration of one simulation run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub ic: IcSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub stop: StopSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    /// The default run is the reference blow-up case `(a, b) = (0.5, 0)` on
    /// the standard grid (`L = 40`, `N = 799`, so `dx = 0.05`).
    fn default() -> Self {
        let s = SolverConfig::default();
        RunConfig {
            ic: IcSection { a: 0.5, b: 0.0 },
            grid: GridSection { length: 40.0, n: 799 },
            solver: SolverSection {
                tol: s.tol,
                dt_init: s.dt_init,
                dt_max: s.dt_max,
                dt_min: s.dt_min,
                safety: s.safety,
                rescale_n: None,
            },
            stop: StopSection {
                v_max: s.v_max,
                t_max: None,
                max_steps: s.max_steps,
            },
            output: OutputSection {
                dir: "out".into(),
                snapshot_times: Vec::new(),
            },
        }
    }
}

impl RunConfig {
    pub fn ic_params(&self) -> Result<ICParams> {
        ICParams::new(self.ic.a, self.ic.b)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.length, self.grid.n)
    }

    /// Assemble the integrator configuration (termination limits fold in).
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            tol: self.solver.tol,
            dt_init: self.solver.dt_init,
            dt_max: self.solver.dt_max,
            dt_min: self.solver.dt_min,
            safety: self.solver.safety,
            rescale_n: self.solver.rescale_n,
            v_max: self.stop.v_max,
            t_max: self.stop.t_max,
            max_steps: self.stop.max_steps,
            ..SolverConfig::default()
        }
    }

    /// Re-check every module invariant this config feeds.
    pub fn validate(&self) -> Result<()> {
        self.ic_params()?;
        self.grid()?;
        self.solver_config().validate()?;
        if self.output.dir.is_empty() {
            return Err(Error::Validation("output.dir must be non-empty".into()));
        }
        for &t in &self.output.snapshot_times {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Validation(format!(
                    "output.snapshot_times entries must be finite and >= 0, got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Where a configuration value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueSource {
    Default,
    User,
}

/// Parse outcome: the config plus one provenance entry per schema key.
#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub config: RunConfig,
    pub provenance: BTreeMap<String, ValueSource>,
}

/// Every key the schema accepts, in section order.
pub const CONFIG_KEYS: [&str; 15] = [
    "ic.a",
    "ic.b",
    "grid.L",
    "grid.N",
    "solver.tol",
    "solver.dt_init",
    "solver.dt_max",
    "solver.dt_min",
    "solver.safety",
    "solver.rescale_n",
    "stop.V_max",
    "stop.t_max",
    "stop.max_steps",
    "output.dir",
    "output.snapshot_times",
];

/// A value before typing: a `key=value` text fragment or a JSON node.
enum RawValue<'a> {
    Text(&'a str),
    Json(&'a serde_json::Value),
}

impl RawValue<'_> {
    fn as_f64(&self, key: &str) -> Result<f64> {
        match self {
            RawValue::Text(s) => s
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("key {key}: expected a number, got '{s}'"))),
            RawValue::Json(v) => v
                .as_f64()
                .ok_or_else(|| Error::Parse(format!("key {key}: expected a number, got {v}"))),
        }
    }

    fn as_usize(&self, key: &str) -> Result<usize> {
        match self {
            RawValue::Text(s) => s.parse::<usize>().map_err(|_| {
                Error::Parse(format!(
                    "key {key}: expected a non-negative integer, got '{s}'"
                ))
            }),
            RawValue::Json(v) => v
                .as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| {
                    Error::Parse(format!(
                        "key {key}: expected a non-negative integer, got {v}"
                    ))
                }),
        }
    }

    fn as_opt_u32(&self, key: &str) -> Result<Option<u32>> {
        match self {
            RawValue::Json(serde_json::Value::Null) => Ok(None),
            RawValue::Text(s) if s.eq_ignore_ascii_case("none") => Ok(None),
            RawValue::Text(s) => s
                .parse::<u32>()
                .map(Some)
                .map_err(|_| {
                    Error::Parse(format!(
                        "key {key}: expected a non-negative integer or 'none', got '{s}'"
                    ))
                }),
            RawValue::Json(v) => v
                .as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .map(Some)
                .ok_or_else(|| {
                    Error::Parse(format!(
                        "key {key}: expected a non-negative integer or null, got {v}"
                    ))
                }),
        }
    }

    fn as_opt_f64(&self, key: &str) -> Result<Option<f64>> {
        match self {
            RawValue::Json(serde_json::Value::Null) => Ok(None),
            RawValue::Text(s) if s.eq_ignore_ascii_case("none") => Ok(None),
            other => other.as_f64(key).map(Some),
        }
    }

    fn as_string(&self, key: &str) -> Result<String> {
        match self {
            RawValue::Text(s) => Ok((*s).to_string()),
            RawValue::Json(v) => v
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("key {key}: expected a string, got {v}"))),
        }
    }

    fn as_f64_list(&self, key: &str) -> Result<Vec<f64>> {
        match self {
            RawValue::Text(s) => {
                let s = s.trim();
                if s.is_empty() {
                    return Ok(Vec::new());
                }
                s.split(',')
                    .map(|part| {
                        part.trim().parse::<f64>().map_err(|_| {
                            Error::Parse(format!(
                                "key {key}: expected comma-separated numbers, got '{part}'"
                            ))
                        })
                    })
                    .collect()
            }
            RawValue::Json(v) => {
                let arr = v.as_array().ok_or_else(|| {
                    Error::Parse(format!("key {key}: expected an array of numbers, got {v}"))
                })?;
                arr.iter()
                    .map(|e| {
                        e.as_f64().ok_or_else(|| {
                            Error::Parse(format!("key {key}: expected numbers, got {e}"))
                        })
                    })
                    .collect()
            }
        }
    }
}

fn set_key(cfg: &mut RunConfig, key: &str, raw: RawValue<'_>) -> Result<()> {
    match key {
        "ic.a" => cfg.ic.a = raw.as_f64(key)?,
        "ic.b" => cfg.ic.b = raw.as_f64(key)?,
        "grid.L" => cfg.grid.length = raw.as_f64(key)?,
        "grid.N" => cfg.grid.n = raw.as_usize(key)?,
        "solver.tol" => cfg.solver.tol = raw.as_f64(key)?,
        "solver.dt_init" => cfg.solver.dt_init = raw.as_f64(key)?,
        "solver.dt_max" => cfg.solver.dt_max = raw.as_f64(key)?,
        "solver.dt_min" => cfg.solver.dt_min = raw.as_f64(key)?,
        "solver.safety" => cfg.solver.safety = raw.as_f64(key)?,
        "solver.rescale_n" => cfg.solver.rescale_n = raw.as_opt_u32(key)?,
        "stop.V_max" => cfg.stop.v_max = raw.as_f64(key)?,
        "stop.t_max" => cfg.stop.t_max = raw.as_opt_f64(key)?,
        "stop.max_steps" => cfg.stop.max_steps = raw.as_usize(key)?,
        "output.dir" => cfg.output.dir = raw.as_string(key)?,
        "output.snapshot_times" => cfg.output.snapshot_times = raw.as_f64_list(key)?,
        _ => return Err(Error::Parse(format!("unknown key '{key}'"))),
    }
    Ok(())
}

fn apply_json(
    cfg: &mut RunConfig,
    prov: &mut BTreeMap<String, ValueSource>,
    prefix: &str,
    value: &serde_json::Value,
) -> Result<()> {
    let map = value.as_object().ok_or_else(|| {
        Error::Parse(format!(
            "config JSON node '{}' must be an object",
            if prefix.is_empty() { "<root>" } else { prefix }
        ))
    })?;
    for (k, v) in map {
        let full = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        // arrays are leaves (snapshot_times); only objects denote sections
        if v.is_object() {
            apply_json(cfg, prov, &full, v)?;
        } else {
            set_key(cfg, &full, RawValue::Json(v))?;
            prov.insert(full, ValueSource::User);
        }
    }
    Ok(())
}

/// Parse `key=value` lines or a JSON document into a fully-defaulted,
/// validated [`RunConfig`] with per-key provenance.
///
/// Empty input yields the pure default configuration.
pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let mut cfg = RunConfig::default();
    let mut prov: BTreeMap<String, ValueSource> = CONFIG_KEYS
        .iter()
        .map(|&k| (k.to_string(), ValueSource::Default))
        .collect();

    if text.trim_start().starts_with('{') {
        let doc: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("config JSON: {e}")))?;
        apply_json(&mut cfg, &mut prov, "", &doc)?;
    } else {
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {lineno}: expected key=value, got '{line}'"))
            })?;
            let key = key.trim();
            set_key(&mut cfg, key, RawValue::Text(value.trim()))
                .map_err(|e| match e {
                    Error::Parse(msg) => Error::Parse(format!("line {lineno}: {msg}")),
                    other => other,
                })?;
            prov.insert(key.to_string(), ValueSource::User);
        }
    }

    cfg.validate()?;
    Ok(ParsedConfig {
        config: cfg,
        provenance: prov,
    })
}
