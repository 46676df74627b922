//! Blow-up time and rate estimation from velocity records.
//!
//! Near the singularity the records suggest two competing models for the
//! diverging velocity,
//!
//! ```text
//! power law:  |V(t)| ~ c (t0 - t)^(-p)
//! log law:     V(t)  ~ C1 log(t0 - t) + C2
//! ```
//!
//! and both linearize through the derivative series `dV/dt`:
//!
//! * power: `V/(dV/dt) = -(t0 - t)/p` is affine in `t` with slope `-1/p`,
//! * log:   `(dV/dt)^{-1} = (t - t0)/C1` is affine in `t` with slope `1/C1`.
//!
//! [`fit_power_law`]/[`fit_log_law`] regress those quantities, then complete
//! the amplitude (`c` resp. `C2`) by least squares and score the *full model
//! in velocity space*: `MSE = sum (V_obs - V_fit)^2 / (n - 3)`, three fitted
//! parameters in either law. The two MSE values are the discriminator — on
//! data that truly follows one law the other's MSE is larger by orders of
//! magnitude.
//!
//! Two further estimators avoid `t0` entirely:
//!
//! * [`fit_loglog_t`] works on runs in the rescaled clock
//!   `T = ∫ (1 + V^{2n}) dt`. If `|V| ~ (t0-t)^{-p}` then for `2np > 1` the
//!   blow-up maps to `T = ∞` and `|V| ~ T^q` with `q = p/(4p - 1)` at
//!   `n = 2`; the log-log slope of `|V|` against `T` inverts back through
//!   `p = q/(4q - 1)`.
//! * [`synth_contact_ode`] integrates the limiting boundary dynamics
//!   `dβ/dt = -a4/(2β) - a5`, `V = a4/β`, the mechanism behind the
//!   `p = 1/2` prediction (`β ~ -sqrt(a4 (t0 - t))` when `a5 = 0`). It
//!   provides exact-rate synthetic series for validating the fitters against
//!   a known answer.
//!
//! All fits operate on explicit `[start, end]` windows: what the window
//! contains decides the answer near a singularity, so the window actually
//! used is part of every [`FitResult`].

use serde::Serialize;

use crate::discretization::DEFAULT_BETA_FLOOR;
use crate::error::{Error, Result};

/// Which of the two candidate singularity models a fit used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitLaw {
    Power,
    Log,
}

/// Outcome of a blow-up regression over one time window.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub law: FitLaw,
    /// Estimated blow-up time.
    pub t0: f64,
    /// `p` for the power law, `C1` for the log law.
    pub rate: f64,
    /// `c` for the power law, `C2` for the log law.
    pub amplitude: f64,
    /// Log-log slope when the rescaled-time estimator produced this result.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Mean squared error of the fitted model against the observed velocity,
    /// divided by `n - 3` (three fitted parameters in either law).
    pub mse: f64,
    /// `[t_start, t_end]` actually used (clamped to the available records).
    pub window: [f64; 2],
    /// Number of points entering the regression.
    pub count: usize,
    /// A power-law fit is self-consistent only when the estimated `t0` lies
    /// beyond the window and the rate is positive; fits violating that are
    /// still reported, flagged here.
    pub consistent: bool,
}

/// Limiting wall derivatives for the synthetic boundary dynamics.
///
/// `a4`/`a5` are the frozen values of `u_xxxx(0)`/`u_xxxxx(0)`; `t0` is the
/// implied blow-up time of `dβ/dt = -a4/(2β) - a5` started at `β(0) = beta0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub a4: f64,
    pub a5: f64,
    pub t0: f64,
    pub beta0: f64,
}

impl SynthParams {
    /// Requires `a4 > 0`, `beta0 < 0`, and `a4 + 2 a5 beta0 > 0` (otherwise
    /// the trajectory stalls at the equilibrium `β = -a4/(2 a5)` and never
    /// blows up). `t0` is filled in from the closed-form quadrature
    ///
    /// ```text
    /// t0 = beta0^2 / a4                                     (a5 = 0)
    /// t0 = beta0/a5 + a4/(2 a5^2) ln(a4 / (a4 + 2 a5 beta0)) (a5 != 0)
    /// ```
    pub fn new(a4: f64, a5: f64, beta0: f64) -> Result<Self> {
        if !(a4 > 0.0) {
            return Err(Error::Validation(format!("a4 > 0 required, got {a4}")));
        }
        if !(beta0 < 0.0) {
            return Err(Error::Validation(format!("beta0 < 0 required, got {beta0}")));
        }
        let w0 = a4 + 2.0 * a5 * beta0;
        if w0 <= 0.0 {
            return Err(Error::Validation(format!(
                "a4 + 2 a5 beta0 = {w0} <= 0: the boundary ODE never reaches blow-up"
            )));
        }
        // With y = 2 a5 beta0 / a4 the quadrature collapses to
        //   t0 = (2 beta0^2 / a4) (y - ln(1+y)) / y^2,
        // equal to beta0/a5 + a4/(2 a5^2) ln(a4/w0) but stable as a5 -> 0
        // (the naive form cancels ~|log10 y| digits).
        let t0 = if a5 == 0.0 {
            beta0 * beta0 / a4
        } else {
            let y = 2.0 * a5 * beta0 / a4;
            let phi = if y.abs() < 1e-4 {
                0.5 - y / 3.0 + y * y / 4.0 - y * y * y / 5.0
            } else {
                (y - y.ln_1p()) / (y * y)
            };
            2.0 * beta0 * beta0 / a4 * phi
        };
        Ok(SynthParams { a4, a5, t0, beta0 })
    }
}

/// `dV/dt` on a (possibly nonuniform) record grid.
///
/// Three-point central differences at interior points, second-order one-sided
/// at the two ends; exact for quadratics. No resampling — interpolation near
/// the singularity, where the steps shrink by many orders, would bias the
/// regressions far more than the stencil error does.
pub fn estimate_dvdt(times: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let n = times.len();
    if n < 3 || v.len() != n {
        return Err(Error::BadSeries(format!(
            "derivative estimation needs >= 3 aligned samples, got {} times / {} values",
            n,
            v.len()
        )));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadSeries(
            "derivative estimation needs strictly increasing times".into(),
        ));
    }
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let h1 = times[i] - times[i - 1];
        let h2 = times[i + 1] - times[i];
        out[i] = -h2 / (h1 * (h1 + h2)) * v[i - 1] + (h2 - h1) / (h1 * h2) * v[i]
            + h1 / (h2 * (h1 + h2)) * v[i + 1];
    }
    let (h1, h2) = (times[1] - times[0], times[2] - times[1]);
    out[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * v[0] + (h1 + h2) / (h1 * h2) * v[1]
        - h1 / (h2 * (h1 + h2)) * v[2];
    let (h1, h2) = (times[n - 2] - times[n - 3], times[n - 1] - times[n - 2]);
    out[n - 1] = h2 / (h1 * (h1 + h2)) * v[n - 3] - (h1 + h2) / (h1 * h2) * v[n - 2]
        + (h1 + 2.0 * h2) / (h2 * (h1 + h2)) * v[n - 1];
    Ok(out)
}

/// Least-squares line `y = slope x + intercept`; `None` when `x` has zero
/// variance.
fn linreg(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&xi| (xi - xm) * (xi - xm)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(&xi, &yi)| (xi - xm) * (yi - ym)).sum();
    let slope = sxy / sxx;
    Some((slope, ym - slope * xm))
}

/// Negative-velocity records inside `[start, end]`, as owned (t, V) columns.
fn window_records(
    times: &[f64],
    v: &[f64],
    start: f64,
    end: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if times.len() != v.len() {
        return Err(Error::BadSeries(format!(
            "misaligned series: {} times vs {} velocities",
            times.len(),
            v.len()
        )));
    }
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (&t, &vi) in times.iter().zip(v) {
        if t >= start && t <= end && vi < 0.0 {
            ts.push(t);
            vs.push(vi);
        }
    }
    if ts.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "window [{start}, {end}] holds {} usable (V < 0) points, need >= 4",
            ts.len()
        )));
    }
    Ok((ts, vs))
}

fn regression_line(ts: &[f64], y: &[f64], what: &str) -> Result<(f64, f64)> {
    let (slope, intercept) = linreg(ts, y)
        .ok_or_else(|| Error::DegenerateFit("window times have zero variance".into()))?;
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::DegenerateFit(format!(
            "{what} regression slope {slope} cannot be inverted"
        )));
    }
    Ok((slope, intercept))
}

/// Fit `|V| ~ c (t0 - t)^(-p)` on the records with `start <= t <= end`.
///
/// `V/(dV/dt)` is regressed on `t` (slope `-1/p`, intercept `t0/p`), the
/// amplitude `c` then minimizes the squared residuals of `log(-V)`, and the
/// reported MSE is taken in velocity space over the points the model can
/// represent (`t < t0`). Records at or beyond the estimated `t0` — possible
/// only on an inconsistent fit — are excluded from amplitude and MSE.
pub fn fit_power_law(times: &[f64], v: &[f64], start: f64, end: f64) -> Result<FitResult> {
    let (ts, vs) = window_records(times, v, start, end)?;
    let dv = estimate_dvdt(&ts, &vs)?;
    if dv.iter().any(|&d| d == 0.0) {
        return Err(Error::DegenerateFit(
            "dV/dt vanishes inside the window".into(),
        ));
    }
    let y: Vec<f64> = vs.iter().zip(&dv).map(|(&vi, &di)| vi / di).collect();
    let (slope, intercept) = regression_line(&ts, &y, "power-law")?;
    let p = -1.0 / slope;
    let t0 = -intercept / slope;
    let t_end = *ts.last().expect("window is non-empty");
    let consistent = t0 > t_end && p > 0.0;

    let valid: Vec<usize> = (0..ts.len()).filter(|&i| ts[i] < t0).collect();
    if valid.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "estimated t0 = {t0} leaves {} points below it, need >= 4",
            valid.len()
        )));
    }
    let log_c = valid
        .iter()
        .map(|&i| (-vs[i]).ln() + p * (t0 - ts[i]).ln())
        .sum::<f64>()
        / valid.len() as f64;
    let c = log_c.exp();
    let ss: f64 = valid
        .iter()
        .map(|&i| {
            let fit = -c * (t0 - ts[i]).powf(-p);
            (vs[i] - fit) * (vs[i] - fit)
        })
        .sum();
    Ok(FitResult {
        law: FitLaw::Power,
        t0,
        rate: p,
        amplitude: c,
        q: None,
        mse: ss / (valid.len() - 3) as f64,
        window: [ts[0], t_end],
        count: ts.len(),
        consistent,
    })
}

/// Fit `V ~ C1 log(t0 - t) + C2` on the records with `start <= t <= end`.
///
/// `(dV/dt)^{-1}` is regressed on `t` (slope `1/C1`, intercept `-t0/C1`);
/// `C2` then minimizes the velocity-space residuals, scored exactly as in
/// [`fit_power_law`] so the two MSE values are directly comparable.
pub fn fit_log_law(times: &[f64], v: &[f64], start: f64, end: f64) -> Result<FitResult> {
    let (ts, vs) = window_records(times, v, start, end)?;
    let dv = estimate_dvdt(&ts, &vs)?;
    if dv.iter().any(|&d| d == 0.0) {
        return Err(Error::DegenerateFit(
            "dV/dt vanishes inside the window".into(),
        ));
    }
    let y: Vec<f64> = dv.iter().map(|&di| 1.0 / di).collect();
    let (slope, intercept) = regression_line(&ts, &y, "log-law")?;
    let c1 = 1.0 / slope;
    let t0 = -intercept / slope;
    let t_end = *ts.last().expect("window is non-empty");

    let valid: Vec<usize> = (0..ts.len()).filter(|&i| ts[i] < t0).collect();
    if valid.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "estimated t0 = {t0} leaves {} points below it, need >= 4",
            valid.len()
        )));
    }
    let c2 = valid
        .iter()
        .map(|&i| vs[i] - c1 * (t0 - ts[i]).ln())
        .sum::<f64>()
        / valid.len() as f64;
    let ss: f64 = valid
        .iter()
        .map(|&i| {
            let fit = c1 * (t0 - ts[i]).ln() + c2;
            (vs[i] - fit) * (vs[i] - fit)
        })
        .sum();
    Ok(FitResult {
        law: FitLaw::Log,
        t0,
        rate: c1,
        amplitude: c2,
        q: None,
        mse: ss / (valid.len() - 3) as f64,
        window: [ts[0], t_end],
        count: ts.len(),
        consistent: t0 > t_end,
    })
}

/// Log-log slope estimator on a rescaled-clock series: regress `log |V|`
/// against `log T` over `start <= T <= end` and invert `q = p/(4p - 1)`.
///
/// Returns `(q, p)`. The inversion has a pole at `q = 1/4`; slopes at or
/// below it do not correspond to any blow-up rate and error out.
pub fn fit_loglog_t(big_t: &[f64], v: &[f64], start: f64, end: f64) -> Result<(f64, f64)> {
    if big_t.len() != v.len() {
        return Err(Error::BadSeries(format!(
            "misaligned series: {} clock values vs {} velocities",
            big_t.len(),
            v.len()
        )));
    }
    let mut lt = Vec::new();
    let mut lv = Vec::new();
    for (&ti, &vi) in big_t.iter().zip(v) {
        if ti >= start && ti <= end && ti > 0.0 && vi < 0.0 {
            lt.push(ti.ln());
            lv.push((-vi).ln());
        }
    }
    if lt.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "window [{start}, {end}] holds {} usable (T > 0, V < 0) points, need >= 4",
            lt.len()
        )));
    }
    let (q, _) = linreg(&lt, &lv)
        .ok_or_else(|| Error::DegenerateFit("window clock values have zero variance".into()))?;
    if q <= 0.25 {
        return Err(Error::InvalidSlope { q });
    }
    Ok((q, q / (4.0 * q - 1.0)))
}

// Dormand-Prince 5(4) tableau for the scalar boundary ODE.
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
const SYNTH_TOL: f64 = 1e-10;

/// Integrate the limiting boundary dynamics `dβ/dt = -a4/(2β) - a5` from
/// `β(0) = beta0` and sample `(β, V = a4/β)` exactly at the points of
/// `t_grid` (the adaptive steps are clipped to land on them — no
/// interpolation).
///
/// The grid must be strictly increasing and start at `t >= 0`. If the
/// trajectory crosses the velocity floor `β = -1e-12` before the grid is
/// exhausted, the ODE has effectively blown up inside the grid and
/// [`Error::BlowupReached`] is returned.
pub fn synth_contact_ode(params: &SynthParams, t_grid: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if t_grid.is_empty() {
        return Err(Error::BadSeries("empty sample grid".into()));
    }
    if t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadSeries(
            "sample grid must be strictly increasing and start at t >= 0".into(),
        ));
    }
    let f = |beta: f64| -params.a4 / (2.0 * beta) - params.a5;
    let mut t = 0.0;
    let mut beta = params.beta0;
    let mut h: f64 = 1e-6;
    let mut betas = Vec::with_capacity(t_grid.len());
    let mut vs = Vec::with_capacity(t_grid.len());
    for &target in t_grid {
        while t < target {
            let clipped = h.min(target - t);
            // one embedded 5(4) attempt
            let mut k = [0.0f64; 7];
            k[0] = f(beta);
            let mut failed = false;
            for s in 1..7 {
                let mut y = beta;
                for (j, kj) in k.iter().enumerate().take(s) {
                    y += clipped * DP_A[s - 1][j] * kj;
                }
                if y >= -DEFAULT_BETA_FLOOR {
                    failed = true;
                    break;
                }
                k[s] = f(y);
            }
            let (y5, err) = if failed {
                (f64::NAN, f64::INFINITY)
            } else {
                let mut y5 = beta;
                let mut y4 = beta;
                for j in 0..7 {
                    y5 += clipped * DP_B5[j] * k[j];
                    y4 += clipped * DP_B4[j] * k[j];
                }
                (y5, (y5 - y4).abs())
            };
            let scale = SYNTH_TOL * (1.0 + beta.abs());
            if err <= scale {
                let t_new = t + clipped;
                if t_new == t {
                    // accepted step below the clock's ULP: singular stall
                    return Err(Error::BlowupReached { t });
                }
                t = t_new;
                beta = y5;
                if beta >= -DEFAULT_BETA_FLOOR {
                    return Err(Error::BlowupReached { t });
                }
            }
            let factor = if err > 0.0 {
                (0.9 * (scale / err).powf(0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            h = (clipped * factor).max(1e-15);
            if h < 1e-14 && err > scale {
                return Err(Error::BlowupReached { t });
            }
        }
        betas.push(beta);
        vs.push(params.a4 / beta);
    }
    Ok((betas, vs))
}
