//! Time integration with adaptive step control
//!
//! The semi-discrete system `du/dt = A(V) u + b` is advanced by the implicit
//! trapezoidal (Heun) rule with one wrinkle: `A` depends on the velocity
//! `V = u4/beta`, which is itself a functional of the new state. Each step
//! therefore solves
//!
//! ```text
//! (I - dt/2 A(V+)) u+ = (I + dt/2 A(V_k)) u_k + dt/2 b_k + dt/2 b+
//! V+ = compute_velocity(u+)
//! ```
//!
//! as a one-dimensional fixed point in `V+`. A single predict-correct sweep
//! ([`heun_step_implicit`]) is the textbook form and converges whenever the
//! feedback gain is small, but the gain grows like `dt/dx^4` through the wall
//! traces, and past `dt ~ 20 dx^4` the sweep is an *unstable* iteration: the
//! velocity flip-flops around the compatible value, the step controller
//! mistakes the oscillation for truncation error, and the run stalls at a
//! crippled dt with a ringing V(t). (The effect is a property of the velocity
//! feedback, not of the linear scheme: fully damped backward-Euler stepping
//! rings identically.) The production stepper used by [`run_simulation`]
//! therefore drives the same corrector map to convergence with a secant
//! iteration on the scalar `V`; in the stable regime the secant accepts the
//! first corrector pass and the two steppers coincide.
//!
//! Local error is estimated by step doubling, `err = |u_2h - u_h|_inf / 3`,
//! and the accepted state is the two-half-step one. The step proposal
//! `dt' = safety * dt * (tol/err)^(1/3)` matches the locally third-order
//! accuracy of the accepted composite.
//!
//! Rescaled mode (`rescale_n = n`) integrates `dT = (1 + V^{2n}) dt`: the
//! operator and load are scaled by `1/(1 + V^{2n})`, each stage using the
//! scaling of the velocity its matrix is built from, and the physical time is
//! reconstructed alongside by the trapezoid rule in `T`.

use crate::discretization::{
    assemble_operator, boundary_traces, compute_velocity_with_floor, Grid, State,
    DEFAULT_BETA_FLOOR,
};
use crate::banded::BandedLu;
use crate::error::{Error, Result};
use crate::ic::{sample_initial_state, ICParams};
use serde::{Deserialize, Serialize};

/// Convergence tolerance of the velocity fixed point, relative to `1 + |V|`.
const V_FIXED_POINT_TOL: f64 = 1e-9;
/// Iteration cap for the velocity secant; exceeding it rejects the step.
const V_FIXED_POINT_MAX_ITERS: usize = 30;
/// Consecutive rejected steps before the run is declared stalled.
const MAX_CONSECUTIVE_REJECTIONS: usize = 50;

/// Tolerances, step bounds and stopping rules for a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Target on the step-doubling error estimate (infinity norm).
    pub tol: f64,
    pub dt_init: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    /// Safety factor in the step proposal, strictly inside (0, 1).
    pub safety: f64,
    /// Exponent n of the time rescaling `dT = (1 + V^{2n}) dt`; `None` runs
    /// in physical time.
    pub rescale_n: Option<u32>,
    /// Terminate with `VExceeded` when `|V|` reaches this.
    pub v_max: f64,
    /// Optional horizon on the integration clock (t, or T when rescaled).
    pub t_max: Option<f64>,
    /// Cap on attempted steps, accepted or not.
    pub max_steps: usize,
    /// `beta >= -beta_floor` terminates with `BetaVanished`.
    pub beta_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-5,
            dt_init: 1e-6,
            dt_max: 0.006,
            dt_min: 1e-12,
            safety: 0.9,
            rescale_n: None,
            v_max: 1e8,
            t_max: None,
            max_steps: 2_000_000,
            beta_floor: DEFAULT_BETA_FLOOR,
        }
    }
}

impl SolverConfig {
    /// Checks the mutual constraints; every violation names its invariant.
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64, name: &str| -> Result<()> {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be finite and > 0")));
            }
            Ok(())
        };
        finite_pos(self.tol, "solver.tol")?;
        finite_pos(self.dt_init, "solver.dt_init")?;
        finite_pos(self.dt_max, "solver.dt_max")?;
        finite_pos(self.dt_min, "solver.dt_min")?;
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::Validation(
                "solver step sizes must satisfy dt_min <= dt_init <= dt_max".into(),
            ));
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return Err(Error::Validation("solver.safety must lie in (0, 1)".into()));
        }
        if let Some(n) = self.rescale_n {
            if n < 1 {
                return Err(Error::Validation("solver.rescale_n must be >= 1".into()));
            }
        }
        finite_pos(self.v_max, "stop.V_max")?;
        if let Some(t) = self.t_max {
            finite_pos(t, "stop.t_max")?;
        }
        if self.max_steps == 0 {
            return Err(Error::Validation("stop.max_steps must be >= 1".into()));
        }
        if !(self.beta_floor.is_finite() && self.beta_floor >= 0.0) {
            return Err(Error::Validation("solver.beta_floor must be >= 0".into()));
        }
        Ok(())
    }
}

/// Why a run stopped. Termination is data, not a fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationReason {
    /// `beta` reached the floor: the blow-up was resolved to the grid's limit.
    #[serde(rename = "beta-vanished")]
    BetaVanished,
    /// The controller could not find an acceptable step above `dt_min`.
    #[serde(rename = "dt-underflow")]
    DtUnderflow,
    /// `|V|` crossed `V_max`.
    #[serde(rename = "V-exceeded")]
    VExceeded,
    /// The clock reached `t_max`.
    #[serde(rename = "horizon-reached")]
    HorizonReached,
    /// `max_steps` attempts were spent.
    #[serde(rename = "step-limit")]
    StepLimit,
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TerminationReason::BetaVanished => "beta-vanished",
            TerminationReason::DtUnderflow => "dt-underflow",
            TerminationReason::VExceeded => "V-exceeded",
            TerminationReason::HorizonReached => "horizon-reached",
            TerminationReason::StepLimit => "step-limit",
        };
        f.write_str(s)
    }
}

/// One accepted step. `t` is physical time; `big_t` the rescaled clock
/// (equal to `t` in physical runs, so the schema is mode-independent).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub big_t: f64,
    pub dt: f64,
    pub v: f64,
    pub beta: f64,
    pub u4: f64,
    pub u5: f64,
    /// `-u5 - V/2`, the semi-discrete rate `d(beta)/dt` of the traces.
    pub beta_prime_analytic: f64,
    /// Symmetric difference quotient of `beta` over the recorded times,
    /// filled in a post-pass (one-sided at the ends).
    pub beta_prime_numeric: f64,
}

/// A completed run: every accepted state plus the stopping verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeSeries {
    pub records: Vec<StepRecord>,
    pub reason: TerminationReason,
    /// Attempted steps, accepted or rejected.
    pub steps_attempted: usize,
}

impl TimeSeries {
    /// Physical time of the last accepted state.
    pub fn terminal_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }

    /// Rescaled clock of the last accepted state.
    pub fn terminal_clock(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.big_t)
    }
}

/// `1/(1 + V^{2n})`, the joint scaling of operator, load and physical time.
fn time_scale(v: f64, rescale_n: Option<u32>) -> f64 {
    match rescale_n {
        None => 1.0,
        Some(n) => 1.0 / (1.0 + v.powi(2 * n as i32)),
    }
}

fn build_scaled(v: f64, grid: &Grid, rescale_n: Option<u32>) -> (crate::discretization::OperatorMatrix, Vec<f64>) {
    let (mut op, mut load) = assemble_operator(v, grid);
    let s = time_scale(v, rescale_n);
    if s != 1.0 {
        op.scale(s);
        for l in &mut load {
            *l *= s;
        }
    }
    (op, load)
}

/// Rejection-or-fault outcome of a single step attempt.
enum StepError {
    /// Genuine error (singular solve, vanished beta): propagate.
    Fault(Error),
    /// The velocity iteration stalled; the controller should retry smaller.
    Retry,
}

impl From<Error> for StepError {
    fn from(e: Error) -> Self {
        StepError::Fault(e)
    }
}

/// Shared right-hand side of predictor and corrector:
/// `(I + dt/2 A(V_k)) u_k + dt/2 b_k` (the remaining `dt/2 b` is added per
/// stage with that stage's scaling).
fn trapezoid_rhs(state: &State, dt: f64, grid: &Grid, rescale_n: Option<u32>) -> Vec<f64> {
    let (op, load) = build_scaled(state.v, grid, rescale_n);
    let half = op.identity_plus_scaled(0.5 * dt);
    let mut rhs = half.apply(&state.u);
    for (r, l) in rhs.iter_mut().zip(&load) {
        *r += 0.5 * dt * l;
    }
    rhs
}

/// Solves the corrector system at trial velocity `v` and extracts the
/// velocity of the solved state.
fn corrector_solve(
    v: f64,
    rhs_base: &[f64],
    dt: f64,
    grid: &Grid,
    rescale_n: Option<u32>,
    beta_floor: f64,
) -> Result<(Vec<f64>, f64)> {
    let (op, load) = build_scaled(v, grid, rescale_n);
    let lhs = op.identity_plus_scaled(-0.5 * dt);
    let mut rhs = rhs_base.to_vec();
    for (r, l) in rhs.iter_mut().zip(&load) {
        *r += 0.5 * dt * l;
    }
    let lu = BandedLu::factor(&lhs)?;
    let u = lu.solve(&rhs);
    let v_new = compute_velocity_with_floor(&u, grid.dx, beta_floor)?;
    Ok((u, v_new))
}

/// One implicit trapezoid step in its textbook predict-correct form: solve at
/// `A(V_k)`, extract `V*`, rebuild at `A(V*)`, solve the same right-hand side
/// once more. When `V*` equals `V_k` bit for bit the second solve is skipped
/// (identical linear systems). Stable only while the velocity feedback gain
/// is small; [`run_simulation`] uses the converging variant instead.
pub fn heun_step_implicit(state: &State, dt: f64, grid: &Grid, cfg: &SolverConfig) -> Result<State> {
    let rhs = trapezoid_rhs(state, dt, grid, cfg.rescale_n);
    let (u_pred, v_star) = corrector_solve(state.v, &rhs, dt, grid, cfg.rescale_n, cfg.beta_floor)?;
    if v_star == state.v {
        return Ok(State { t: state.t + dt, u: u_pred, v: v_star });
    }
    let (u_new, v_new) = corrector_solve(v_star, &rhs, dt, grid, cfg.rescale_n, cfg.beta_floor)?;
    Ok(State { t: state.t + dt, u: u_new, v: v_new })
}

/// The production step: the corrector map iterated to self-consistency,
/// `V+ = compute_velocity(u_solve(V+))`, by a secant iteration seeded with
/// the predictor pair. Falls out after the first pass whenever that pass
/// already satisfies the tolerance.
fn implicit_step_converged(
    state: &State,
    dt: f64,
    grid: &Grid,
    cfg: &SolverConfig,
) -> std::result::Result<State, StepError> {
    let rhs = trapezoid_rhs(state, dt, grid, cfg.rescale_n);
    let solve = |v: f64| corrector_solve(v, &rhs, dt, grid, cfg.rescale_n, cfg.beta_floor);

    let mut v0 = state.v;
    let (u_pred, v_pred) = solve(v0)?;
    let mut f0 = v_pred - v0;
    if f0 == 0.0 {
        return Ok(State { t: state.t + dt, u: u_pred, v: v_pred });
    }
    let mut v1 = v_pred;
    let (mut u1, mut v1_out) = solve(v1)?;
    let mut f1 = v1_out - v1;
    for _ in 0..V_FIXED_POINT_MAX_ITERS {
        if f1.abs() <= V_FIXED_POINT_TOL * (1.0 + v1.abs()) {
            return Ok(State { t: state.t + dt, u: u1, v: v1_out });
        }
        if f1 == f0 || !f1.is_finite() {
            break;
        }
        let v2 = v1 - f1 * (v1 - v0) / (f1 - f0);
        if !v2.is_finite() {
            break;
        }
        v0 = v1;
        f0 = f1;
        v1 = v2;
        let (u_next, v_next) = solve(v1)?;
        u1 = u_next;
        v1_out = v_next;
        f1 = v1_out - v1;
    }
    Err(StepError::Retry)
}

/// One explicit trapezoid (Heun) step with `A` frozen at `V_k` for the slope
/// at both ends of the trial. Stable only for `dt <= dx^4/8`; it exists as
/// the cross-check on the implicit path, not as a production stepper.
pub fn heun_step_explicit(state: &State, dt: f64, grid: &Grid, cfg: &SolverConfig) -> Result<State> {
    let (op, load) = build_scaled(state.v, grid, cfg.rescale_n);
    let mut f0 = op.apply(&state.u);
    for (f, l) in f0.iter_mut().zip(&load) {
        *f += l;
    }
    let trial: Vec<f64> = state.u.iter().zip(&f0).map(|(u, f)| u + dt * f).collect();
    let mut f1 = op.apply(&trial);
    for (f, l) in f1.iter_mut().zip(&load) {
        *f += l;
    }
    let u_new: Vec<f64> = state
        .u
        .iter()
        .zip(f0.iter().zip(&f1))
        .map(|(u, (a, b))| u + 0.5 * dt * (a + b))
        .collect();
    let v_new = compute_velocity_with_floor(&u_new, grid.dx, cfg.beta_floor)?;
    Ok(State { t: state.t + dt, u: u_new, v: v_new })
}

/// Step-doubling estimate: `|u_2h - u_h|_inf / 3` for a locally third-order
/// step. The two-half-step state is the candidate that gets accepted.
pub fn estimate_local_error(full: &State, two_half: &State) -> f64 {
    full.u
        .iter()
        .zip(&two_half.u)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / 3.0
}

/// Next step size: `clamp(safety * dt * (tol/err)^(1/3), dt_min, dt_max)`,
/// with a vanishing estimate mapped straight to `dt_max`. Hitting the lower
/// clamp is the underflow fault.
pub fn adapt_dt(err: f64, dt: f64, cfg: &SolverConfig) -> Result<f64> {
    if err == 0.0 {
        return Ok(cfg.dt_max);
    }
    let proposed = cfg.safety * dt * (cfg.tol / err).cbrt();
    if proposed < cfg.dt_min {
        return Err(Error::DtUnderflow { dt_min: cfg.dt_min });
    }
    Ok(proposed.min(cfg.dt_max))
}

/// Integrates the rescaled clock `T(t) = int_0^t (1 + V^{2n}) dt'` over a
/// recorded trajectory by the trapezoid rule; `T(0) = 0`.
pub fn compute_rescaled_time(times: &[f64], velocities: &[f64], n: u32) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::Validation("rescale exponent n must be >= 1".into()));
    }
    if times.len() != velocities.len() {
        return Err(Error::BadSeries("times and velocities differ in length".into()));
    }
    if times.is_empty() {
        return Err(Error::BadSeries("empty series".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    let integrand = |v: f64| 1.0 + v.powi(2 * n as i32);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        if h <= 0.0 {
            return Err(Error::BadSeries("times must be strictly increasing".into()));
        }
        acc += 0.5 * h * (integrand(velocities[i - 1]) + integrand(velocities[i]));
        out.push(acc);
    }
    Ok(out)
}

/// Runs the adaptive loop from the sampled initial profile to termination.
/// Records every accepted step (and the initial state). See
/// [`run_simulation_observed`] to tap the accepted states as they happen.
pub fn run_simulation(ic: &ICParams, grid: &Grid, cfg: &SolverConfig) -> Result<TimeSeries> {
    run_simulation_observed(ic, grid, cfg, |_, _| {})
}

/// As [`run_simulation`], invoking `observer(state, t_physical)` after every
/// accepted step (including the initial state).
pub fn run_simulation_observed(
    ic: &ICParams,
    grid: &Grid,
    cfg: &SolverConfig,
    mut observer: impl FnMut(&State, f64),
) -> Result<TimeSeries> {
    cfg.validate()?;
    let mut state = sample_initial_state(ic, grid, cfg.beta_floor)?;
    let mut records: Vec<StepRecord> = Vec::new();
    let mut clock = 0.0; // t in physical runs, T in rescaled runs
    let mut t_phys = 0.0;
    let mut dt = cfg.dt_init;
    let mut rejections = 0usize;
    let mut attempts = 0usize;

    let tr = boundary_traces(&state.u, grid.dx);
    records.push(StepRecord {
        step: 0,
        t: 0.0,
        big_t: 0.0,
        dt: cfg.dt_init,
        v: state.v,
        beta: tr.beta,
        u4: tr.u4,
        u5: tr.u5,
        beta_prime_analytic: tr.beta_rate(state.v),
        beta_prime_numeric: 0.0,
    });
    observer(&state, 0.0);

    let reason = loop {
        if attempts >= cfg.max_steps {
            break TerminationReason::StepLimit;
        }
        let mut dt_eff = dt;
        if let Some(horizon) = cfg.t_max {
            if clock >= horizon * (1.0 - 1e-15) {
                break TerminationReason::HorizonReached;
            }
            dt_eff = dt.min(horizon - clock);
        }

        attempts += 1;
        let stepped = implicit_step_converged(&state, dt_eff, grid, cfg)
            .and_then(|full| {
                let h1 = implicit_step_converged(&state, 0.5 * dt_eff, grid, cfg)?;
                let h2 = implicit_step_converged(&h1, 0.5 * dt_eff, grid, cfg)?;
                Ok((full, h2))
            });
        let (full, candidate) = match stepped {
            Ok(pair) => pair,
            Err(StepError::Fault(Error::BetaNearZero { .. })) => {
                break TerminationReason::BetaVanished;
            }
            Err(StepError::Fault(e)) => return Err(e),
            Err(StepError::Retry) => {
                rejections += 1;
                if rejections >= MAX_CONSECUTIVE_REJECTIONS || dt_eff <= cfg.dt_min {
                    break TerminationReason::DtUnderflow;
                }
                dt = (0.25 * dt_eff).max(cfg.dt_min);
                continue;
            }
        };

        let err = estimate_local_error(&full, &candidate);
        if err <= cfg.tol {
            let tr = boundary_traces(&candidate.u, grid.dx);
            if tr.beta >= -cfg.beta_floor {
                break TerminationReason::BetaVanished;
            }
            let s_old = time_scale(state.v, cfg.rescale_n);
            let s_new = time_scale(candidate.v, cfg.rescale_n);
            clock += dt_eff;
            t_phys = if cfg.rescale_n.is_some() {
                t_phys + dt_eff * 0.5 * (s_old + s_new)
            } else {
                clock
            };
            state = candidate;
            records.push(StepRecord {
                step: records.len(),
                t: t_phys,
                big_t: clock,
                dt: dt_eff,
                v: state.v,
                beta: tr.beta,
                u4: tr.u4,
                u5: tr.u5,
                beta_prime_analytic: tr.beta_rate(state.v),
                beta_prime_numeric: 0.0,
            });
            observer(&state, t_phys);
            rejections = 0;
            if state.v.abs() >= cfg.v_max {
                break TerminationReason::VExceeded;
            }
        } else {
            rejections += 1;
            if rejections >= MAX_CONSECUTIVE_REJECTIONS {
                break TerminationReason::DtUnderflow;
            }
        }
        match adapt_dt(err, dt_eff, cfg) {
            Ok(next) => dt = next,
            Err(Error::DtUnderflow { .. }) => break TerminationReason::DtUnderflow,
            Err(e) => return Err(e),
        }
    };

    fill_beta_prime_numeric(&mut records);
    Ok(TimeSeries { records, reason, steps_attempted: attempts })
}

/// Post-pass for the numeric `d(beta)/dt` column: symmetric quotient over
/// the neighbouring records, one-sided at the ends, analytic fallback when
/// fewer than three records exist.
fn fill_beta_prime_numeric(records: &mut [StepRecord]) {
    let n = records.len();
    if n < 3 {
        for r in records.iter_mut() {
            r.beta_prime_numeric = r.beta_prime_analytic;
        }
        return;
    }
    for i in 0..n {
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        let dt = records[hi].t - records[lo].t;
        records[i].beta_prime_numeric = if dt > 0.0 {
            (records[hi].beta - records[lo].beta) / dt
        } else {
            records[i].beta_prime_analytic
        };
    }
}
