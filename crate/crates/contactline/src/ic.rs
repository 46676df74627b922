//! Initial profiles for the slope field.
//!
//! The two-parameter family
//!
//! ```text
//! u0(x) = -(1/4) e^{-a x} x [ 4 + (4a+1) x + a(2a+1) x^2 + b x^3 ],   a > 0, b >= 0
//! ```
//!
//! is built to satisfy every boundary requirement of the model exactly:
//! `u0(0) = 0`, `u0'(0) = -1` (so beta starts at -1), `u0''(0) = -1/2`,
//! `u0'''(0) = 0`, and exponential decay at the far end. Its closed-form
//! initial velocity is `V(0) = 6b - 4a^3 - 3a^2`, which lets tests pin the
//! discrete velocity extraction against an exact target.

use crate::discretization::{compute_velocity_with_floor, Grid, State};
use crate::error::{Error, Result};

/// Parameters `(a, b)` selecting a member of the initial-profile family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ICParams {
    pub a: f64,
    pub b: f64,
}

impl ICParams {
    /// Requires `a > 0` and `b >= 0`, both finite.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Validation(format!(
                "initial-profile parameter a must be finite and > 0, got {a}"
            )));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::Validation(format!(
                "initial-profile parameter b must be finite and >= 0, got {b}"
            )));
        }
        Ok(ICParams { a, b })
    }
}

/// Evaluate the initial slope profile at `x`.
pub fn eval_u0(p: &ICParams, x: f64) -> f64 {
    let a = p.a;
    let poly = 4.0 + (4.0 * a + 1.0) * x + a * (2.0 * a + 1.0) * x * x + p.b * x * x * x;
    -0.25 * (-a * x).exp() * x * poly
}

/// Exact initial advection velocity of the profile: `6b - 4a^3 - 3a^2`.
///
/// [`crate::discretization::onesided_wall_derivatives`] applied to a sampled
/// profile recovers this to O(dx^2). The scheme's own feedback quotient
/// ([`compute_velocity_with_floor`]) starts from its compatibility value
/// instead and relaxes onto the true velocity as the wall layer forms; see
/// the discretization module docs.
pub fn initial_velocity(p: &ICParams) -> f64 {
    6.0 * p.b - 4.0 * p.a.powi(3) - 3.0 * p.a * p.a
}

/// Sample the profile on the interior points of `grid` and attach the
/// scheme's discrete feedback velocity.
pub fn sample_initial_state(p: &ICParams, grid: &Grid, beta_floor: f64) -> Result<State> {
    let u: Vec<f64> = (1..=grid.n).map(|i| eval_u0(p, grid.x(i))).collect();
    let v = compute_velocity_with_floor(&u, grid.dx, beta_floor)?;
    Ok(State { t: 0.0, u, v })
}
