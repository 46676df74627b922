//! Spatial discretization of the slope equation
//!
//! ```text
//! u_t + u_xxxx = V(t) u_x        on x in (0, L)
//! u(0) = 0,  u_xx(0) = -1/2,  u_xxx(0) = 0,  u(L) = 0,  u_xx(L) = 0
//! ```
//!
//! on the uniform grid `x_i = i dx`, `i = 0..N+1`, `dx = L/(N+1)`. Only the
//! interior values `u_1..u_N` are unknowns; the boundary conditions are folded
//! into the matrix rows through ghost values.
//!
//! Near `x = 0` the profile is extended by the mirror rule
//! `u(-x) = -u(x) - x^2/2`, which reproduces `u(0) = 0`, `u_xx(0) = -1/2` and
//! `u_xxx(0) = 0`. At the far end the homogeneous conditions give the
//! antisymmetric extension `u(L + x) = -u(L - x)`.
//!
//! The advection velocity is not an input: it is recovered from the solution
//! itself as `V = u_xxxx(0) / u_x(0)`, the over-determining consequence of the
//! boundary data. The boundary slope `beta = u_x(0) < 0` shrinking to zero is
//! the blow-up signature, since `V ~ u_xxxx(0)/beta` then diverges.
//!
//! Two trace extractions coexist here, and the distinction is load-bearing:
//!
//! * [`boundary_traces`] evaluates the *same* centered stencils the operator
//!   uses, at the wall, through the ghost extension. The resulting quotient
//!   `V = u4/beta` is the discrete compatibility condition `u_t(0) = 0` of
//!   the scheme itself; it is what must feed back into the operator. It is
//!   **not** a convergent approximation of the one-sided derivatives of a
//!   smooth profile (on analytic samples `u4 -> (7/6) u_xxxx(0)` and `u5`
//!   diverges like `-u_xxxx(0)/(4 dx)`) because the mirror extension is only
//!   C^3 across the wall. Along the discrete trajectory the near-wall values
//!   equilibrate to this quotient, so it is the dynamically correct velocity;
//!   driving the operator with any other wall functional re-excites the
//!   stiffest modes every step and the integration collapses.
//!
//! * [`onesided_wall_derivatives`] extracts the genuine one-sided derivatives
//!   from smooth sampled data at second/third order. Use it for initial
//!   profiles and convergence diagnostics, never as the feedback velocity.

use crate::error::{Error, Result};

/// Default guard distance from `beta = 0` below which the velocity quotient
/// is considered undefined.
pub const DEFAULT_BETA_FLOOR: f64 = 1e-12;

/// Uniform grid on `[0, L]` with `n` interior points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    /// Domain length `L`.
    pub length: f64,
    /// Number of interior points `N`; the grid has `N + 2` points total.
    pub n: usize,
    /// Spacing `L / (N + 1)`.
    pub dx: f64,
}

impl Grid {
    /// Requires `length > 0` (finite) and `n >= 5` so that every distinct
    /// matrix-row pattern actually occurs.
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Validation(format!(
                "grid length must be finite and > 0, got {length}"
            )));
        }
        if n < 5 {
            return Err(Error::Validation(format!(
                "grid needs at least 5 interior points, got {n}"
            )));
        }
        Ok(Grid {
            length,
            n,
            dx: length / (n as f64 + 1.0),
        })
    }

    /// Coordinate of grid point `i`, `0 <= i <= n + 1`.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }
}

/// Interior solution values together with the clock and current velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    /// Integration clock: physical time, or rescaled time `T` when running
    /// under the slow-down transformation.
    pub t: f64,
    /// Interior values `u_1..u_N`.
    pub u: Vec<f64>,
    /// Advection velocity extracted from `u`.
    pub v: f64,
}

/// Ghost values implied by the boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhostValues {
    /// `u_{-1} = -u_1 - dx^2/2`
    pub u_m1: f64,
    /// `u_{-2} = u_2 - 4 u_1 - dx^2`
    pub u_m2: f64,
    /// `u_{-3} = -u_3 + 12 u_2 - 24 u_1 + 3 dx^2 / 2`
    pub u_m3: f64,
    /// `u_{N+2} = -u_N`
    pub u_p2: f64,
}

/// Evaluate the ghost values for the given near-boundary samples.
///
/// `u1..u3` are the first three interior values, `u_n` the last one. The
/// left-hand ghosts come from the mirror extension `u(-x) = -u(x) - x^2/2`
/// written through second-, fourth- and sixth-order differences; the
/// right-hand ghost is plain antisymmetry about `x = L`.
pub fn ghost_values(u1: f64, u2: f64, u3: f64, u_n: f64, dx: f64) -> GhostValues {
    let dx2 = dx * dx;
    GhostValues {
        u_m1: -u1 - 0.5 * dx2,
        u_m2: u2 - 4.0 * u1 - dx2,
        u_m3: -u3 + 12.0 * u2 - 24.0 * u1 + 1.5 * dx2,
        u_p2: -u_n,
    }
}

/// Pentadiagonal matrix stored by diagonals, all of length `n`.
///
/// Entry conventions: `sub2[i]` multiplies `u[i-2]` (first two slots unused),
/// `sub1[i]` multiplies `u[i-1]`, `sup1[i]` multiplies `u[i+1]`, `sup2[i]`
/// multiplies `u[i+2]`; out-of-range slots stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub n: usize,
    pub sub2: Vec<f64>,
    pub sub1: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup1: Vec<f64>,
    pub sup2: Vec<f64>,
}

impl OperatorMatrix {
    pub fn zeros(n: usize) -> Self {
        OperatorMatrix {
            n,
            sub2: vec![0.0; n],
            sub1: vec![0.0; n],
            diag: vec![0.0; n],
            sup1: vec![0.0; n],
            sup2: vec![0.0; n],
        }
    }

    /// Matrix-vector product `A u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.n, "operator size {} vs vector {}", self.n, u.len());
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * u[i];
            if i >= 1 {
                s += self.sub1[i] * u[i - 1];
            }
            if i >= 2 {
                s += self.sub2[i] * u[i - 2];
            }
            if i + 1 < n {
                s += self.sup1[i] * u[i + 1];
            }
            if i + 2 < n {
                s += self.sup2[i] * u[i + 2];
            }
            out[i] = s;
        }
        out
    }

    /// `I + alpha * A`, the building block of the trapezoid update.
    pub fn identity_plus_scaled(&self, alpha: f64) -> OperatorMatrix {
        let mut m = self.clone();
        for i in 0..m.n {
            m.sub2[i] *= alpha;
            m.sub1[i] *= alpha;
            m.diag[i] = 1.0 + alpha * m.diag[i];
            m.sup1[i] *= alpha;
            m.sup2[i] *= alpha;
        }
        m
    }

    /// Multiply every entry by `factor` (used by the rescaled-time system).
    pub fn scale(&mut self, factor: f64) {
        for v in self
            .sub2
            .iter_mut()
            .chain(self.sub1.iter_mut())
            .chain(self.diag.iter_mut())
            .chain(self.sup1.iter_mut())
            .chain(self.sup2.iter_mut())
        {
            *v *= factor;
        }
    }
}

/// Assemble the discrete right-hand side of `u_t = -u_xxxx + V u_x` as
/// `A(V) u + b`.
///
/// Interior rows carry `[-1, 4 - V dx^3/2, -6, 4 + V dx^3/2, -1] / dx^4`
/// (central differences for both terms). Boundary rows fold in the ghost
/// values: the first row becomes `[-5, 4 + V dx^3/2, -1] / dx^4` with load
/// `1/(2 dx^2)` from the inhomogeneous part of `u_{-1}`, the last row mirrors
/// to `[-1, 4 - V dx^3/2, -5] / dx^4`, and the rows adjacent to the ends just
/// drop the entries multiplying `u_0 = 0` and `u_{N+1} = 0`.
pub fn assemble_operator(v: f64, grid: &Grid) -> (OperatorMatrix, Vec<f64>) {
    let n = grid.n;
    let dx = grid.dx;
    let c = 1.0 / (dx * dx * dx * dx);
    let s = 0.5 * v * dx * dx * dx;
    let lo = (4.0 - s) * c;
    let hi = (4.0 + s) * c;

    let mut m = OperatorMatrix::zeros(n);
    for i in 0..n {
        if i >= 2 {
            m.sub2[i] = -c;
        }
        if i >= 1 {
            m.sub1[i] = lo;
        }
        m.diag[i] = -6.0 * c;
        if i + 1 < n {
            m.sup1[i] = hi;
        }
        if i + 2 < n {
            m.sup2[i] = -c;
        }
    }
    // Ghost eliminations add +1/dx^4 to both corner diagonals.
    m.diag[0] = -5.0 * c;
    m.diag[n - 1] = -5.0 * c;

    let mut b = vec![0.0; n];
    b[0] = 0.5 / (dx * dx);
    (m, b)
}

/// Wall values of `u_x`, `u_xxxx`, `u_xxxxx` as seen by the scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTraces {
    /// `beta = u_x(0)`: centered first difference at the wall through the
    /// ghost, `(u_1 - u_{-1})/(2 dx) = u_1/dx + dx/4`.
    pub beta: f64,
    /// Wall value of the fourth-difference quotient, `(2u_2 - 4u_1 + dx^2)/dx^4`.
    pub u4: f64,
    /// Wall value of the fifth-difference quotient,
    /// `(2u_3 - 12u_2 + 18u_1 - 3dx^2)/(2 dx^5)`.
    pub u5: f64,
}

impl BoundaryTraces {
    /// Time derivative of the boundary slope implied by the equation at the
    /// wall: `beta' = -u5 - V/2`. On the scheme's own trajectory this agrees
    /// with the numerical derivative of the recorded `beta` to O(dx): the
    /// divergent parts of `u5` and of the near-wall profile cancel against
    /// `V beta = u4` exactly as in the semi-discrete identity
    /// `d(beta)/dt = (A u + b)_1 / dx`.
    pub fn beta_rate(&self, v: f64) -> f64 {
        -self.u5 - 0.5 * v
    }
}

/// Extract the scheme-compatible wall traces from the first three interior
/// values.
///
/// These are the centered stencils applied *at* `x = 0` with the ghost
/// eliminations already substituted; `u4/beta` is then exactly the discrete
/// form of the over-determination `V u_x(0) = u_xxxx(0)` (the condition that
/// keeps `u_t(0) = 0` under the scheme's own extension). See the module docs
/// for why these — and not high-order one-sided stencils — must be used on
/// evolving states.
pub fn boundary_traces(u: &[f64], dx: f64) -> BoundaryTraces {
    assert!(u.len() >= 3, "trace extraction needs 3 interior points, got {}", u.len());
    let dx2 = dx * dx;
    let dx4 = dx2 * dx2;
    BoundaryTraces {
        beta: u[0] / dx + 0.25 * dx,
        u4: (2.0 * u[1] - 4.0 * u[0] + dx2) / dx4,
        u5: (2.0 * u[2] - 12.0 * u[1] + 18.0 * u[0] - 3.0 * dx2) / (2.0 * dx4 * dx),
    }
}

/// One-sided derivative extraction for *smooth sampled* profiles.
///
/// With the boundary data `u(0) = 0`, `u_xx(0) = -1/2`, `u_xxx(0) = 0`, the
/// shifted samples `m_k = u_k + (k dx)^2/4` expand as
///
/// ```text
/// m_k/(k dx) = u_x(0) + u4 (k dx)^3/24 + u5 (k dx)^4/120 + u6 (k dx)^5/720 + ...
/// ```
///
/// so the differences `D_j = m_{j+1}/((j+1) dx) - m_1/dx` contain only fourth
/// and higher derivatives. The integer weights below are the exact inverse of
/// that 3x3 Vandermonde-like system, so `u4`, `u5` (and the internal `u6`)
/// are exact on polynomials through degree six; on general smooth data they
/// converge at O(dx^3) and O(dx^2). `beta` is `g_1` with the recovered
/// `u4..u6` contributions subtracted, exact through degree six as well.
///
/// This is the right tool for initial profiles and order-of-accuracy checks;
/// it reads an *evolving* state's wall layer as spurious huge derivatives, so
/// it must not feed the velocity loop.
pub fn onesided_wall_derivatives(u: &[f64], dx: f64) -> BoundaryTraces {
    assert!(u.len() >= 4, "one-sided extraction needs 4 interior points, got {}", u.len());
    let g = |k: usize| u[k - 1] / (k as f64 * dx) + 0.25 * k as f64 * dx;
    let g1 = g(1);
    let d1 = g(2) - g1;
    let d2 = g(3) - g1;
    let d3 = g(4) - g1;
    let dx3 = dx * dx * dx;
    let u4 = (2013.0 * d1 - 744.0 * d2 + 115.0 * d3) / (83.0 * dx3);
    let u5 = (-5676.0 * d1 + 2604.0 * d2 - 444.0 * d3) / (83.0 * dx3 * dx);
    let u6 = (4770.0 * d1 - 2520.0 * d2 + 510.0 * d3) / (83.0 * dx3 * dx * dx);
    BoundaryTraces {
        beta: g1 - u4 * dx3 / 24.0 - u5 * dx3 * dx / 120.0 - u6 * dx3 * dx * dx / 720.0,
        u4,
        u5,
    }
}

/// Scheme feedback velocity `V = u4/beta` from [`boundary_traces`], with the
/// default floor.
pub fn compute_velocity(u: &[f64], dx: f64) -> Result<f64> {
    compute_velocity_with_floor(u, dx, DEFAULT_BETA_FLOOR)
}

/// Advection velocity with an explicit guard: errors with
/// [`Error::BetaNearZero`] when `|beta| < beta_floor`.
pub fn compute_velocity_with_floor(u: &[f64], dx: f64, beta_floor: f64) -> Result<f64> {
    let tr = boundary_traces(u, dx);
    if tr.beta.abs() < beta_floor {
        return Err(Error::BetaNearZero {
            beta: tr.beta,
            floor: beta_floor,
        });
    }
    Ok(tr.u4 / tr.beta)
}
