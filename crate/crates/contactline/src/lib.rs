//! Reduced contact-line dynamics: finite-time blow-up of the advection
//! velocity in the slope equation
//!
//! ```text
//! u_t + u_xxxx = V(t) u_x,   u(0) = 0, u_xx(0) = -1/2, u_xxx(0) = 0,
//!                            u(L) = 0, u_xx(L) = 0,
//! ```
//!
//! where `V(t) = u_xxxx(0)/u_x(0)` is dictated by the over-determined
//! boundary data. The boundary slope `beta = u_x(0)` starts negative and
//! shrinks; `V` blows up in finite time as `beta -> 0^-`.
//!
//! The crate provides the spatial discretization ([`discretization`]), the
//! banded LU solver behind the implicit steps ([`banded`]), the adaptive
//! implicit integrator with optional time rescaling ([`integrator`]), the
//! two-parameter family of initial profiles ([`ic`]), and the blow-up
//! regression toolkit ([`blowup`]); [`config`] and [`io`] back the
//! `contactline` binary.

pub mod banded;
pub mod blowup;
pub mod cli;
pub mod config;
pub mod discretization;
pub mod error;
pub mod ic;
pub mod integrator;
pub mod io;

pub use blowup::{FitLaw, FitResult, SynthParams};
pub use config::{parse_config, RunConfig};
pub use discretization::{Grid, State};
pub use error::{Error, Result};
pub use ic::ICParams;
pub use integrator::{run_simulation, SolverConfig, TerminationReason, TimeSeries};
