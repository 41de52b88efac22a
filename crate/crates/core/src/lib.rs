//! Multi-species mass-action reaction-diffusion systems on structured grids.
//!
//! The crate is `no_std` (with `alloc`) and carries the pure numerical parts:
//!
//! * [`network`]: reaction network types, the `.rxn` text format, rate laws,
//!   growth exponent and mass-condition classification.
//! * [`theory`]: exponent bootstrap, admissibility threshold, interpolation
//!   bound for the maximal-regularity constant, dual-exponent window and the
//!   Gronwall mass envelope.
//! * [`discretization`]: cell-centered finite volumes with Neumann flux data,
//!   backward-Euler diffusion solves and discrete space-time norms.
//! * [`integrator`]: positivity-guarded operator splitting.
//! * [`dual`]: the backward dual heat problem and empirical estimates of the
//!   maximal-regularity ratio.
//! * [`diagnostics`]: time-series recording and invariant checks.
//!
//! IO, configuration files and the command line live in the `rdx` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod discretization;
pub mod dual;
pub mod integrator;
pub mod network;
pub mod theory;

mod math;

pub use diagnostics::{Check, CheckReport, DiagnosticsLog, LogRow, SpeciesStats};
pub use discretization::{BoundaryFlux, Grid, StateField};
pub use dual::{CmrEstimate, DualProblem, DualSolution};
pub use integrator::{IntegratorConfig, Splitting};
pub use network::{MassCondition, Reaction, ReactionNetwork, Species};
pub use theory::{BootstrapReport, DualExponentWindow};
