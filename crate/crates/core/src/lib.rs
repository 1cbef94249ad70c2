//! Turnpike analysis for one-dimensional autonomous variational problems.
//!
//! Given an integrand `F(x, u)` with `u = ẋ`, the crate builds the planar
//! Euler vector field, locates its hyperbolic saddles, computes the entry and
//! leaving arcs from the conserved function `C = F - u·F_u` and the
//! transversality curve `F_u = 0`, and splices them into a piecewise
//! approximation of long-horizon extremals. A single-shooting solver is
//! provided to validate the approximation on finite horizons.
//!
//! The pipeline, bottom-up:
//!
//! - [`expr`]: integrand parsing and second-order jet evaluation.
//! - [`odeint`]: Dormand–Prince 5(4) integration with dense output and events.
//! - [`phase`]: the Euler field, equilibria, conserved function, contours.
//! - [`arcs`]: special points, manifold refinement, entry/leaving arcs.
//! - [`planner`]: boundary-condition case analysis and the splice.
//! - [`shooting`]: finite-horizon single shooting and trajectory comparison.

// Guards like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arcs;
pub mod catalog;
mod error;
pub mod expr;
pub mod odeint;
pub mod par;
pub mod phase;
pub mod planner;
pub mod problem;
pub mod shooting;

pub use error::{Error, Result};
pub use expr::{parse_expression, Expression, Jet2};
pub use odeint::{Curve, PhaseState, Trajectory};
pub use par::Exec;
pub use phase::{build_field, EulerField, Equilibrium, EquilibriumKind};
pub use planner::{BoundaryConditions, Endpoint, TurnpikeApproximation};
pub use problem::{Interval, ProblemSpec, SolverOptions, Window};
