//! The Euler vector field of an integrand and its phase-plane geometry.

mod contour;
mod equilibria;
mod field;

pub use contour::{trace_curve, ContourGrid, CurveSet, Polyline};
pub use equilibria::{classify, find_equilibria, Equilibrium, EquilibriumKind};
pub use field::{build_field, hamiltonian_c, transversality, EulerField};
