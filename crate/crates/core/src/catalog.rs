//! Ready-made problems used by the tests, benches and documentation.

use std::collections::BTreeMap;

use crate::planner::{BoundaryConditions, Endpoint};
use crate::problem::{Interval, ProblemSpec, SolverOptions, Window};

/// Shallow-lakes integrand, `(u + b x - r x²/(x²+1))² - c x²` expanded.
pub const SHALLOW_LAKES_F: &str = "b^2*x^2 - 2*b*r*x^3/(x^2+1) + 2*b*x*u - c*x^2 \
     + r^2*x^4/(x^2+1)^2 - 2*r*x^2*u/(x^2+1) + u^2";

pub fn shallow_lakes_constants() -> BTreeMap<String, f64> {
    [("b", 0.7), ("r", 1.0), ("c", 0.1)].into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
}

pub fn shallow_lakes(bc: BoundaryConditions) -> ProblemSpec {
    ProblemSpec::new(
        "shallow-lakes",
        SHALLOW_LAKES_F,
        shallow_lakes_constants(),
        Window::new(Interval::new(-1.5, 3.0), Interval::new(-2.5, 2.5)),
        bc,
        SolverOptions::default(),
    )
    .expect("built-in problem is valid")
}

/// `F = u² + x²`: saddle at the origin, separatrices `u = ±x`.
pub fn quadratic(bc: BoundaryConditions) -> ProblemSpec {
    ProblemSpec::new(
        "quadratic",
        "u^2 + x^2",
        BTreeMap::new(),
        Window::new(Interval::new(-2.0, 2.0), Interval::new(-2.0, 2.0)),
        bc,
        SolverOptions::default(),
    )
    .expect("built-in problem is valid")
}

/// `F = u² + x⁴/4 - x²/2`: equilibria at -1, 0, 1.
pub fn double_well(bc: BoundaryConditions) -> ProblemSpec {
    ProblemSpec::new(
        "double-well",
        "u^2 + x^4/4 - x^2/2",
        BTreeMap::new(),
        Window::new(Interval::new(-2.0, 2.0), Interval::new(-2.0, 2.0)),
        bc,
        SolverOptions::default(),
    )
    .expect("built-in problem is valid")
}

/// Fixed start, free end.
pub fn fixed_start(x0: f64, horizon: f64) -> BoundaryConditions {
    BoundaryConditions { x0: Endpoint::Fixed(x0), x_t: Endpoint::Free, horizon }
}
