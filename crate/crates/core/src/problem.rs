use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, BoundExpression, Expression};
use crate::planner::BoundaryConditions;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.lo..=self.hi).contains(&v)
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi
    }
}

/// Rectangle in the phase plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x: Interval,
    pub u: Interval,
}

impl Window {
    pub fn new(x: Interval, u: Interval) -> Self {
        Window { x, u }
    }

    /// Signed distance-like margin: positive inside, negative outside.
    pub fn margin(&self, x: f64, u: f64) -> f64 {
        (x - self.x.lo).min(self.x.hi - x).min(u - self.u.lo).min(self.u.hi - u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Integration tolerance in the mixed norm `tol·(1 + ‖s‖∞)`.
    pub tol: f64,
    /// Distance in `x` from the saddle at which arcs are cut.
    pub stop_radius: f64,
    /// Smallest accepted `|F_uu|`.
    pub guard_floor: f64,
    /// Grid points for the equilibrium scan.
    pub scan_points: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, stop_radius: 1e-5, guard_floor: 1e-9, scan_points: 400 }
    }
}

/// A complete problem: integrand, constants, analysis window, boundary data.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub integrand: Expression,
    pub constants: BTreeMap<String, f64>,
    pub window: Window,
    pub bc: BoundaryConditions,
    pub options: SolverOptions,
}

impl ProblemSpec {
    /// Parses `f` and checks that every constant it references is bound.
    pub fn new(
        name: impl Into<String>,
        f: &str,
        constants: BTreeMap<String, f64>,
        window: Window,
        bc: BoundaryConditions,
        options: SolverOptions,
    ) -> Result<Self> {
        let integrand = parse_expression(f)?;
        BoundExpression::new(&integrand, &constants)?;
        if !window.x.is_valid() || !window.u.is_valid() {
            return Err(Error::InvalidArgument("analysis window must be a finite, non-empty rectangle".into()));
        }
        if !(bc.horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", bc.horizon)));
        }
        if options.scan_points < 16 {
            return Err(Error::InvalidArgument("scan_points must be at least 16".into()));
        }
        Ok(ProblemSpec { name: name.into(), integrand, constants, window, bc, options })
    }
}
