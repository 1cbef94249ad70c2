use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{BoundExpression, Expression, Jet2};
use crate::odeint::{PhaseState, PlanarField};
use crate::problem::ProblemSpec;

/// `ẋ = u`, `u̇ = (F_x - u·F_xu) / F_uu`, defined where `|F_uu| ≥ guard_floor`.
#[derive(Debug, Clone)]
pub struct EulerField {
    integrand: Expression,
    constants: BTreeMap<String, f64>,
    bound: BoundExpression,
    guard_floor: f64,
}

impl EulerField {
    pub fn new(integrand: Expression, constants: BTreeMap<String, f64>, guard_floor: f64) -> Result<Self> {
        if !(guard_floor >= 0.0) {
            return Err(Error::InvalidArgument(format!("guard floor must be non-negative, got {guard_floor}")));
        }
        let bound = BoundExpression::new(&integrand, &constants)?;
        Ok(EulerField { integrand, constants, bound, guard_floor })
    }

    pub fn integrand(&self) -> &Expression {
        &self.integrand
    }

    pub fn constants(&self) -> &BTreeMap<String, f64> {
        &self.constants
    }

    pub fn guard_floor(&self) -> f64 {
        self.guard_floor
    }

    /// Returns a copy with every term of `F` multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        use crate::expr::{BinaryOp, Node};
        let root = Node::binary(BinaryOp::Mul, Node::Literal(k), self.integrand.root().clone());
        EulerField::new(Expression::new(root), self.constants.clone(), self.guard_floor)
    }

    /// `F` and its partials at `s`.
    pub fn jet(&self, s: PhaseState) -> Result<Jet2> {
        Ok(self.bound.eval(s.x, s.u)?)
    }

    pub fn rhs(&self, s: PhaseState) -> Result<PhaseState> {
        let j = self.jet(s)?;
        if !(j.duu.abs() >= self.guard_floor) || j.duu == 0.0 {
            return Err(Error::GuardViolation { x: s.x, u: s.u, fuu: j.duu, floor: self.guard_floor });
        }
        Ok(PhaseState::new(s.u, (j.dx - s.u * j.dxu) / j.duu))
    }

    /// Conserved function `C = F - u·F_u`.
    pub fn hamiltonian(&self, s: PhaseState) -> Result<f64> {
        let j = self.jet(s)?;
        Ok(j.v - s.u * j.du)
    }

    /// Transversality function `F_u`.
    pub fn transversality(&self, s: PhaseState) -> Result<f64> {
        Ok(self.jet(s)?.du)
    }
}

impl PlanarField for EulerField {
    fn rhs(&self, s: PhaseState) -> Result<PhaseState> {
        EulerField::rhs(self, s)
    }
}

pub fn build_field(problem: &ProblemSpec) -> Result<EulerField> {
    EulerField::new(problem.integrand.clone(), problem.constants.clone(), problem.options.guard_floor)
}

pub fn hamiltonian_c(field: &EulerField, s: PhaseState) -> Result<f64> {
    field.hamiltonian(s)
}

pub fn transversality(field: &EulerField, s: PhaseState) -> Result<f64> {
    field.transversality(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::expr::parse_expression;
    use proptest::prelude::*;

    fn field(src: &str) -> EulerField {
        EulerField::new(parse_expression(src).unwrap(), BTreeMap::new(), 1e-9).unwrap()
    }

    fn lakes() -> EulerField {
        build_field(&catalog::shallow_lakes(catalog::fixed_start(0.5, 63.0))).unwrap()
    }

    // u̇ of the shallow-lakes field from g(x) = b x - r x²/(x²+1): u̇ = g g' - c x.
    fn lakes_udot(x: f64) -> f64 {
        let g = 0.7 * x - x * x / (x * x + 1.0);
        let gp = 0.7 - 2.0 * x / (x * x + 1.0).powi(2);
        g * gp - 0.1 * x
    }

    #[test]
    fn quadratic_field_is_linear() {
        let f = field("u^2 + x^2");
        for (x, u) in [(1.0, 2.0), (-0.5, 0.25), (0.0, -3.0)] {
            assert_eq!(f.rhs(PhaseState::new(x, u)).unwrap(), PhaseState::new(u, x));
        }
    }

    #[test]
    fn shallow_lakes_rhs_at_half() {
        let r = lakes().rhs(PhaseState::new(0.5, 0.3)).unwrap();
        assert_eq!(r.x, 0.3);
        assert!((r.u + 0.0410).abs() < 1e-3, "{}", r.u);
        assert!((r.u - lakes_udot(0.5)).abs() < 1e-14);
    }

    #[test]
    fn guard_violation_for_cubic() {
        match field("u^3").rhs(PhaseState::new(0.0, 0.0)) {
            Err(Error::GuardViolation { fuu, .. }) => assert_eq!(fuu, 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn conserved_function_values() {
        let f = field("u^2 + x^2");
        assert_eq!(f.hamiltonian(PhaseState::new(1.0, 1.0)).unwrap(), 0.0);
        assert_eq!(f.hamiltonian(PhaseState::new(2.0, 0.5)).unwrap(), 4.0 - 0.25);
        let c = lakes().hamiltonian(PhaseState::new(0.5, 0.3)).unwrap();
        assert!((c + 0.0925).abs() < 1e-12, "{c}");
    }

    #[test]
    fn transversality_values() {
        let f = lakes();
        assert!((f.transversality(PhaseState::new(0.5, 0.0)).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(f.transversality(PhaseState::new(0.0, 0.0)).unwrap(), 0.0);
        let q = field("u^2 + x^2");
        for x in [-3.0, 0.0, 7.5] {
            assert_eq!(q.transversality(PhaseState::new(x, 0.0)).unwrap(), 0.0);
        }
    }

    proptest! {
        // For F = A(x) + B(x) u + u², u̇ does not depend on u.
        #[test]
        fn quadratic_in_u_gives_u_free_acceleration(x in -2.0f64..2.0, u1 in -3.0f64..3.0, u2 in -3.0f64..3.0) {
            let f = field("sin(x)*x^2 + exp(x/3)*u + u^2");
            let a = f.rhs(PhaseState::new(x, u1)).unwrap().u;
            let b = f.rhs(PhaseState::new(x, u2)).unwrap().u;
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            let l = lakes();
            let a = l.rhs(PhaseState::new(x, u1)).unwrap().u;
            prop_assert!((a - lakes_udot(x)).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}
