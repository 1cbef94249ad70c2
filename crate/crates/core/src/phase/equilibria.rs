use num_complex::Complex64;

use super::field::EulerField;
use crate::error::{Error, Result};
use crate::odeint::PhaseState;
use crate::par::{self, Exec};
use crate::problem::Interval;

const DEGENERACY: f64 = 1e-8;
const RESIDUAL_ACCEPT: f64 = 1e-8;
const DEDUP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    Saddle,
    Node,
    CenterOrFocus,
    Degenerate,
}

impl EquilibriumKind {
    pub fn name(self) -> &'static str {
        match self {
            EquilibriumKind::Saddle => "saddle",
            EquilibriumKind::Node => "node",
            EquilibriumKind::CenterOrFocus => "center_or_focus",
            EquilibriumKind::Degenerate => "degenerate",
        }
    }
}

impl std::fmt::Display for EquilibriumKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A classified rest point of the Euler field.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub location: PhaseState,
    /// Row-major finite-difference Jacobian.
    pub jacobian: [[f64; 2]; 2],
    /// Sorted by real part, ascending.
    pub eigenvalues: [Complex64; 2],
    /// Unit eigenvectors with non-negative `x` component, for real spectra.
    pub eigenvectors: Option<[PhaseState; 2]>,
    pub kind: EquilibriumKind,
    /// Value of the conserved function at the point.
    pub c_value: f64,
}

impl Equilibrium {
    pub fn x(&self) -> f64 {
        self.location.x
    }

    pub fn is_saddle(&self) -> bool {
        self.kind == EquilibriumKind::Saddle
    }

    pub fn stable_rate(&self) -> Option<f64> {
        self.is_saddle().then(|| self.eigenvalues[0].re)
    }

    pub fn unstable_rate(&self) -> Option<f64> {
        self.is_saddle().then(|| self.eigenvalues[1].re)
    }

    pub fn stable_vector(&self) -> Option<PhaseState> {
        self.eigenvectors.filter(|_| self.is_saddle()).map(|v| v[0])
    }

    pub fn unstable_vector(&self) -> Option<PhaseState> {
        self.eigenvectors.filter(|_| self.is_saddle()).map(|v| v[1])
    }

    /// The slower of the two hyperbolic rates.
    pub fn min_rate(&self) -> Option<f64> {
        Some(self.stable_rate()?.abs().min(self.unstable_rate()?))
    }

    pub fn require_saddle(&self) -> Result<()> {
        if self.is_saddle() {
            Ok(())
        } else {
            Err(Error::NotASaddle { x: self.location.x, kind: self.kind.to_string() })
        }
    }
}

fn jacobian(field: &EulerField, p: PhaseState) -> Result<[[f64; 2]; 2]> {
    let hx = 1e-6 * (1.0 + p.x.abs());
    let hu = 1e-6 * (1.0 + p.u.abs());
    let fxp = field.rhs(PhaseState::new(p.x + hx, p.u))?;
    let fxm = field.rhs(PhaseState::new(p.x - hx, p.u))?;
    let fup = field.rhs(PhaseState::new(p.x, p.u + hu))?;
    let fum = field.rhs(PhaseState::new(p.x, p.u - hu))?;
    Ok([
        [(fxp.x - fxm.x) / (2.0 * hx), (fup.x - fum.x) / (2.0 * hu)],
        [(fxp.u - fxm.u) / (2.0 * hx), (fup.u - fum.u) / (2.0 * hu)],
    ])
}

fn eigenvector(j: &[[f64; 2]; 2], lambda: f64) -> PhaseState {
    let [[a, b], [c, d]] = *j;
    let v1 = PhaseState::new(b, lambda - a);
    let v2 = PhaseState::new(lambda - d, c);
    let v = if v1.x.hypot(v1.u) >= v2.x.hypot(v2.u) { v1 } else { v2 };
    let n = v.x.hypot(v.u);
    let v = PhaseState::new(v.x / n, v.u / n);
    if v.x < 0.0 || (v.x == 0.0 && v.u < 0.0) {
        PhaseState::new(-v.x, -v.u)
    } else {
        v
    }
}

type Spectrum = ([Complex64; 2], Option<[PhaseState; 2]>, EquilibriumKind);

fn spectrum(j: &[[f64; 2]; 2]) -> Spectrum {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = 0.25 * tr * tr - det;
    let half = 0.5 * tr;
    let (eigenvalues, separation) = if disc >= 0.0 {
        let s = disc.sqrt();
        ([Complex64::new(half - s, 0.0), Complex64::new(half + s, 0.0)], 2.0 * s)
    } else {
        let s = (-disc).sqrt();
        ([Complex64::new(half, -s), Complex64::new(half, s)], 2.0 * s)
    };
    let kind = if det.abs() < DEGENERACY || separation < DEGENERACY {
        EquilibriumKind::Degenerate
    } else if det < 0.0 {
        EquilibriumKind::Saddle
    } else if disc >= 0.0 {
        EquilibriumKind::Node
    } else {
        EquilibriumKind::CenterOrFocus
    };
    let eigenvectors = (disc >= 0.0 && kind != EquilibriumKind::Degenerate)
        .then(|| [eigenvector(j, eigenvalues[0].re), eigenvector(j, eigenvalues[1].re)]);
    (eigenvalues, eigenvectors, kind)
}

/// Classifies the rest point at `location` from its linearization.
pub fn classify(field: &EulerField, location: PhaseState) -> Result<Equilibrium> {
    let r = field.rhs(location)?;
    let residual = r.norm_inf();
    if !(residual <= RESIDUAL_ACCEPT) {
        return Err(Error::NotAnEquilibrium { x: location.x, u: location.u, residual });
    }
    let j = jacobian(field, location)?;
    let (eigenvalues, eigenvectors, kind) = spectrum(&j);
    Ok(Equilibrium {
        location,
        jacobian: j,
        eigenvalues,
        eigenvectors,
        kind,
        c_value: field.hamiltonian(location)?,
    })
}

// F_x and F_xx on the axis u = 0.
fn axis(field: &EulerField, x: f64) -> Option<(f64, f64)> {
    let j = field.jet(PhaseState::new(x, 0.0)).ok()?;
    (j.dx.is_finite() && j.dxx.is_finite()).then_some((j.dx, j.dxx))
}

fn newton(field: &EulerField, mut x: f64, range: Interval) -> Option<f64> {
    let span = range.width();
    for _ in 0..100 {
        let (h, dh) = axis(field, x)?;
        if h == 0.0 {
            return Some(x);
        }
        if dh == 0.0 || !dh.is_finite() {
            return None;
        }
        let step = h / dh;
        x -= step;
        if !x.is_finite() || x < range.lo - 0.1 * span || x > range.hi + 0.1 * span {
            return None;
        }
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
            break;
        }
    }
    Some(x)
}

fn bisect(field: &EulerField, mut a: f64, mut b: f64, mut ha: f64) -> Option<f64> {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let (hm, _) = axis(field, m)?;
        if hm == 0.0 {
            return Some(m);
        }
        if (hm < 0.0) == (ha < 0.0) {
            a = m;
            ha = hm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Locates rest points on the axis `u = 0` with `x` in `x_range` by scanning
/// `F_x(x, 0)` on `n_scan` cells, then classifies them.
///
/// Sign changes are bracketed and bisected; local minima of `|F_x|` seed a
/// Newton solve so that tangential roots are found too. Points where the
/// field is undefined are skipped.
pub fn find_equilibria(field: &EulerField, x_range: Interval, n_scan: usize, exec: Exec) -> Vec<Equilibrium> {
    let n = n_scan.max(2);
    let xs: Vec<f64> = (0..=n).map(|i| x_range.lo + x_range.width() * i as f64 / n as f64).collect();
    let hs: Vec<Option<f64>> = par::map(exec, &xs, |&x| axis(field, x).map(|a| a.0));

    let mut seeds: Vec<(f64, f64, Option<f64>)> = Vec::new();
    for i in 0..n {
        if let (Some(a), Some(b)) = (hs[i], hs[i + 1]) {
            if a == 0.0 {
                seeds.push((xs[i], xs[i], None));
            } else if (a < 0.0) != (b < 0.0) && b != 0.0 {
                seeds.push((xs[i], xs[i + 1], Some(a)));
            }
        }
    }
    if let Some(Some(b)) = hs.last() {
        if *b == 0.0 {
            seeds.push((xs[n], xs[n], None));
        }
    }
    for i in 1..n {
        if let (Some(a), Some(m), Some(b)) = (hs[i - 1], hs[i], hs[i + 1]) {
            if m.abs() <= a.abs() && m.abs() < b.abs() && (a < 0.0) == (b < 0.0) {
                seeds.push((xs[i], xs[i], None));
            }
        }
    }

    let roots: Vec<Option<f64>> = par::map(exec, &seeds, |&(a, b, ha)| {
        let x = match ha {
            Some(ha) => bisect(field, a, b, ha)?,
            None => a,
        };
        let x = newton(field, x, x_range).unwrap_or(x);
        let (h, _) = axis(field, x)?;
        (x_range.contains(x) && h.abs() <= RESIDUAL_ACCEPT).then_some(x)
    });
    let mut roots: Vec<f64> = roots.into_iter().flatten().collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|b, a| (*b - *a).abs() <= DEDUP * (1.0 + a.abs()));

    let found: Vec<Option<Equilibrium>> = par::map(exec, &roots, |&x| classify(field, PhaseState::new(x, 0.0)).ok());
    found.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::expr::parse_expression;
    use crate::phase::build_field;
    use std::collections::BTreeMap;

    fn field(src: &str) -> EulerField {
        EulerField::new(parse_expression(src).unwrap(), BTreeMap::new(), 1e-9).unwrap()
    }

    #[test]
    fn quadratic_has_one_saddle() {
        let f = field("u^2 + x^2");
        let eq = find_equilibria(&f, Interval::new(-2.0, 2.0), 400, Exec::Sequential);
        assert_eq!(eq.len(), 1);
        let e = &eq[0];
        assert!(e.location.x.abs() < 1e-12);
        assert_eq!(e.kind, EquilibriumKind::Saddle);
        assert!((e.unstable_rate().unwrap() - 1.0).abs() < 1e-6);
        assert!((e.stable_rate().unwrap() + 1.0).abs() < 1e-6);
        let v = e.unstable_vector().unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v.x - h).abs() < 1e-6 && (v.u - h).abs() < 1e-6);
        let s = e.stable_vector().unwrap();
        assert!((s.x - h).abs() < 1e-6 && (s.u + h).abs() < 1e-6);
    }

    #[test]
    fn double_well_kinds() {
        let f = build_field(&catalog::double_well(catalog::fixed_start(0.0, 10.0))).unwrap();
        let eq = find_equilibria(&f, Interval::new(-2.0, 2.0), 400, Exec::Sequential);
        let kinds: Vec<_> = eq.iter().map(|e| (e.location.x.round() as i32, e.kind)).collect();
        assert_eq!(
            kinds,
            vec![(-1, EquilibriumKind::Saddle), (0, EquilibriumKind::CenterOrFocus), (1, EquilibriumKind::Saddle)]
        );
        // λ² = F_xx / F_uu = (3x² - 1)/2 at ±1
        assert!((eq[2].unstable_rate().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn shallow_lakes_equilibria() {
        let f = build_field(&catalog::shallow_lakes(catalog::fixed_start(0.5, 63.0))).unwrap();
        let eq = find_equilibria(&f, Interval::new(-1.5, 3.0), 400, Exec::default());
        assert_eq!(eq.len(), 3, "{eq:?}");
        assert!(eq[0].location.x.abs() < 1e-10);
        assert_eq!(eq[0].kind, EquilibriumKind::Saddle);
        assert!((eq[1].location.x - 0.2747356356998185).abs() < 1e-8);
        assert_eq!(eq[1].kind, EquilibriumKind::CenterOrFocus);
        assert!((eq[2].location.x - 1.5062383249771143).abs() < 1e-8);
        assert_eq!(eq[2].kind, EquilibriumKind::Saddle);
        assert!((eq[2].unstable_rate().unwrap() - 0.4410977652888654).abs() < 1e-6);
        assert!((eq[0].unstable_rate().unwrap() - 0.624499799841441).abs() < 1e-6);
        assert!((eq[2].c_value + 0.09706376286906407).abs() < 1e-12);
    }

    #[test]
    fn tangential_root_is_found_and_degenerate() {
        // F_x = 2 x² ... from F = u² + 2x³/3: F_x = 2x², double root at 0
        let f = field("u^2 + 2*x^3/3");
        let eq = find_equilibria(&f, Interval::new(-1.0, 1.0), 101, Exec::Sequential);
        assert_eq!(eq.len(), 1);
        assert!(eq[0].location.x.abs() < 1e-4);
        assert_eq!(eq[0].kind, EquilibriumKind::Degenerate);
    }

    #[test]
    fn matrix_spectra() {
        let (l, v, k) = spectrum(&[[-1.0, 0.0], [0.0, -3.0]]);
        assert_eq!(k, EquilibriumKind::Node);
        assert_eq!((l[0].re, l[1].re), (-3.0, -1.0));
        let v = v.unwrap();
        assert_eq!((v[0], v[1]), (PhaseState::new(0.0, 1.0), PhaseState::new(1.0, 0.0)));
        assert_eq!(spectrum(&[[0.0, 1.0], [-4.0, 0.0]]).2, EquilibriumKind::CenterOrFocus);
        assert_eq!(spectrum(&[[0.0, 1.0], [0.0, 0.0]]).2, EquilibriumKind::Degenerate);
        let (l, v, k) = spectrum(&[[0.0, 1.0], [4.0, 0.0]]);
        assert_eq!(k, EquilibriumKind::Saddle);
        assert_eq!((l[0].re, l[1].re), (-2.0, 2.0));
        let u = v.unwrap()[1];
        assert!((u.u / u.x - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_equilibrium() {
        let f = field("u^2 + x^2");
        assert!(matches!(classify(&f, PhaseState::new(1.0, 0.0)), Err(Error::NotAnEquilibrium { .. })));
        let sad = classify(&f, PhaseState::new(0.0, 0.0)).unwrap();
        assert!(sad.require_saddle().is_ok());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let f = build_field(&catalog::shallow_lakes(catalog::fixed_start(0.5, 63.0))).unwrap();
        let a = find_equilibria(&f, Interval::new(-1.5, 3.0), 400, Exec::Sequential);
        let b = find_equilibria(&f, Interval::new(-1.5, 3.0), 400, Exec::Parallel);
        assert_eq!(a, b);
    }
}
