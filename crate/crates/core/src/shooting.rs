//! Finite-horizon extremals by single shooting, and trajectory comparison.

use crate::arcs::transversal_u;
use crate::error::{Error, Result};
use crate::odeint::{integrate, Curve, PhaseState, Trajectory};
use crate::par::{self, Exec};
use crate::phase::{Equilibrium, EulerField};
use crate::planner::{BoundaryConditions, Endpoint};
use crate::problem::Interval;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOptions {
    /// Integration tolerance.
    pub tol: f64,
    /// Required `|R|` at the solution.
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Growth rate of initial-data perturbations (the saddle's unstable
    /// eigenvalue); enables the conditioning guard.
    pub growth_rate: Option<f64>,
    /// Range searched for a bracket; defaults to the guess ± 10·(1 + |guess|).
    pub search: Option<Interval>,
    pub exec: Exec,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            tol: 1e-12,
            residual_tol: 1e-8,
            max_iterations: 200,
            growth_rate: None,
            search: None,
            exec: Exec::default(),
        }
    }
}

impl ShootOptions {
    pub fn for_saddle(saddle: &Equilibrium) -> Self {
        ShootOptions { growth_rate: saddle.unstable_rate(), ..ShootOptions::default() }
    }

    /// Largest `rate · T` for which perturbations of size `ε_machine` stay
    /// below the residual tolerance.
    pub fn conditioning_limit(&self) -> f64 {
        (self.residual_tol / f64::EPSILON).ln()
    }
}

#[derive(Debug, Clone)]
pub struct ShootResult {
    pub trajectory: Trajectory,
    pub x0: f64,
    pub u0: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Width of the final bracket on the unknown.
    pub bracket_width: f64,
}

/// Refuses horizons on which `e^{rate·T}` amplifies rounding beyond the
/// residual tolerance.
pub fn check_conditioning(horizon: f64, opts: &ShootOptions) -> Result<()> {
    if let Some(rate) = opts.growth_rate {
        let limit = opts.conditioning_limit();
        if rate * horizon > limit {
            return Err(Error::IllConditioned { horizon, rate, limit });
        }
    }
    Ok(())
}

struct Problem<'a> {
    field: &'a EulerField,
    bc: &'a BoundaryConditions,
    guess: PhaseState,
    tol: f64,
}

impl Problem<'_> {
    // The unknown is u0 for a fixed start and x0 (on F_u = 0) for a free one.
    fn start(&self, theta: f64) -> Option<PhaseState> {
        match self.bc.x0 {
            Endpoint::Fixed(x0) => Some(PhaseState::new(x0, theta)),
            Endpoint::Free => transversal_u(self.field, theta, self.guess.u).map(|u| PhaseState::new(theta, u)),
        }
    }

    fn run(&self, theta: f64) -> Option<(Trajectory, f64)> {
        let s0 = self.start(theta)?;
        let tr = integrate(self.field, s0, (0.0, self.bc.horizon), self.tol).ok()?;
        let end = tr.last();
        let r = match self.bc.x_t {
            Endpoint::Fixed(xt) => end.x - xt,
            Endpoint::Free => self.field.transversality(end).ok()?,
        };
        r.is_finite().then_some((tr, r))
    }

    fn residual(&self, theta: f64) -> Option<f64> {
        self.run(theta).map(|r| r.1)
    }
}

/// Solves the two-point problem `bc` by shooting from `guess`.
///
/// With a fixed start the unknown is `u(0)`; with a free start it is `x(0)`
/// on the curve `F_u = 0` (so the start condition holds exactly) with `u(0)`
/// recovered by Newton from `guess.u`. The residual is `x(T) - x_T` for a
/// fixed end and `F_u(x(T), u(T))` for a free one. A sign change is
/// bracketed by geometric expansion around the guess and closed by the
/// Illinois variant of regula falsi.
pub fn shoot(field: &EulerField, bc: &BoundaryConditions, guess: PhaseState, opts: &ShootOptions) -> Result<ShootResult> {
    if !(bc.horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", bc.horizon)));
    }
    check_conditioning(bc.horizon, opts)?;
    let prob = Problem { field, bc, guess, tol: opts.tol };
    let theta0 = match bc.x0 {
        Endpoint::Fixed(_) => guess.u,
        Endpoint::Free => guess.x,
    };
    let window = opts.search.unwrap_or_else(|| {
        let w = 10.0 * (1.0 + theta0.abs());
        Interval::new(theta0 - w, theta0 + w)
    });
    let f0 = prob
        .residual(theta0)
        .ok_or_else(|| Error::NotConverged(format!("cannot integrate from the initial guess {theta0}")))?;
    let mut evals = 1;
    let finish = |theta: f64, width: f64, evals: usize| -> Result<ShootResult> {
        let s0 = prob.start(theta).expect("start was evaluated");
        let (trajectory, r) = prob.run(theta).expect("start was evaluated");
        Ok(ShootResult { trajectory, x0: s0.x, u0: s0.u, residual_norm: r.abs(), iterations: evals, bracket_width: width })
    };
    if f0.abs() <= opts.residual_tol {
        return finish(theta0, 0.0, evals);
    }

    // bracket
    let mut bracket = None;
    let mut delta = 1e-9 * (1.0 + theta0.abs());
    'expand: while delta <= window.width() {
        for sign in [-1.0, 1.0] {
            let th = theta0 + sign * delta;
            if !window.contains(th) {
                continue;
            }
            evals += 1;
            if let Some(f) = prob.residual(th) {
                if f.abs() <= opts.residual_tol {
                    return finish(th, 0.0, evals);
                }
                if (f < 0.0) != (f0 < 0.0) {
                    bracket = Some(if sign > 0.0 { ((theta0, f0), (th, f)) } else { ((th, f), (theta0, f0)) });
                    break 'expand;
                }
            }
        }
        delta *= 4.0;
    }
    let ((mut a, mut fa), (mut b, mut fb)) = bracket.ok_or_else(|| {
        Error::NoBracket(format!("no sign change of the shooting residual in [{}, {}]", window.lo, window.hi))
    })?;

    log::debug!("shooting bracket [{}, {}] after {evals} evaluations", a.min(b), a.max(b));

    // Illinois; (b, fb) is the newest iterate
    for _ in 0..opts.max_iterations {
        let (lo, hi) = (a.min(b), a.max(b));
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > lo && c < hi) {
            c = 0.5 * (lo + hi);
        }
        evals += 1;
        let fc = match prob.residual(c) {
            Some(f) => f,
            None => {
                c = 0.5 * (lo + hi);
                evals += 1;
                prob.residual(c).ok_or_else(|| Error::NotConverged(format!("integration failed at {c}")))?
            }
        };
        log::trace!("shooting iterate {c}: residual {fc:e}");
        if fc.abs() <= opts.residual_tol {
            return finish(c, (b - a).abs(), evals);
        }
        if (fc < 0.0) != (fb < 0.0) {
            a = b;
            fa = fb;
        } else {
            fa *= 0.5;
        }
        b = c;
        fb = fc;
    }
    Err(Error::NotConverged(format!(
        "shooting residual {:e} above {:e} with bracket [{}, {}]",
        fa.abs().min(fb.abs()),
        opts.residual_tol,
        a.min(b),
        a.max(b)
    )))
}

/// Shoots every boundary condition in `bcs` from the same guess.
pub fn shoot_sweep(
    field: &EulerField,
    bcs: &[BoundaryConditions],
    guess: PhaseState,
    opts: &ShootOptions,
) -> Vec<Result<ShootResult>> {
    par::map(opts.exec, bcs, |bc| shoot(field, bc, guess, opts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment {
    /// Compare at equal times.
    Start,
    /// Compare at equal times before each curve's end.
    End,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub sup_x: f64,
    pub sup_u: f64,
    pub l2_x: f64,
    pub l2_u: f64,
    /// Compared span, in the time of the first curve.
    pub span: (f64, f64),
    pub samples: usize,
}

impl Metrics {
    pub fn max(&self) -> f64 {
        self.sup_x.max(self.sup_u)
    }
}

/// Sup and L² differences of `a` and `b` on `n` uniform samples of their
/// overlap.
pub fn compare<A, B>(a: &A, b: &B, n: usize, alignment: Alignment) -> Result<Metrics>
where
    A: Curve + ?Sized,
    B: Curve + ?Sized,
{
    let (a0, a1) = a.domain();
    let (b0, b1) = b.domain();
    // time in b corresponding to time t in a
    let (lo, hi, shift) = match alignment {
        Alignment::Start => (a0.max(b0), a1.min(b1), 0.0),
        Alignment::End => {
            let len = (a1 - a0).min(b1 - b0);
            (a1 - len, a1, b1 - a1)
        }
    };
    if !(hi > lo) {
        return Err(Error::EmptyOverlap);
    }
    let n = n.max(2);
    let mut m = Metrics { sup_x: 0.0, sup_u: 0.0, l2_x: 0.0, l2_u: 0.0, span: (lo, hi), samples: n };
    let h = (hi - lo) / (n - 1) as f64;
    for i in 0..n {
        let t = if i + 1 == n { hi } else { lo + h * i as f64 };
        let tb = (t + shift).clamp(b0, b1);
        let (sa, sb) = (a.state(t)?, b.state(tb)?);
        let (dx, du) = ((sa.x - sb.x).abs(), (sa.u - sb.u).abs());
        m.sup_x = m.sup_x.max(dx);
        m.sup_u = m.sup_u.max(du);
        let w = if i == 0 || i + 1 == n { 0.5 * h } else { h };
        m.l2_x += w * dx * dx;
        m.l2_u += w * du * du;
    }
    m.l2_x = m.l2_x.sqrt();
    m.l2_u = m.l2_u.sqrt();
    Ok(m)
}

/// A curve known only at sample times: `x` is interpolated by cubic Hermite
/// polynomials using `u` as slope, `u` linearly.
#[derive(Debug, Clone)]
pub struct SampledCurve {
    samples: Vec<(f64, PhaseState)>,
}

impl SampledCurve {
    /// Samples must have strictly increasing, finite times.
    pub fn new(samples: Vec<(f64, PhaseState)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument("a sampled curve needs at least two samples".into()));
        }
        if !samples.iter().all(|(t, s)| t.is_finite() && s.is_finite()) || !samples.windows(2).all(|w| w[1].0 > w[0].0) {
            return Err(Error::InvalidArgument("sample times must be finite and strictly increasing".into()));
        }
        Ok(SampledCurve { samples })
    }

    pub fn samples(&self) -> &[(f64, PhaseState)] {
        &self.samples
    }

    fn locate(&self, t: f64) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&t) {
            return Err(Error::OutOfDomain { t, lo, hi });
        }
        let i = self.samples.partition_point(|s| s.0 <= t);
        Ok(i.clamp(1, self.samples.len() - 1) - 1)
    }
}

impl Curve for SampledCurve {
    fn domain(&self) -> (f64, f64) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }

    fn state(&self, t: f64) -> Result<PhaseState> {
        let i = self.locate(t)?;
        let ((t0, p), (t1, q)) = (self.samples[i], self.samples[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (h00, h10, h01, h11) =
            (2.0 * s.powi(3) - 3.0 * s * s + 1.0, s.powi(3) - 2.0 * s * s + s, -2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
        let x = h00 * p.x + h10 * h * p.u + h01 * q.x + h11 * h * q.u;
        Ok(PhaseState::new(x, p.u + s * (q.u - p.u)))
    }

    fn velocity(&self, t: f64) -> Result<PhaseState> {
        let i = self.locate(t)?;
        let ((t0, p), (t1, q)) = (self.samples[i], self.samples[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let dx = ((6.0 * s * s - 6.0 * s) * p.x + (6.0 * s - 6.0 * s * s) * q.x) / h
            + (3.0 * s * s - 4.0 * s + 1.0) * p.u
            + (3.0 * s * s - 2.0 * s) * q.u;
        Ok(PhaseState::new(dx, (q.u - p.u) / h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::odeint::FnCurve;
    use crate::phase::build_field;

    fn quadratic() -> EulerField {
        build_field(&catalog::quadratic(catalog::fixed_start(1.0, 10.0))).unwrap()
    }

    #[test]
    fn quadratic_free_end() {
        let f = quadratic();
        let bc = catalog::fixed_start(1.0, 10.0);
        let r = shoot(&f, &bc, PhaseState::new(1.0, -0.5), &ShootOptions::default()).unwrap();
        // u(T) = 0 gives u0 = -tanh(T)
        assert!((r.u0 + 10f64.tanh()).abs() < 1e-12, "{}", r.u0);
        assert!(r.residual_norm <= 1e-8);
        let c = 10f64.cosh();
        let exact = FnCurve {
            domain: (0.0, 10.0),
            state: |t: f64| PhaseState::new((10.0 - t).cosh() / c, -(10.0 - t).sinh() / c),
            velocity: |t: f64| PhaseState::new(-(10.0 - t).sinh() / c, (10.0 - t).cosh() / c),
        };
        let m = compare(&r.trajectory, &exact, 1001, Alignment::Start).unwrap();
        assert!(m.sup_x <= 1e-6, "{m:?}");
        // the turnpike approximation e^{-t} is off by about e^{-T} near t = T
        let decay = FnCurve {
            domain: (0.0, 10.0),
            state: |t: f64| PhaseState::new((-t).exp(), -(-t).exp()),
            velocity: |t: f64| PhaseState::new(-(-t).exp(), (-t).exp()),
        };
        let m = compare(&r.trajectory, &decay, 1001, Alignment::Start).unwrap();
        assert!(m.sup_x <= 1.1 * (-10f64).exp(), "{m:?}");
    }

    #[test]
    fn quadratic_fixed_end() {
        let f = quadratic();
        let bc = BoundaryConditions { x0: Endpoint::Fixed(1.0), x_t: Endpoint::Fixed(0.5), horizon: 2.0 };
        let r = shoot(&f, &bc, PhaseState::new(1.0, 0.0), &ShootOptions::default()).unwrap();
        // x = A cosh t + B sinh t with A = 1, x(2) = 0.5
        let b = (0.5 - 2f64.cosh()) / 2f64.sinh();
        assert!((r.u0 - b).abs() < 1e-9);
        assert!((r.trajectory.last().x - 0.5).abs() <= 1e-8);
    }

    #[test]
    fn conditioning_guard() {
        let f = quadratic();
        let opts = ShootOptions { growth_rate: Some(1.0), ..ShootOptions::default() };
        let bc = catalog::fixed_start(1.0, 30.0);
        assert!(matches!(
            shoot(&f, &bc, PhaseState::new(1.0, -1.0), &opts),
            Err(Error::IllConditioned { .. })
        ));
        assert!(check_conditioning(17.0, &opts).is_ok());
    }

    #[test]
    fn no_bracket_in_narrow_window() {
        let f = quadratic();
        let bc = catalog::fixed_start(1.0, 5.0);
        let opts = ShootOptions { search: Some(Interval::new(0.0, 1.0)), ..ShootOptions::default() };
        assert!(matches!(shoot(&f, &bc, PhaseState::new(1.0, 0.5), &opts), Err(Error::NoBracket(_))));
    }

    #[test]
    fn free_start_fixed_end() {
        // F = u² + x² + 2u: F_u = 0 at u = -1; start free on that line
        let f = crate::phase::EulerField::new(
            crate::expr::parse_expression("u^2 + x^2 + 2*u").unwrap(),
            Default::default(),
            1e-9,
        )
        .unwrap();
        let bc = BoundaryConditions { x0: Endpoint::Free, x_t: Endpoint::Fixed(0.0), horizon: 1.0 };
        let r = shoot(&f, &bc, PhaseState::new(0.5, -1.0), &ShootOptions::default()).unwrap();
        assert_eq!(r.u0, -1.0);
        // x = x0 cosh t - sinh t vanishes at t = 1
        assert!((r.x0 - 1f64.tanh()).abs() < 1e-9, "{}", r.x0);
    }

    #[test]
    fn compare_identical_and_aligned() {
        let f = quadratic();
        let tr = integrate(&f, PhaseState::new(1.0, -1.0), (0.0, 3.0), 1e-10).unwrap();
        let m = compare(&tr, &tr, 100, Alignment::Start).unwrap();
        assert_eq!((m.sup_x, m.sup_u, m.l2_x, m.l2_u), (0.0, 0.0, 0.0, 0.0));
        let shifted = FnCurve {
            domain: (5.0, 6.0),
            state: |t: f64| PhaseState::new(t - 5.0, 1.0),
            velocity: |_| PhaseState::new(1.0, 0.0),
        };
        let base = FnCurve {
            domain: (0.0, 2.0),
            state: |t: f64| PhaseState::new(t - 1.0, 1.0),
            velocity: |_| PhaseState::new(1.0, 0.0),
        };
        let m = compare(&base, &shifted, 50, Alignment::End).unwrap();
        assert!(m.max() < 1e-15);
        assert_eq!(m.span, (1.0, 2.0));
        assert!(matches!(compare(&base, &shifted, 50, Alignment::Start), Err(Error::EmptyOverlap)));
    }

    #[test]
    fn sampled_curve_interpolates_cubics_exactly() {
        // x = t³ - t, u = 3t² - 1: Hermite reproduces x; u is linear between nodes
        let samples: Vec<_> = (0..=10).map(|i| {
            let t = i as f64 * 0.1;
            (t, PhaseState::new(t.powi(3) - t, 3.0 * t * t - 1.0))
        }).collect();
        let c = SampledCurve::new(samples).unwrap();
        for k in 0..=100 {
            let t = k as f64 * 0.01;
            let s = c.state(t).unwrap();
            assert!((s.x - (t.powi(3) - t)).abs() < 1e-14);
            assert!((c.velocity(t).unwrap().x - (3.0 * t * t - 1.0)).abs() < 1e-12);
        }
        assert!(c.state(1.5).is_err());
        assert!(SampledCurve::new(vec![(0.0, PhaseState::default())]).is_err());
    }

    #[test]
    fn sweep_matches_individual_shots() {
        let f = quadratic();
        let bcs: Vec<_> = [2.0, 4.0, 6.0].iter().map(|&t| catalog::fixed_start(1.0, t)).collect();
        let opts = ShootOptions::default();
        let seq = shoot_sweep(&f, &bcs, PhaseState::new(1.0, -0.9), &ShootOptions { exec: Exec::Sequential, ..opts });
        let par = shoot_sweep(&f, &bcs, PhaseState::new(1.0, -0.9), &ShootOptions { exec: Exec::Parallel, ..opts });
        for (a, b) in seq.iter().zip(&par) {
            assert_eq!(a.as_ref().unwrap().u0, b.as_ref().unwrap().u0);
        }
    }
}
