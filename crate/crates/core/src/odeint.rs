//! Adaptive Dormand–Prince 5(4) integration of planar fields.
//!
//! Accepted steps keep their dense-output coefficients so trajectories can be
//! evaluated (and differentiated) anywhere in their span. Backward runs
//! integrate the negated field forward in `τ = t0 - t`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseState {
    pub x: f64,
    pub u: f64,
}

impl PhaseState {
    pub const fn new(x: f64, u: f64) -> Self {
        PhaseState { x, u }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.u.is_finite()
    }

    pub fn norm_inf(&self) -> f64 {
        self.x.abs().max(self.u.abs())
    }

    pub fn dist(&self, other: PhaseState) -> f64 {
        (self.x - other.x).hypot(self.u - other.u)
    }

    fn arr(self) -> [f64; 2] {
        [self.x, self.u]
    }

    fn from_arr(a: [f64; 2]) -> Self {
        PhaseState { x: a[0], u: a[1] }
    }
}

/// A planar autonomous vector field.
pub trait PlanarField: Sync {
    fn rhs(&self, s: PhaseState) -> Result<PhaseState>;
}

/// Wraps a closure as a [`PlanarField`].
pub struct FnField<F>(pub F);

impl<F> PlanarField for FnField<F>
where
    F: Fn(PhaseState) -> PhaseState + Sync,
{
    fn rhs(&self, s: PhaseState) -> Result<PhaseState> {
        Ok((self.0)(s))
    }
}

/// Anything that can be evaluated as a time-parameterised phase curve.
pub trait Curve {
    /// Ordered time domain `(lo, hi)`.
    fn domain(&self) -> (f64, f64);
    fn state(&self, t: f64) -> Result<PhaseState>;
    /// Time derivative of the state.
    fn velocity(&self, t: f64) -> Result<PhaseState>;
}

/// Wraps closures `t -> state` and `t -> velocity` as a [`Curve`].
pub struct FnCurve<S, V> {
    pub domain: (f64, f64),
    pub state: S,
    pub velocity: V,
}

impl<S, V> Curve for FnCurve<S, V>
where
    S: Fn(f64) -> PhaseState,
    V: Fn(f64) -> PhaseState,
{
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
    fn state(&self, t: f64) -> Result<PhaseState> {
        Ok((self.state)(t))
    }
    fn velocity(&self, t: f64) -> Result<PhaseState> {
        Ok((self.velocity)(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Rising,
    Falling,
    Any,
}

impl Crossing {
    fn fires(self, before: f64, after: f64) -> bool {
        match self {
            Crossing::Rising => before < 0.0 && after >= 0.0,
            Crossing::Falling => before > 0.0 && after <= 0.0,
            Crossing::Any => (before < 0.0 && after >= 0.0) || (before > 0.0 && after <= 0.0),
        }
    }
}

// One accepted step in integration time τ.
#[derive(Debug, Clone)]
struct Segment {
    tau0: f64,
    h: f64,
    // end of validity; below tau0 + h only for an event-truncated last step
    tau1: f64,
    y0: [f64; 2],
    y1: [f64; 2],
    coef: [[f64; 2]; 5],
}

impl Segment {
    fn eval(&self, tau: f64) -> [f64; 2] {
        if tau == self.tau0 {
            return self.y0;
        }
        if tau == self.tau1 {
            return self.y1;
        }
        let th = (tau - self.tau0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.coef;
        let mut y = [0.0; 2];
        for i in 0..2 {
            y[i] = c[0][i] + th * (c[1][i] + th1 * (c[2][i] + th * (c[3][i] + th1 * c[4][i])));
        }
        y
    }

    fn deriv(&self, tau: f64) -> [f64; 2] {
        let th = (tau - self.tau0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.coef;
        let mut d = [0.0; 2];
        for i in 0..2 {
            let a = c[2][i] + th * (c[3][i] + th1 * c[4][i]);
            let da = c[3][i] + (1.0 - 2.0 * th) * c[4][i];
            let b = c[1][i] + th1 * a;
            let db = -a + th1 * da;
            d[i] = (b + th * db) / self.h;
        }
        d
    }
}

/// Densely sampled solution of an initial value problem.
///
/// Samples are ordered in integration direction: increasing `t` for forward
/// runs, decreasing for backward runs.
#[derive(Debug, Clone)]
pub struct Trajectory {
    t0: f64,
    // +1 forward, -1 backward
    sign: f64,
    segments: Vec<Segment>,
    samples: Vec<(f64, PhaseState)>,
}

impl Trajectory {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.samples.last().map_or(self.t0, |s| s.0)
    }

    pub fn is_backward(&self) -> bool {
        self.sign < 0.0
    }

    pub fn samples(&self) -> &[(f64, PhaseState)] {
        &self.samples
    }

    pub fn first(&self) -> PhaseState {
        self.samples[0].1
    }

    pub fn last(&self) -> PhaseState {
        self.samples[self.samples.len() - 1].1
    }

    pub fn step_count(&self) -> usize {
        self.segments.len()
    }

    fn tau_of(&self, t: f64) -> f64 {
        (t - self.t0) * self.sign
    }

    fn segment(&self, t: f64) -> Result<&Segment> {
        let tau = self.tau_of(t);
        let end = self.segments.last().map_or(0.0, |s| s.tau1);
        if !(0.0..=end).contains(&tau) || self.segments.is_empty() {
            let (lo, hi) = self.domain();
            return Err(Error::OutOfDomain { t, lo, hi });
        }
        let idx = self.segments.partition_point(|s| s.tau1 < tau);
        Ok(&self.segments[idx.min(self.segments.len() - 1)])
    }

    /// Dense-output state at physical time `t`.
    pub fn eval(&self, t: f64) -> Result<PhaseState> {
        if self.segments.is_empty() && t == self.t0 {
            return Ok(self.samples[0].1);
        }
        let seg = self.segment(t)?;
        Ok(PhaseState::from_arr(seg.eval(self.tau_of(t))))
    }

    /// Time derivative of the dense output at `t`.
    pub fn eval_derivative(&self, t: f64) -> Result<PhaseState> {
        let seg = self.segment(t)?;
        let d = seg.deriv(self.tau_of(t));
        Ok(PhaseState::new(self.sign * d[0], self.sign * d[1]))
    }

    /// Evaluates on `n` uniformly spaced times spanning the run.
    pub fn resample(&self, n: usize) -> Vec<(f64, PhaseState)> {
        let (a, b) = (self.t0, self.t1());
        (0..n)
            .map(|i| {
                let t = if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1).max(1) as f64 };
                (t, self.eval(t).expect("inside domain"))
            })
            .collect()
    }
}

impl Curve for Trajectory {
    fn domain(&self) -> (f64, f64) {
        let (a, b) = (self.t0, self.t1());
        (a.min(b), a.max(b))
    }
    fn state(&self, t: f64) -> Result<PhaseState> {
        self.eval(t)
    }
    fn velocity(&self, t: f64) -> Result<PhaseState> {
        self.eval_derivative(t)
    }
}

// Dormand–Prince 5(4) tableau with Hairer's dense-output coefficients (the
// field is autonomous, so the nodes c_i are not needed).
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const MAX_STEPS: usize = 2_000_000;
const EVENT_ITERATIONS: usize = 80;
const EVENT_TOL: f64 = 1e-12;

struct Stepper<'a, F: PlanarField + ?Sized> {
    field: &'a F,
    sign: f64,
    tol: f64,
}

struct StepOutcome {
    y1: [f64; 2],
    k7: [f64; 2],
    err: f64,
    coef: [[f64; 2]; 5],
}

impl<F: PlanarField + ?Sized> Stepper<'_, F> {
    fn f(&self, y: [f64; 2]) -> Result<[f64; 2]> {
        let d = self.field.rhs(PhaseState::from_arr(y))?;
        Ok([self.sign * d.x, self.sign * d.u])
    }

    fn comb(y: [f64; 2], h: f64, terms: &[(f64, [f64; 2])]) -> [f64; 2] {
        let mut out = y;
        for i in 0..2 {
            let mut acc = 0.0;
            for (w, k) in terms {
                acc += w * k[i];
            }
            out[i] += h * acc;
        }
        out
    }

    fn step(&self, y: [f64; 2], k1: [f64; 2], h: f64) -> Result<StepOutcome> {
        let k2 = self.f(Self::comb(y, h, &[(A21, k1)]))?;
        let k3 = self.f(Self::comb(y, h, &[(A31, k1), (A32, k2)]))?;
        let k4 = self.f(Self::comb(y, h, &[(A41, k1), (A42, k2), (A43, k3)]))?;
        let k5 = self.f(Self::comb(y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]))?;
        let k6 = self.f(Self::comb(y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]))?;
        let y1 = Self::comb(y, h, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
        let k7 = self.f(y1)?;
        let scale = self.tol * (1.0 + y[0].abs().max(y[1].abs()).max(y1[0].abs()).max(y1[1].abs()));
        let mut err: f64 = 0.0;
        let mut coef = [[0.0; 2]; 5];
        for i in 0..2 {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            err = err.max(e.abs() / scale);
            let ydiff = y1[i] - y[i];
            let bspl = h * k1[i] - ydiff;
            coef[0][i] = y[i];
            coef[1][i] = ydiff;
            coef[2][i] = bspl;
            coef[3][i] = ydiff - h * k7[i] - bspl;
            coef[4][i] =
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        if !y1[0].is_finite() || !y1[1].is_finite() || !err.is_finite() {
            err = f64::INFINITY;
        }
        Ok(StepOutcome { y1, k7, err, coef })
    }

    fn initial_step(&self, y: [f64; 2], k1: [f64; 2], span: f64) -> f64 {
        let sc = self.tol * (1.0 + y[0].abs().max(y[1].abs()));
        let d0 = y[0].abs().max(y[1].abs()) / sc;
        let d1 = k1[0].abs().max(k1[1].abs()) / sc;
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        let probe = Self::comb(y, h0, &[(1.0, k1)]);
        let h1 = match self.f(probe) {
            Ok(k2) => {
                let d2 = (k2[0] - k1[0]).abs().max((k2[1] - k1[1]).abs()) / sc / h0;
                if d1.max(d2) <= 1e-15 {
                    (h0 * 1e-3).max(1e-6)
                } else {
                    (0.01 / d1.max(d2)).powf(0.2)
                }
            }
            Err(_) => h0,
        };
        (100.0 * h0).min(h1).min(span)
    }
}

fn validate(s0: PhaseState, t0: f64, t1: f64, tol: f64) -> Result<()> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if !t0.is_finite() || !t1.is_finite() || t0 == t1 {
        return Err(Error::InvalidArgument(format!("degenerate time span ({t0}, {t1})")));
    }
    if !s0.is_finite() {
        return Err(Error::InvalidArgument("initial state is not finite".into()));
    }
    Ok(())
}

fn run<F, E>(
    field: &F,
    s0: PhaseState,
    t0: f64,
    t1: f64,
    tol: f64,
    event: Option<(&E, Crossing)>,
) -> Result<(Trajectory, Option<f64>)>
where
    F: PlanarField + ?Sized,
    E: Fn(PhaseState) -> f64 + ?Sized,
{
    validate(s0, t0, t1, tol)?;
    let sign = if t1 > t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let stepper = Stepper { field, sign, tol };
    let mut y = s0.arr();
    let mut k1 = stepper.f(y)?;
    let mut h = stepper.initial_step(y, k1, span);
    let mut tau = 0.0;
    let mut traj = Trajectory { t0, sign, segments: Vec::new(), samples: vec![(t0, s0)] };
    let mut ev_prev = event.map(|(e, _)| e(s0));
    let mut rejected = false;

    while tau < span {
        if traj.segments.len() >= MAX_STEPS {
            return Err(Error::TooManySteps(MAX_STEPS));
        }
        let h_min = 16.0 * f64::EPSILON * tau.abs().max(1.0);
        if h < h_min {
            return Err(Error::StepUnderflow {
                t: t0 + sign * tau,
                state: PhaseState::from_arr(y),
            });
        }
        let last = tau + h >= span * (1.0 - 1e-14);
        let h_try = if last { span - tau } else { h };
        let outcome = match stepper.step(y, k1, h_try) {
            Ok(o) if o.err <= 1.0 => o,
            Ok(o) => {
                let fac = if o.err.is_finite() { (0.9 * o.err.powf(-0.2)).max(0.2) } else { 0.25 };
                h = h_try * fac;
                rejected = true;
                continue;
            }
            Err(_) => {
                // a stage left the field's domain
                h = h_try * 0.25;
                rejected = true;
                continue;
            }
        };
        let tau_new = if last { span } else { tau + h_try };
        let seg = Segment {
            tau0: tau,
            h: h_try,
            tau1: tau_new,
            y0: y,
            y1: outcome.y1,
            coef: outcome.coef,
        };
        if let (Some((ev, dir)), Some(before)) = (event, ev_prev) {
            let after = ev(PhaseState::from_arr(outcome.y1));
            if dir.fires(before, after) {
                let tau_ev = localize(&seg, ev, before, after);
                let mut seg = seg;
                let y_ev = seg.eval(tau_ev);
                seg.tau1 = tau_ev;
                seg.y1 = y_ev;
                let t_ev = t0 + sign * tau_ev;
                traj.segments.push(seg);
                traj.samples.push((t_ev, PhaseState::from_arr(y_ev)));
                return Ok((traj, Some(t_ev)));
            }
            ev_prev = Some(after);
        }
        traj.segments.push(seg);
        tau = tau_new;
        y = outcome.y1;
        k1 = outcome.k7;
        if !k1[0].is_finite() || !k1[1].is_finite() {
            return Err(Error::NonFinite { t: t0 + sign * tau, state: PhaseState::from_arr(y) });
        }
        traj.samples.push((t0 + sign * tau, PhaseState::from_arr(y)));
        let fac = if outcome.err == 0.0 { 5.0 } else { (0.9 * outcome.err.powf(-0.2)).clamp(0.2, 5.0) };
        h = if rejected { h_try * fac.min(1.0) } else { h_try * fac };
        rejected = false;
    }
    Ok((traj, None))
}

// Bisection on the dense interpolant of one step.
fn localize<E: Fn(PhaseState) -> f64 + ?Sized>(seg: &Segment, ev: &E, before: f64, after: f64) -> f64 {
    if after == 0.0 {
        return seg.tau1;
    }
    let (mut lo, mut hi) = (seg.tau0, seg.tau1);
    let (mut best, mut best_abs) = (hi, after.abs());
    for _ in 0..EVENT_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = ev(PhaseState::from_arr(seg.eval(mid)));
        if v.abs() < best_abs {
            best = mid;
            best_abs = v.abs();
        }
        if best_abs < EVENT_TOL {
            break;
        }
        if (v < 0.0) == (before < 0.0) && v != 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

/// Integrates over `t_span = (t0, t1)`; `t1 < t0` runs backward.
pub fn integrate<F: PlanarField + ?Sized>(
    field: &F,
    s0: PhaseState,
    t_span: (f64, f64),
    tol: f64,
) -> Result<Trajectory> {
    run::<F, dyn Fn(PhaseState) -> f64>(field, s0, t_span.0, t_span.1, tol, None).map(|r| r.0)
}

/// Integrates from `t = 0` towards `t_max` (negative for backward runs) and
/// stops at the first crossing of `event` through zero in `direction`.
///
/// Returns the trajectory (truncated at the event) and the event time, or
/// `None` when `t_max` is reached without a crossing.
pub fn integrate_until<F, E>(
    field: &F,
    s0: PhaseState,
    event: E,
    direction: Crossing,
    t_max: f64,
    tol: f64,
) -> Result<(Trajectory, Option<f64>)>
where
    F: PlanarField + ?Sized,
    E: Fn(PhaseState) -> f64,
{
    run(field, s0, 0.0, t_max, tol, Some((&event, direction)))
}
