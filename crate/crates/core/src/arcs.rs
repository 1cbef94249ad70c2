//! Special points on the saddle level set and the arcs joining them to the
//! saddle.
//!
//! An entry arc runs along the stable manifold of a saddle `P` from a
//! boundary point into `P`; a leaving arc runs along the unstable manifold
//! from `P` out to a boundary point. Boundary points are either fixed-`x`
//! points on the level set `C = C(P)` or roots of `C = C(P)`, `F_u = 0`.
//! Candidates found on the level set are pushed onto the manifold by
//! bisecting on the side to which nearby trajectories escape.

use crate::error::{Error, Result};
use crate::odeint::{integrate_until, Crossing, Curve, PhaseState, Trajectory};
use crate::par::{self, Exec};
use crate::phase::{trace_curve, ContourGrid, CurveSet, Equilibrium, EulerField};
use crate::problem::{ProblemSpec, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcKind {
    Entry,
    Leaving,
}

impl ArcKind {
    // integration direction from the boundary point towards the saddle
    fn towards_saddle(self) -> f64 {
        match self {
            ArcKind::Entry => 1.0,
            ArcKind::Leaving => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ArcKind::Entry => "entry",
            ArcKind::Leaving => "leaving",
        }
    }
}

/// How the boundary point of an arc is pinned down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    /// The arc passes through the given abscissa.
    FixedX(f64),
    /// The boundary point lies on `F_u = 0`.
    Transversality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn of(x: f64, x_p: f64) -> Side {
        if x < x_p {
            Side::Left
        } else {
            Side::Right
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Position relative to the axis `u = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vertical {
    Above,
    Below,
}

impl Vertical {
    pub fn of(u: f64) -> Vertical {
        if u >= 0.0 {
            Vertical::Above
        } else {
            Vertical::Below
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Vertical::Above => "above",
            Vertical::Below => "below",
        }
    }
}

/// Boundary point of an entry or leaving arc: a point on `C = C(P)` that
/// satisfies the boundary constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcEndpoint {
    pub point: PhaseState,
    pub role: ArcKind,
    pub constraint: Constraint,
    /// `C(point) - C(P)` and either `x - x0` or `F_u(point)`.
    pub residuals: [f64; 2],
    /// Side of the saddle abscissa.
    pub side: Side,
    pub manifold_side: Vertical,
    /// Tangential (double) root of the defining equations.
    pub degenerate: bool,
}

impl ArcEndpoint {
    pub fn new(
        field: &EulerField,
        saddle: &Equilibrium,
        point: PhaseState,
        role: ArcKind,
        constraint: Constraint,
        degenerate: bool,
    ) -> Result<Self> {
        let j = field.jet(point)?;
        let second = match constraint {
            Constraint::FixedX(x0) => point.x - x0,
            Constraint::Transversality => j.du,
        };
        Ok(ArcEndpoint {
            point,
            role,
            constraint,
            residuals: [j.v - point.u * j.du - saddle.c_value, second],
            side: Side::of(point.x, saddle.location.x),
            manifold_side: Vertical::of(point.u),
            degenerate,
        })
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals[0].abs().max(self.residuals[1].abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcOptions {
    pub tol: f64,
    /// Integration tolerance used while refining onto a manifold.
    pub refine_tol: f64,
    /// Arcs are cut where `|x - x_P|` reaches this value.
    pub stop_radius: f64,
    pub t_max: f64,
    /// Phase-plane distance at which a candidate counts as reaching `P`.
    pub approach_radius: f64,
    /// Half-width of the `u` range scanned at a fixed abscissa.
    pub u_span: f64,
    pub u_points: usize,
    /// Seeds placed along `F_u = 0` for the transversal root search.
    pub seeds: usize,
    pub window: Window,
    pub exec: Exec,
}

impl ArcOptions {
    pub fn new(window: Window) -> Self {
        ArcOptions {
            tol: 1e-10,
            refine_tol: 1e-12,
            stop_radius: 1e-5,
            t_max: 400.0,
            approach_radius: 1e-3,
            u_span: 10.0_f64.max(2.0 * window.u.lo.abs().max(window.u.hi.abs())),
            u_points: 2000,
            seeds: 64,
            window,
            exec: Exec::default(),
        }
    }

    pub fn from_problem(problem: &ProblemSpec) -> Self {
        ArcOptions {
            tol: problem.options.tol,
            stop_radius: problem.options.stop_radius,
            ..ArcOptions::new(problem.window)
        }
    }
}

/// A refined entry or leaving arc.
///
/// The stored trajectory runs from the boundary point towards the saddle:
/// forward in time on `[0, duration]` for entry arcs, backward on
/// `[-duration, 0]` for leaving arcs. Physical time starts at `time_offset`.
#[derive(Debug, Clone)]
pub struct Arc {
    pub kind: ArcKind,
    pub saddle: Equilibrium,
    pub endpoint: ArcEndpoint,
    pub trajectory: Trajectory,
    pub duration: f64,
    pub stop_radius: f64,
    pub time_offset: f64,
}

impl Arc {
    pub fn with_offset(mut self, t0: f64) -> Arc {
        self.time_offset = t0;
        self
    }

    fn local(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        let slack = 1e-12 * (1.0 + hi.abs());
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::OutOfDomain { t, lo, hi });
        }
        let t = t.clamp(lo, hi);
        Ok(match self.kind {
            ArcKind::Entry => (t - self.time_offset).clamp(0.0, self.duration),
            ArcKind::Leaving => (t - self.time_offset - self.duration).clamp(-self.duration, 0.0),
        })
    }

    pub fn state_at(&self, t: f64) -> Result<PhaseState> {
        self.trajectory.eval(self.local(t)?)
    }

    /// Manifold branch label: 1 left of the saddle, 2 right of it.
    pub fn branch(&self) -> u8 {
        match self.endpoint.side {
            Side::Left => 1,
            Side::Right => 2,
        }
    }

    /// State where the arc meets the stop radius.
    pub fn saddle_end(&self) -> PhaseState {
        self.trajectory.last()
    }

    /// Integration samples in increasing physical time.
    pub fn samples(&self) -> Vec<(f64, PhaseState)> {
        let shift = match self.kind {
            ArcKind::Entry => self.time_offset,
            ArcKind::Leaving => self.time_offset + self.duration,
        };
        let mut out: Vec<_> = self.trajectory.samples().iter().map(|&(t, s)| (t + shift, s)).collect();
        if self.kind == ArcKind::Leaving {
            out.reverse();
        }
        out
    }
}

impl Curve for Arc {
    fn domain(&self) -> (f64, f64) {
        (self.time_offset, self.time_offset + self.duration)
    }

    fn state(&self, t: f64) -> Result<PhaseState> {
        self.state_at(t)
    }

    fn velocity(&self, t: f64) -> Result<PhaseState> {
        self.trajectory.eval_derivative(self.local(t)?)
    }
}

// Scalar roots of h on a grid: sign changes are bisected, shallow local
// minima of |h| are checked for tangency by golden-section search.
fn scan_roots(
    lo: f64,
    hi: f64,
    n: usize,
    exec: Exec,
    h: &(dyn Fn(f64) -> Option<f64> + Sync),
    dh: &(dyn Fn(f64) -> Option<f64> + Sync),
) -> Vec<(f64, bool)> {
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let hs: Vec<Option<f64>> = par::map(exec, &xs, |&x| h(x).filter(|v| v.is_finite()));
    let mut out = Vec::new();
    for i in 0..n {
        let (Some(a), Some(b)) = (hs[i], hs[i + 1]) else { continue };
        if a == 0.0 {
            out.push((xs[i], false));
        } else if b != 0.0 && (a < 0.0) != (b < 0.0) {
            let (mut l, mut r, mut hl) = (xs[i], xs[i + 1], a);
            for _ in 0..200 {
                let m = 0.5 * (l + r);
                if m <= l || m >= r {
                    break;
                }
                let Some(hm) = h(m) else { break };
                if hm == 0.0 {
                    l = m;
                    r = m;
                    break;
                }
                if (hm < 0.0) == (hl < 0.0) {
                    l = m;
                    hl = hm;
                } else {
                    r = m;
                }
            }
            let mut x = 0.5 * (l + r);
            // one Newton polish
            if let (Some(v), Some(d)) = (h(x), dh(x)) {
                let y = x - v / d;
                if d != 0.0 && y > xs[i] && y < xs[i + 1] && h(y).is_some_and(|w| w.abs() <= v.abs()) {
                    x = y;
                }
            }
            out.push((x, false));
        }
        if i > 0 {
            if let Some(m0) = hs[i - 1] {
                // ties on the left catch minima straddled symmetrically by two nodes
                if a.abs() <= m0.abs() && a.abs() < b.abs() && (m0 < 0.0) == (b < 0.0) {
                    if let Some(x) = golden_min(xs[i - 1], xs[i + 1], h) {
                        out.push((x, true));
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.dedup_by(|b, a| {
        let same = (b.0 - a.0).abs() <= 1e-8 * (1.0 + a.0.abs());
        if same {
            a.1 |= b.1;
        }
        same
    });
    out
}

fn golden_min(mut a: f64, mut b: f64, h: &(dyn Fn(f64) -> Option<f64> + Sync)) -> Option<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let f = |x: f64| h(x).map(f64::abs);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..200 {
        if b - a <= 4.0 * f64::EPSILON * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    (f(x)? <= 1e-12).then_some(x)
}

/// Solves `F_u(x, u) = 0` for `u` near `guess` by Newton's method.
pub fn transversal_u(field: &EulerField, x: f64, guess: f64) -> Option<f64> {
    let mut u = guess;
    for _ in 0..60 {
        let j = field.jet(PhaseState::new(x, u)).ok()?;
        if j.duu == 0.0 {
            return None;
        }
        let step = j.du / j.duu;
        u -= step;
        if !u.is_finite() {
            return None;
        }
        if step.abs() <= 2.0 * f64::EPSILON * (1.0 + u.abs()) {
            break;
        }
    }
    field.transversality(PhaseState::new(x, u)).ok().filter(|r| r.abs() <= 1e-10).map(|_| u)
}

fn transversal_newton(field: &EulerField, c_p: f64, mut s: PhaseState) -> Option<PhaseState> {
    for _ in 0..60 {
        let j = field.jet(s).ok()?;
        let g0 = j.v - s.u * j.du - c_p;
        let g1 = j.du;
        let a = j.dx - s.u * j.dxu;
        let b = -s.u * j.duu;
        let (c, d) = (j.dxu, j.duu);
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = (g0 * d - b * g1) / det;
        let du = (a * g1 - c * g0) / det;
        s = PhaseState::new(s.x - dx, s.u - du);
        if !s.is_finite() {
            return None;
        }
        if dx.abs().max(du.abs()) <= 4.0 * f64::EPSILON * (1.0 + s.norm_inf()) {
            break;
        }
    }
    let j = field.jet(s).ok()?;
    let scale = 1.0 + c_p.abs();
    ((j.v - s.u * j.du - c_p).abs() <= 1e-10 * scale && j.du.abs() <= 1e-10 * scale).then_some(s)
}

/// Points satisfying `constraint` on the level set `C = C(P)`.
///
/// For [`Constraint::FixedX`] the roots in `u` are returned in increasing
/// order. For [`Constraint::Transversality`] the roots inside the window are
/// returned sorted by distance from `P`, excluding `P` itself. Points where
/// the integrand cannot be evaluated are dropped.
pub fn candidates(
    field: &EulerField,
    saddle: &Equilibrium,
    role: ArcKind,
    constraint: Constraint,
    opts: &ArcOptions,
) -> Vec<ArcEndpoint> {
    let make = |p: PhaseState, degenerate: bool| ArcEndpoint::new(field, saddle, p, role, constraint, degenerate).ok();
    let c_p = saddle.c_value;
    match constraint {
        Constraint::FixedX(x0) => {
            let h = |u: f64| field.hamiltonian(PhaseState::new(x0, u)).ok().map(|c| c - c_p);
            let dh = |u: f64| field.jet(PhaseState::new(x0, u)).ok().map(|j| -u * j.duu);
            scan_roots(-opts.u_span, opts.u_span, opts.u_points, opts.exec, &h, &dh)
                .into_iter()
                .filter_map(|(u, degenerate)| make(PhaseState::new(x0, u), degenerate))
                .collect()
        }
        Constraint::Transversality => {
            let lines = trace_curve(field, CurveSet::Transversality, opts.window, ContourGrid::default(), opts.exec);
            let total: f64 = lines.iter().map(|l| l.length()).sum();
            let mut seeds = Vec::new();
            if total > 0.0 {
                let n = opts.seeds.max(1);
                let mut k = 0;
                let mut walked = 0.0;
                'outer: for l in &lines {
                    for w in l.points.windows(2) {
                        let len = w[0].dist(w[1]);
                        while (k as f64 + 0.5) * total / n as f64 <= walked + len {
                            let t = ((k as f64 + 0.5) * total / n as f64 - walked) / len;
                            seeds.push(PhaseState::new(w[0].x + t * (w[1].x - w[0].x), w[0].u + t * (w[1].u - w[0].u)));
                            k += 1;
                            if k == n {
                                break 'outer;
                            }
                        }
                        walked += len;
                    }
                }
            }
            let roots: Vec<Option<PhaseState>> = par::map(opts.exec, &seeds, |&s| transversal_newton(field, c_p, s));
            let w = opts.window;
            let mut roots: Vec<PhaseState> = roots
                .into_iter()
                .flatten()
                .filter(|s| w.margin(s.x, s.u) >= -1e-9 * (1.0 + s.norm_inf()))
                .filter(|s| s.dist(saddle.location) > 1e-6)
                .collect();
            let p = saddle.location;
            roots.sort_by(|a, b| a.dist(p).total_cmp(&b.dist(p)).then(a.x.total_cmp(&b.x)));
            let mut uniq: Vec<PhaseState> = Vec::new();
            for r in roots {
                if uniq.iter().all(|q| q.dist(r) > 1e-8 * (1.0 + r.norm_inf())) {
                    uniq.push(r);
                }
            }
            uniq.into_iter().filter_map(|p| make(p, false)).collect()
        }
    }
}

/// Intersections of `x = x0` with the level set of `saddle`.
pub fn entry_candidates(field: &EulerField, saddle: &Equilibrium, x0: f64, opts: &ArcOptions) -> Vec<ArcEndpoint> {
    candidates(field, saddle, ArcKind::Entry, Constraint::FixedX(x0), opts)
}

/// Roots of `C = C(P)`, `F_u = 0` other than `P`, nearest first.
pub fn leaving_candidates(field: &EulerField, saddle: &Equilibrium, opts: &ArcOptions) -> Vec<ArcEndpoint> {
    candidates(field, saddle, ArcKind::Leaving, Constraint::Transversality, opts)
}

/// Which invariant manifold a refinement targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Manifold {
    /// Points whose forward orbit tends to `P`.
    StableForward,
    /// Points whose backward orbit tends to `P`.
    UnstableBackward,
}

impl Manifold {
    fn direction(self) -> f64 {
        match self {
            Manifold::StableForward => 1.0,
            Manifold::UnstableBackward => -1.0,
        }
    }

    fn of(kind: ArcKind) -> Self {
        match kind {
            ArcKind::Entry => Manifold::StableForward,
            ArcKind::Leaving => Manifold::UnstableBackward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Escape {
    Left,
    Right,
    Undecided,
}

// Side of P on which the orbit of `s` first moves away from P in x: the far
// side after overshooting x_P, the near side after turning back.
fn escape_side(field: &EulerField, saddle: &Equilibrium, s: PhaseState, manifold: Manifold, tol: f64) -> Escape {
    let xp = saddle.location.x;
    let dir = manifold.direction();
    let side = |x: f64| if x < xp { Escape::Left } else { Escape::Right };
    let leaving = |q: PhaseState| dir * (q.x - xp) * q.u > 0.0;
    if leaving(s) {
        return side(s.x);
    }
    let rate = saddle.min_rate().unwrap_or(1.0);
    let t_max = 100.0 / rate + 50.0;
    let ev = |q: PhaseState| if leaving(q) { 1.0 } else { -1.0 };
    match integrate_until(field, s, ev, Crossing::Rising, dir * t_max, tol) {
        Ok((tr, Some(_))) => side(tr.last().x),
        _ => Escape::Undecided,
    }
}

/// Parameterisation of the boundary constraint used during refinement.
fn constrained_point(field: &EulerField, constraint: Constraint, guess: PhaseState, theta: f64) -> Option<PhaseState> {
    match constraint {
        Constraint::FixedX(x) => Some(PhaseState::new(x, theta)),
        Constraint::Transversality => transversal_u(field, theta, guess.u).map(|u| PhaseState::new(theta, u)),
    }
}

/// Moves `start` along its constraint (in `u` for a fixed abscissa, along
/// `F_u = 0` otherwise) onto the chosen manifold of `saddle`.
///
/// Brackets the manifold between points escaping to opposite sides, then
/// bisects until the bracket is a few ulps wide or the escape side can no
/// longer be decided within the time budget.
pub fn refine_to_manifold(
    field: &EulerField,
    q: &ArcEndpoint,
    saddle: &Equilibrium,
    manifold: Manifold,
    tol: f64,
) -> Result<ArcEndpoint> {
    let p = refine_point(field, saddle, q.point, q.constraint, manifold, tol)?;
    log::debug!("refined ({}, {}) to ({}, {}) near saddle x = {}", q.point.x, q.point.u, p.x, p.u, saddle.location.x);
    ArcEndpoint::new(field, saddle, p, q.role, q.constraint, q.degenerate)
}

fn refine_point(
    field: &EulerField,
    saddle: &Equilibrium,
    start: PhaseState,
    constraint: Constraint,
    manifold: Manifold,
    tol: f64,
) -> Result<PhaseState> {
    saddle.require_saddle()?;
    if (start.x - saddle.location.x).abs() == 0.0 {
        return Err(Error::InvalidArgument("refinement start coincides with the saddle abscissa".into()));
    }
    let theta0 = match constraint {
        Constraint::FixedX(_) => start.u,
        Constraint::Transversality => start.x,
    };
    let side_at = |theta: f64| -> Option<Escape> {
        let p = constrained_point(field, constraint, start, theta)?;
        Some(escape_side(field, saddle, p, manifold, tol))
    };
    let s0 = match side_at(theta0) {
        Some(Escape::Undecided) => return Ok(constrained_point(field, constraint, start, theta0).unwrap_or(start)),
        Some(s) => s,
        None => return Err(Error::NotConverged("refinement start is not on the constraint".into())),
    };
    let scale = 1.0 + theta0.abs();
    let mut delta = 1e-10 * scale;
    let mut bracket = None;
    while delta <= 0.1 * scale {
        for sign in [1.0, -1.0] {
            let th = theta0 + sign * delta;
            match side_at(th) {
                Some(Escape::Undecided) => {
                    return Ok(constrained_point(field, constraint, start, th).unwrap_or(start));
                }
                Some(s) if s != s0 => {
                    bracket = Some(if sign > 0.0 { (theta0, th) } else { (th, theta0) });
                    break;
                }
                _ => {}
            }
        }
        if bracket.is_some() {
            break;
        }
        delta *= 10.0;
    }
    let (mut a, mut b) = bracket.ok_or_else(|| {
        Error::NoBracket(format!("no escape-side change within 0.1 of {theta0} along the constraint"))
    })?;
    let side_a = side_at(a).unwrap_or(s0);
    let mut mid = 0.5 * (a + b);
    while b - a > 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
        mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        match side_at(mid) {
            Some(Escape::Undecided) | None => break,
            Some(s) if s == side_a => a = mid,
            Some(_) => b = mid,
        }
    }
    constrained_point(field, constraint, start, mid)
        .ok_or_else(|| Error::NotConverged("constraint lost during refinement".into()))
}

/// Integrates from a boundary point to the stop radius of `saddle`.
///
/// The run uses the refinement tolerance (when tighter) so that it follows
/// the same numerical orbit the refinement bisected on.
pub fn build_arc(
    field: &EulerField,
    saddle: &Equilibrium,
    kind: ArcKind,
    endpoint: ArcEndpoint,
    stop_radius: f64,
    opts: &ArcOptions,
) -> Result<Arc> {
    let xp = saddle.location.x;
    if !((endpoint.point.x - xp).abs() > stop_radius) {
        return Err(Error::InvalidArgument(format!(
            "boundary point x = {} lies within the stop radius {stop_radius} of the saddle",
            endpoint.point.x
        )));
    }
    let dir = kind.towards_saddle();
    let (trajectory, hit) = integrate_until(
        field,
        endpoint.point,
        |s| (s.x - xp).abs() - stop_radius,
        Crossing::Falling,
        dir * opts.t_max,
        opts.tol.min(opts.refine_tol),
    )?;
    let t = hit.ok_or_else(|| Error::EventNotReached {
        t_max: opts.t_max,
        what: format!("{} arc did not reach |x - {xp}| = {stop_radius}", kind.name()),
    })?;
    Ok(Arc { kind, saddle: saddle.clone(), endpoint, trajectory, duration: t.abs(), stop_radius, time_offset: 0.0 })
}

/// Finds the boundary point of an arc of `kind` satisfying `constraint`:
/// the candidate whose orbit reaches `P` first, refined onto the manifold.
pub fn locate_endpoint(
    field: &EulerField,
    saddle: &Equilibrium,
    kind: ArcKind,
    constraint: Constraint,
    opts: &ArcOptions,
) -> Result<ArcEndpoint> {
    saddle.require_saddle()?;
    let p = saddle.location;
    let dir = kind.towards_saddle();
    let cands = candidates(field, saddle, kind, constraint, opts);
    log::debug!("{} candidates for the {} arc of x = {}", cands.len(), kind.name(), p.x);
    let reach: Vec<Option<f64>> = par::map(opts.exec, &cands, |c| {
        let r = opts.approach_radius.min(0.5 * c.point.dist(p));
        let (_, hit) =
            integrate_until(field, c.point, |s| s.dist(p) - r, Crossing::Falling, dir * opts.t_max, opts.tol).ok()?;
        hit.map(f64::abs)
    });
    let best = cands
        .iter()
        .zip(&reach)
        .filter_map(|(c, t)| t.map(|t| (c, t)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::EventNotReached {
            t_max: opts.t_max,
            what: format!("no {} candidate approaches the saddle at x = {}", kind.name(), p.x),
        })?;
    refine_to_manifold(field, best.0, saddle, Manifold::of(kind), opts.refine_tol)
}

/// Integrates forward from a refined entry point into the stop radius.
pub fn entry_arc(field: &EulerField, q_e: &ArcEndpoint, saddle: &Equilibrium, opts: &ArcOptions) -> Result<Arc> {
    build_arc(field, saddle, ArcKind::Entry, *q_e, opts.stop_radius, opts)
}

/// Integrates backward from a refined leaving point into the stop radius.
pub fn leaving_arc(field: &EulerField, q_l: &ArcEndpoint, saddle: &Equilibrium, opts: &ArcOptions) -> Result<Arc> {
    build_arc(field, saddle, ArcKind::Leaving, *q_l, opts.stop_radius, opts)
}

/// Locates, refines and integrates the arc of `kind` satisfying `constraint`.
pub fn find_arc(field: &EulerField, saddle: &Equilibrium, kind: ArcKind, constraint: Constraint, opts: &ArcOptions) -> Result<Arc> {
    let q = locate_endpoint(field, saddle, kind, constraint, opts)?;
    build_arc(field, saddle, kind, q, opts.stop_radius, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparatrixKind {
    Stable,
    Unstable,
}

impl SeparatrixKind {
    pub fn name(self) -> &'static str {
        match self {
            SeparatrixKind::Stable => "stable",
            SeparatrixKind::Unstable => "unstable",
        }
    }
}

/// One branch of an invariant manifold of a saddle, traced until it leaves
/// the window, runs into the guard region, or exhausts `t_max`.
///
/// Branch 1 lies left of the saddle, branch 2 to the right. Stable branches
/// are stored as backward runs.
#[derive(Debug, Clone)]
pub struct Separatrix {
    pub kind: SeparatrixKind,
    pub branch: u8,
    pub side: Side,
    /// Sign of `u` along the branch near the saddle.
    pub u_sign: f64,
    pub trajectory: Trajectory,
}

/// The four separatrix branches of `saddle`.
pub fn separatrices(field: &EulerField, saddle: &Equilibrium, offset: f64, opts: &ArcOptions) -> Result<Vec<Separatrix>> {
    saddle.require_saddle()?;
    let vs = saddle.stable_vector().expect("saddle has eigenvectors");
    let vu = saddle.unstable_vector().expect("saddle has eigenvectors");
    let p = saddle.location;
    let jobs = [
        (SeparatrixKind::Stable, -1.0, vs),
        (SeparatrixKind::Stable, 1.0, vs),
        (SeparatrixKind::Unstable, -1.0, vu),
        (SeparatrixKind::Unstable, 1.0, vu),
    ];
    let w = opts.window;
    let floor = field.guard_floor();
    let stop = |s: PhaseState| -> f64 {
        let guard = field.jet(s).map(|j| j.duu.abs() / floor.max(f64::MIN_POSITIVE) - 2.0).unwrap_or(-1.0);
        w.margin(s.x, s.u).min(if floor > 0.0 { guard } else { 1.0 })
    };
    let runs = par::map(opts.exec, &jobs, |&(kind, sigma, v)| {
        let s0 = PhaseState::new(p.x + sigma * offset * v.x, p.u + sigma * offset * v.u);
        let dir = if kind == SeparatrixKind::Stable { -1.0 } else { 1.0 };
        let (trajectory, _) = integrate_until(field, s0, stop, Crossing::Falling, dir * opts.t_max, opts.tol)?;
        let side = Side::of(s0.x, p.x);
        Ok(Separatrix {
            kind,
            branch: if side == Side::Left { 1 } else { 2 },
            side,
            u_sign: (s0.u - p.u).signum(),
            trajectory,
        })
    });
    runs.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::phase::{build_field, find_equilibria};
    use crate::problem::Interval;

    fn lakes() -> (EulerField, Vec<Equilibrium>, ArcOptions) {
        let p = catalog::shallow_lakes(catalog::fixed_start(0.5, 63.0));
        let f = build_field(&p).unwrap();
        let eq = find_equilibria(&f, p.window.x, 400, Exec::default());
        (f, eq, ArcOptions::from_problem(&p))
    }

    fn quadratic() -> (EulerField, Equilibrium, ArcOptions) {
        let p = catalog::quadratic(catalog::fixed_start(1.0, 10.0));
        let f = build_field(&p).unwrap();
        let eq = find_equilibria(&f, p.window.x, 400, Exec::default());
        (f, eq[0].clone(), ArcOptions::from_problem(&p))
    }

    #[test]
    fn quadratic_entry_is_exponential() {
        let (f, sad, opts) = quadratic();
        let arc = find_arc(&f, &sad, ArcKind::Entry, Constraint::FixedX(1.0), &opts).unwrap();
        assert!((arc.endpoint.point.u + 1.0).abs() < 1e-10, "{:?}", arc.endpoint);
        assert_eq!(arc.endpoint.manifold_side, Vertical::Below);
        // x = e^{-t} reaches 1e-5 at t = ln 1e5
        assert!((arc.duration - 1e5f64.ln()).abs() < 1e-6, "{}", arc.duration);
        for &(t, s) in arc.samples().iter() {
            assert!((s.x - (-t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn quadratic_refinement_from_perturbed_point() {
        let (f, sad, opts) = quadratic();
        let q = ArcEndpoint::new(&f, &sad, PhaseState::new(1.0, -1.0 + 1e-3), ArcKind::Entry, Constraint::FixedX(1.0), false)
            .unwrap();
        let r = refine_to_manifold(&f, &q, &sad, Manifold::StableForward, opts.refine_tol).unwrap();
        assert!((r.point.u + 1.0).abs() < 1e-12, "{r:?}");
        assert!(r.max_residual() < 1e-10);
    }

    #[test]
    fn refinement_without_bracket_fails() {
        // far above both manifolds every nearby orbit leaves to the right
        let (f, sad, opts) = quadratic();
        let q = ArcEndpoint::new(&f, &sad, PhaseState::new(1.0, 5.0), ArcKind::Entry, Constraint::FixedX(1.0), false).unwrap();
        assert!(matches!(
            refine_to_manifold(&f, &q, &sad, Manifold::StableForward, opts.refine_tol),
            Err(Error::NoBracket(_))
        ));
    }

    #[test]
    fn quadratic_leaving_to_fixed_end() {
        let (f, sad, opts) = quadratic();
        let arc = find_arc(&f, &sad, ArcKind::Leaving, Constraint::FixedX(-0.5), &opts).unwrap().with_offset(3.0);
        assert!((arc.endpoint.point.u + 0.5).abs() < 1e-10);
        assert!((arc.duration - 0.5e5f64.ln()).abs() < 1e-6);
        let (lo, hi) = arc.domain();
        assert_eq!(lo, 3.0);
        assert!((arc.state_at(hi).unwrap().x + 0.5).abs() < 1e-12);
        assert!((arc.state_at(lo).unwrap().x + 1e-5).abs() < 1e-12);
        let s = arc.samples();
        assert!(s.windows(2).all(|w| w[1].0 > w[0].0));
        assert!((s[0].1.x + 1e-5).abs() < 1e-12);
        assert!(leaving_candidates(&f, &sad, &opts).is_empty());
    }

    #[test]
    fn coarse_stop_radius_shortens_arc() {
        let (f, sad, opts) = quadratic();
        let q = locate_endpoint(&f, &sad, ArcKind::Entry, Constraint::FixedX(1.0), &opts).unwrap();
        let fine = entry_arc(&f, &q, &sad, &opts).unwrap();
        let coarse = entry_arc(&f, &q, &sad, &ArcOptions { stop_radius: 0.5, ..opts }).unwrap();
        assert!((coarse.duration - 2f64.ln()).abs() < 1e-8);
        assert!(coarse.duration < fine.duration);
        assert_eq!(coarse.trajectory.first(), q.point);
    }

    #[test]
    fn shallow_lakes_entry_point() {
        let (f, eq, opts) = lakes();
        let c = entry_candidates(&f, &eq[2], 0.5, &opts);
        assert_eq!(c.len(), 2);
        assert!((c[0].point.u + 0.30751221580).abs() < 1e-9 && (c[1].point.u - 0.30751221580).abs() < 1e-9);
        assert_eq!((c[0].manifold_side, c[1].manifold_side), (Vertical::Below, Vertical::Above));
        assert!(c.iter().all(|c| c.residuals[0].abs() <= 1e-12));
        let q = locate_endpoint(&f, &eq[2], ArcKind::Entry, Constraint::FixedX(0.5), &opts).unwrap();
        assert!((q.point.u - 0.307512215805).abs() < 1e-9, "{q:?}");
        assert!(q.max_residual() < 1e-10);
        assert_eq!(q.side, Side::Left);
    }

    #[test]
    fn shallow_lakes_transversal_roots() {
        let (f, eq, opts) = lakes();
        let c = leaving_candidates(&f, &eq[2], &opts);
        let q2 = PhaseState::new(0.9852094339228795, -0.1970965709246259);
        let q1 = PhaseState::new(-0.9852094339228795, 1.1821966365674053);
        assert_eq!(c.len(), 2, "{c:?}");
        assert!(c[0].point.dist(q2) < 1e-9);
        assert!(c[1].point.dist(q1) < 1e-9);
        assert!(leaving_candidates(&f, &eq[0], &opts).is_empty());
        let leave = locate_endpoint(&f, &eq[2], ArcKind::Leaving, Constraint::Transversality, &opts).unwrap();
        assert!(leave.point.dist(q2) < 1e-7, "{leave:?}");
        assert!(leave.max_residual() < 1e-10);
        let enter = locate_endpoint(&f, &eq[2], ArcKind::Entry, Constraint::Transversality, &opts).unwrap();
        assert!(enter.point.dist(q1) < 1e-7, "{enter:?}");
    }

    #[test]
    fn entry_scan_flags_tangency() {
        // C of F = u² + x² is x² - u²; at x = 0 the level C = 0 touches u = 0
        let (f, sad, opts) = quadratic();
        let c = entry_candidates(&f, &sad, 0.0, &opts);
        assert_eq!(c.len(), 1);
        assert!(c[0].degenerate && c[0].point.u.abs() < 1e-5);
        let c = entry_candidates(&f, &sad, 0.3, &opts);
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|c| !c.degenerate && (c.point.u.abs() - 0.3).abs() < 1e-12));
    }

    #[test]
    fn double_well_leaving_from_unstable_branch() {
        let p = catalog::double_well(catalog::fixed_start(0.5, 10.0));
        let f = build_field(&p).unwrap();
        let eq = find_equilibria(&f, Interval::new(0.5, 1.5), 100, Exec::Sequential);
        let sad = &eq[0];
        assert!(sad.is_saddle());
        let opts = ArcOptions::from_problem(&p);
        let seps = separatrices(&f, sad, 1e-6, &opts).unwrap();
        let branch = seps.iter().find(|s| s.kind == SeparatrixKind::Unstable && s.branch == 2).unwrap();
        let t = branch.trajectory.samples().iter().find(|(_, s)| s.dist(sad.location) >= 0.5).unwrap().0;
        let q = branch.trajectory.eval(t).unwrap();
        let q = ArcEndpoint::new(&f, sad, q, ArcKind::Leaving, Constraint::FixedX(q.x), false).unwrap();
        let arc = leaving_arc(&f, &q, sad, &opts).unwrap();
        assert!((arc.saddle_end().x - 1.0).abs() <= 1e-5 + 1e-12);

        // a point on the stable branch never contracts backward
        let stable = seps.iter().find(|s| s.kind == SeparatrixKind::Stable && s.branch == 2).unwrap();
        let t = stable.trajectory.samples().iter().find(|(_, s)| s.dist(sad.location) >= 0.5).unwrap().0;
        let q = stable.trajectory.eval(t).unwrap();
        let q = ArcEndpoint::new(&f, sad, q, ArcKind::Leaving, Constraint::FixedX(q.x), false).unwrap();
        assert!(leaving_arc(&f, &q, sad, &ArcOptions { t_max: 50.0, ..opts }).is_err());
    }

    #[test]
    fn separatrices_of_quadratic() {
        let (f, sad, opts) = quadratic();
        let seps = separatrices(&f, &sad, 1e-6, &opts).unwrap();
        assert_eq!(seps.len(), 4);
        for s in &seps {
            let last = s.trajectory.last();
            assert!(last.x.abs() >= 2.0 - 1e-9 || last.u.abs() >= 2.0 - 1e-9);
            let slope = last.u / last.x;
            match s.kind {
                SeparatrixKind::Stable => assert!((slope + 1.0).abs() < 1e-6),
                SeparatrixKind::Unstable => assert!((slope - 1.0).abs() < 1e-6),
            }
            assert_eq!(s.branch == 1, last.x < 0.0);
        }
        let left_stable = seps.iter().find(|s| s.kind == SeparatrixKind::Stable && s.branch == 1).unwrap();
        assert_eq!(left_stable.u_sign, 1.0);
    }

    #[test]
    fn refine_rejects_non_saddle() {
        let p = catalog::double_well(catalog::fixed_start(0.5, 10.0));
        let f = build_field(&p).unwrap();
        let eq = find_equilibria(&f, Interval::new(-2.0, 2.0), 400, Exec::Sequential);
        let centre = &eq[1];
        let q = ArcEndpoint {
            point: PhaseState::new(0.5, 0.1),
            role: ArcKind::Entry,
            constraint: Constraint::FixedX(0.5),
            residuals: [0.0; 2],
            side: Side::Right,
            manifold_side: Vertical::Above,
            degenerate: false,
        };
        assert!(matches!(
            refine_to_manifold(&f, &q, centre, Manifold::StableForward, 1e-10),
            Err(Error::NotASaddle { .. })
        ));
    }
}
