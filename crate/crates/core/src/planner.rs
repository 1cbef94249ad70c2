//! Boundary-condition case analysis and the piecewise turnpike approximation.
//!
//! A long-horizon extremal is approximated by the entry arc on `[0, T_e)`,
//! the saddle itself on `[T_e, T - T_l]` and the leaving arc on
//! `(T - T_l, T]`.

use crate::arcs::{self, Arc, ArcKind, ArcOptions, Constraint};
use crate::error::{Error, Result};
use crate::odeint::{Curve, PhaseState};
use crate::par;
use crate::phase::{Equilibrium, EulerField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    Fixed(f64),
    Free,
}

impl Endpoint {
    pub fn fixed(self) -> Option<f64> {
        match self {
            Endpoint::Fixed(x) => Some(x),
            Endpoint::Free => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    pub x0: Endpoint,
    pub x_t: Endpoint,
    pub horizon: f64,
}

/// Which boundary pattern produced an approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// Fixed start, free end, leaving along the unstable manifold to `F_u = 0`.
    FixedStartFreeEnd,
    /// Fixed start, free end, and no transversal point: the saddle is kept.
    FixedStartNeverLeft,
    FixedEndpoints,
    FreeStartFixedEnd,
    FreeEndpoints,
}

impl Case {
    pub fn label(self) -> &'static str {
        match self {
            Case::FixedStartFreeEnd => "fixed-start-free-end",
            Case::FixedStartNeverLeft => "fixed-start-never-left",
            Case::FixedEndpoints => "fixed-endpoints",
            Case::FreeStartFixedEnd => "free-start-fixed-end",
            Case::FreeEndpoints => "free-endpoints",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    Entry,
    Plateau,
    Leaving,
}

impl Piece {
    pub fn name(self) -> &'static str {
        match self {
            Piece::Entry => "entry",
            Piece::Plateau => "plateau",
            Piece::Leaving => "leaving",
        }
    }
}

/// Entry arc, plateau at the saddle, leaving arc.
#[derive(Debug, Clone)]
pub struct TurnpikeApproximation {
    pub saddle: Equilibrium,
    pub entry: Option<Arc>,
    /// Leaving arc with its time offset set to `T - T_l`.
    pub leaving: Option<Arc>,
    pub horizon: f64,
    pub case: Case,
    pub warnings: Vec<String>,
}

impl TurnpikeApproximation {
    pub fn t_entry(&self) -> f64 {
        self.entry.as_ref().map_or(0.0, |a| a.duration)
    }

    pub fn t_leave(&self) -> f64 {
        self.leaving.as_ref().map_or(0.0, |a| a.duration)
    }

    /// `[T_e, T - T_l]`.
    pub fn plateau(&self) -> (f64, f64) {
        (self.t_entry(), self.horizon - self.t_leave())
    }

    pub fn piece(&self, t: f64) -> Result<Piece> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfDomain { t, lo: 0.0, hi: self.horizon });
        }
        let (a, b) = self.plateau();
        Ok(if t < a {
            Piece::Entry
        } else if t <= b {
            Piece::Plateau
        } else {
            Piece::Leaving
        })
    }

    pub fn evaluate(&self, t: f64) -> Result<PhaseState> {
        match self.piece(t)? {
            Piece::Entry => self.entry.as_ref().expect("entry piece has an arc").state_at(t),
            Piece::Plateau => Ok(PhaseState::new(self.saddle.location.x, 0.0)),
            Piece::Leaving => self.leaving.as_ref().expect("leaving piece has an arc").state_at(t),
        }
    }

    /// `n` uniformly spaced samples on `[0, T]` tagged with their piece.
    pub fn sample(&self, n: usize) -> Result<Vec<(f64, PhaseState, Piece)>> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let t = if i + 1 == n { self.horizon } else { self.horizon * i as f64 / (n - 1) as f64 };
                Ok((t, self.evaluate(t)?, self.piece(t)?))
            })
            .collect()
    }

    /// Jumps in `x` at `T_e` and `T - T_l`.
    pub fn splice_jumps(&self) -> (f64, f64) {
        let xp = self.saddle.location.x;
        let a = self.entry.as_ref().map_or(0.0, |e| (e.saddle_end().x - xp).abs());
        let b = self.leaving.as_ref().map_or(0.0, |l| (l.saddle_end().x - xp).abs());
        (a, b)
    }
}

impl Curve for TurnpikeApproximation {
    fn domain(&self) -> (f64, f64) {
        (0.0, self.horizon)
    }

    fn state(&self, t: f64) -> Result<PhaseState> {
        self.evaluate(t)
    }

    fn velocity(&self, t: f64) -> Result<PhaseState> {
        match self.piece(t)? {
            Piece::Entry => self.entry.as_ref().expect("entry piece has an arc").velocity(t),
            Piece::Plateau => Ok(PhaseState::new(0.0, 0.0)),
            Piece::Leaving => self.leaving.as_ref().expect("leaving piece has an arc").velocity(t),
        }
    }
}

// Below this |F_u| a sign is not trusted.
const FU_NOISE: f64 = 1e-8;

// True when F_u changes sign strictly inside the arc: the orbit meets the
// transversality curve before reaching the saddle.
fn crosses_transversality(field: &EulerField, arc: &Arc) -> bool {
    let mut sign = 0.0;
    let samples = arc.trajectory.samples();
    for &(_, s) in &samples[1..samples.len().saturating_sub(1)] {
        let Ok(fu) = field.transversality(s) else { continue };
        if fu.abs() <= FU_NOISE {
            continue;
        }
        if sign != 0.0 && fu.signum() != sign {
            return true;
        }
        sign = fu.signum();
    }
    false
}

enum Candidate {
    Ok(Box<TurnpikeApproximation>),
    TooShort(f64),
    Rejected,
}

fn plan_one(
    field: &EulerField,
    saddle: &Equilibrium,
    others: &[Equilibrium],
    bc: &BoundaryConditions,
    opts: &ArcOptions,
    stretch: bool,
) -> Result<Candidate> {
    let arc = |kind, constraint| arcs::find_arc(field, saddle, kind, constraint, opts);
    let mut warnings = Vec::new();

    let entry = match bc.x0 {
        Endpoint::Fixed(x0) => match arc(ArcKind::Entry, Constraint::FixedX(x0)) {
            Ok(a) if !crosses_transversality(field, &a) => Some(a),
            _ => return Ok(Candidate::Rejected),
        },
        Endpoint::Free => arc(ArcKind::Entry, Constraint::Transversality).ok(),
    };
    let leaving = match bc.x_t {
        Endpoint::Fixed(xt) => match arc(ArcKind::Leaving, Constraint::FixedX(xt)) {
            Ok(a) => Some(a),
            Err(_) => return Ok(Candidate::Rejected),
        },
        Endpoint::Free => arc(ArcKind::Leaving, Constraint::Transversality).ok(),
    };
    if entry.is_none() && leaving.is_none() {
        return Ok(Candidate::Rejected);
    }

    let case = match (bc.x0, bc.x_t) {
        (Endpoint::Fixed(_), Endpoint::Free) if leaving.is_some() => Case::FixedStartFreeEnd,
        (Endpoint::Fixed(_), Endpoint::Free) => Case::FixedStartNeverLeft,
        (Endpoint::Fixed(_), Endpoint::Fixed(_)) => Case::FixedEndpoints,
        (Endpoint::Free, Endpoint::Fixed(_)) => Case::FreeStartFixedEnd,
        (Endpoint::Free, Endpoint::Free) => Case::FreeEndpoints,
    };
    if leaving.is_none() {
        warnings.push("no transversal point on the saddle level set: the turnpike is never left".to_owned());
    }
    if entry.is_none() {
        warnings.push("no transversal point on the saddle level set: the extremal starts at the turnpike".to_owned());
    }
    for a in entry.iter().chain(&leaving) {
        if a.endpoint.degenerate {
            warnings.push(format!("{} endpoint is a tangential root", a.kind.name()));
        }
    }

    let needed = entry.as_ref().map_or(0.0, |a| a.duration) + leaving.as_ref().map_or(0.0, |a| a.duration);
    log::debug!("saddle x = {}: T_e + T_l = {needed}", saddle.location.x);
    if needed > bc.horizon && !stretch {
        return Ok(Candidate::TooShort(needed));
    }
    let horizon = bc.horizon.max(needed);

    // other equilibria inside the bounding box of the arcs
    let pts = entry.iter().chain(&leaving).flat_map(|a| a.trajectory.samples().iter().map(|s| s.1));
    let (mut lo, mut hi) = (saddle.location, saddle.location);
    for p in pts {
        lo = PhaseState::new(lo.x.min(p.x), lo.u.min(p.u));
        hi = PhaseState::new(hi.x.max(p.x), hi.u.max(p.u));
    }
    for e in others {
        let q = e.location;
        if q != saddle.location && q.x > lo.x && q.x < hi.x && q.u >= lo.u && q.u <= hi.u {
            warnings.push(format!("{} equilibrium at x = {} lies within the bounding box of the arcs", e.kind, q.x));
        }
    }

    let t_l = leaving.as_ref().map_or(0.0, |a| a.duration);
    let leaving = leaving.map(|a| a.with_offset(horizon - t_l));
    Ok(Candidate::Ok(Box::new(TurnpikeApproximation {
        saddle: saddle.clone(),
        entry,
        leaving,
        horizon,
        case,
        warnings,
    })))
}

/// Builds one approximation per saddle reachable from the boundary data.
///
/// With a fixed start, a saddle qualifies only if an entry arc reaches it
/// from `x0` without crossing `F_u = 0`; a fixed end likewise requires a
/// leaving arc. A free end without a transversal point keeps the saddle up
/// to `T`. Every qualifying saddle yields an approximation; none is
/// preferred over another.
pub fn plan(
    field: &EulerField,
    equilibria: &[Equilibrium],
    bc: &BoundaryConditions,
    opts: &ArcOptions,
) -> Result<Vec<TurnpikeApproximation>> {
    plan_impl(field, equilibria, bc, opts, false)
}

/// Like [`plan`], but a horizon shorter than `T_e + T_l` is stretched to
/// fit instead of refused. Useful when only the arcs are wanted.
pub fn plan_arcs(
    field: &EulerField,
    equilibria: &[Equilibrium],
    bc: &BoundaryConditions,
    opts: &ArcOptions,
) -> Result<Vec<TurnpikeApproximation>> {
    plan_impl(field, equilibria, bc, opts, true)
}

fn plan_impl(
    field: &EulerField,
    equilibria: &[Equilibrium],
    bc: &BoundaryConditions,
    opts: &ArcOptions,
    stretch: bool,
) -> Result<Vec<TurnpikeApproximation>> {
    if !(bc.horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", bc.horizon)));
    }
    let saddles: Vec<&Equilibrium> = equilibria.iter().filter(|e| e.is_saddle()).collect();
    let results = par::map(opts.exec, &saddles, |s| plan_one(field, s, equilibria, bc, opts, stretch));
    let mut out = Vec::new();
    let mut shortest_need: Option<f64> = None;
    for r in results {
        match r? {
            Candidate::Ok(a) => out.push(*a),
            Candidate::TooShort(n) => shortest_need = Some(shortest_need.map_or(n, |m: f64| m.min(n))),
            Candidate::Rejected => {}
        }
    }
    if out.is_empty() {
        return Err(match shortest_need {
            Some(needed) => Error::HorizonTooShort { horizon: bc.horizon, needed },
            None => Error::NoReachableSaddle,
        });
    }
    if out.len() > 1 {
        let n = out.len();
        for a in &mut out {
            a.warnings.push(format!("{n} saddles qualify as turnpikes; optimality among them is not decided"));
        }
    }
    Ok(out)
}

/// Rebuilds the arcs of `approx` with the stop radius for which
/// `T_e + T_l = horizon`.
///
/// Arc durations fall monotonically as the radius grows, so the radius is
/// bisected on a log scale between the current stop radius and just inside
/// the nearest boundary point.
pub fn fit_stop_radius(
    field: &EulerField,
    approx: &TurnpikeApproximation,
    horizon: f64,
    opts: &ArcOptions,
) -> Result<TurnpikeApproximation> {
    let xp = approx.saddle.location.x;
    let arcs: Vec<&Arc> = approx.entry.iter().chain(&approx.leaving).collect();
    if arcs.is_empty() {
        return Err(Error::InvalidArgument("approximation has no arcs".into()));
    }
    let reach = arcs.iter().map(|a| (a.endpoint.point.x - xp).abs()).fold(f64::INFINITY, f64::min);
    let build = |r: f64| -> Result<(Option<Arc>, Option<Arc>)> {
        let mk = |a: &Option<Arc>| -> Result<Option<Arc>> {
            a.as_ref().map(|a| arcs::build_arc(field, &a.saddle, a.kind, a.endpoint, r, opts)).transpose()
        };
        Ok((mk(&approx.entry)?, mk(&approx.leaving)?))
    };
    let total = |p: &(Option<Arc>, Option<Arc>)| p.0.as_ref().map_or(0.0, |a| a.duration) + p.1.as_ref().map_or(0.0, |a| a.duration);

    let r0 = arcs.iter().map(|a| a.stop_radius).fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (r0.ln(), (0.999 * reach).ln());
    let at_hi = build(hi.exp())?;
    if total(&at_hi) > horizon {
        return Err(Error::HorizonTooShort { horizon, needed: total(&at_hi) });
    }
    let at_lo = build(lo.exp())?;
    if total(&at_lo) < horizon {
        return Err(Error::NotConverged(format!(
            "horizon {horizon} exceeds the arc durations at stop radius {r0} ({})",
            total(&at_lo)
        )));
    }
    let mut best = at_lo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let p = build(mid.exp())?;
        let d = total(&p) - horizon;
        best = p;
        if d.abs() <= 1e-10 * horizon || hi - lo <= 1e-15 {
            break;
        }
        if d > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (entry, leaving) = best;
    let t_l = leaving.as_ref().map_or(0.0, |a| a.duration);
    Ok(TurnpikeApproximation {
        saddle: approx.saddle.clone(),
        entry,
        leaving: leaving.map(|a| a.with_offset(horizon - t_l)),
        horizon,
        case: approx.case,
        warnings: approx.warnings.clone(),
    })
}

/// `F_x - d/dt F_u` along `curve` at `n` uniformly spaced times, using the
/// curve's own velocity for the time derivatives.
pub fn euler_residual<C: Curve + ?Sized>(field: &EulerField, curve: &C, n: usize) -> Result<Vec<(f64, f64)>> {
    let (a, b) = curve.domain();
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let t = if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 };
            let s = curve.state(t)?;
            let v = curve.velocity(t)?;
            let j = field.jet(s)?;
            Ok((t, j.dx - j.dxu * v.x - j.duu * v.u))
        })
        .collect()
}
