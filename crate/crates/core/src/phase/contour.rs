use std::collections::HashMap;

use super::field::EulerField;
use crate::odeint::PhaseState;
use crate::par::{self, Exec};
use crate::problem::Window;

/// Which implicit curve to trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveSet {
    /// `C(x, u) = c`.
    LevelSet(f64),
    /// `F_u(x, u) = 0`.
    Transversality,
}

/// Grid resolution in cells along `x` and `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContourGrid {
    pub nx: usize,
    pub ny: usize,
}

impl Default for ContourGrid {
    fn default() -> Self {
        ContourGrid { nx: 300, ny: 300 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<PhaseState>,
    pub closed: bool,
}

impl Polyline {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].dist(w[1])).sum()
    }
}

// Edge between grid nodes: horizontal from (i, j) to (i+1, j) or vertical
// from (i, j) to (i, j+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Traces the zero set of `C - c` or `F_u` inside `window` by marching
/// squares and links the cell segments into polylines.
///
/// Nodes where the integrand cannot be evaluated are treated as holes.
pub fn trace_curve(field: &EulerField, which: CurveSet, window: Window, grid: ContourGrid, exec: Exec) -> Vec<Polyline> {
    let (nx, ny) = (grid.nx.max(1), grid.ny.max(1));
    let xs: Vec<f64> = (0..=nx).map(|i| window.x.lo + window.x.width() * i as f64 / nx as f64).collect();
    let us: Vec<f64> = (0..=ny).map(|j| window.u.lo + window.u.width() * j as f64 / ny as f64).collect();
    let value = |x: f64, u: f64| -> f64 {
        let s = PhaseState::new(x, u);
        let v = match which {
            CurveSet::LevelSet(c) => field.hamiltonian(s).map(|h| h - c),
            CurveSet::Transversality => field.transversality(s),
        };
        v.ok().filter(|v| v.is_finite()).unwrap_or(f64::NAN)
    };
    let rows: Vec<Vec<f64>> = par::map(exec, &us, |&u| xs.iter().map(|&x| value(x, u)).collect());
    let v = |i: usize, j: usize| rows[j][i];

    let point = |e: Edge| -> PhaseState {
        let ((i0, j0), (i1, j1)) = match e {
            Edge::H(i, j) => ((i, j), (i + 1, j)),
            Edge::V(i, j) => ((i, j), (i, j + 1)),
        };
        let (a, b) = (v(i0, j0), v(i1, j1));
        let t = if a == b { 0.5 } else { a / (a - b) };
        PhaseState::new(xs[i0] + t * (xs[i1] - xs[i0]), us[j0] + t * (us[j1] - us[j0]))
    };

    let cells: Vec<Vec<(Edge, Edge)>> = par::map_range(exec, ny, |j| {
        let mut out = Vec::new();
        for i in 0..nx {
            let c = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
            if c.iter().any(|x| x.is_nan()) {
                continue;
            }
            let inside = c.map(|x| x > 0.0);
            // bottom, right, top, left with their corner pairs
            let edges = [(Edge::H(i, j), 0, 1), (Edge::V(i + 1, j), 1, 2), (Edge::H(i, j + 1), 3, 2), (Edge::V(i, j), 0, 3)];
            let crossed: Vec<Edge> = edges.iter().filter(|(_, a, b)| inside[*a] != inside[*b]).map(|e| e.0).collect();
            match crossed.len() {
                2 => out.push((crossed[0], crossed[1])),
                4 => {
                    let centre = 0.25 * c.iter().sum::<f64>() > 0.0;
                    let [b, r, t, l] = [edges[0].0, edges[1].0, edges[2].0, edges[3].0];
                    if centre == inside[0] {
                        out.push((b, r));
                        out.push((t, l));
                    } else {
                        out.push((b, l));
                        out.push((r, t));
                    }
                }
                _ => {}
            }
        }
        out
    });
    let segments: Vec<(Edge, Edge)> = cells.into_iter().flatten().collect();
    link(&segments).into_iter().map(|(edges, closed)| Polyline { points: edges.into_iter().map(point).collect(), closed }).collect()
}

fn link(segments: &[(Edge, Edge)]) -> Vec<(Vec<Edge>, bool)> {
    let mut at: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segments.iter().enumerate() {
        at.entry(a).or_default().push(k);
        at.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let next = |edge: Edge, used: &[bool]| -> Option<usize> { at[&edge].iter().copied().find(|&k| !used[k]) };
    let other = |k: usize, e: Edge| if segments[k].0 == e { segments[k].1 } else { segments[k].0 };

    let mut lines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut fwd = vec![a, b];
        let mut tail = b;
        while let Some(k) = next(tail, &used) {
            used[k] = true;
            tail = other(k, tail);
            fwd.push(tail);
        }
        let closed = tail == a && fwd.len() > 2;
        if !closed {
            let mut back = Vec::new();
            let mut head = a;
            while let Some(k) = next(head, &used) {
                used[k] = true;
                head = other(k, head);
                back.push(head);
            }
            back.reverse();
            back.extend(fwd);
            fwd = back;
        }
        lines.push((fwd, closed));
    }
    lines
}
