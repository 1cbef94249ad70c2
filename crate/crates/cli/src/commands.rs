//! Subcommand implementations. Each returns its report and files in memory;
//! nothing touches the disk until the whole command has succeeded.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use turnpike::arcs::{self, Arc, ArcOptions, Constraint, Separatrix};
use turnpike::phase::{find_equilibria, trace_curve, ContourGrid, CurveSet};
use turnpike::planner::{self, euler_residual, TurnpikeApproximation};
use turnpike::shooting::{self, Alignment, SampledCurve, ShootOptions};
use turnpike::{build_field, Curve, Endpoint, Equilibrium, EulerField, Exec, PhaseState, ProblemSpec};

use crate::error::{CliError, CliResult};
use crate::output::{fmt17, num, nums, read_trajectory, state, to_json, Bundle, Cell, Format, Table};
use crate::problem_file::{check_positive, ProblemFile, SCHEMA_VERSION};

/// What a command produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub stdout: String,
    pub bundle: Bundle,
    pub out_dir: Option<PathBuf>,
    /// 0, or 1 when a tolerance check failed.
    pub code: u8,
}

/// Settings shared by the problem-driven commands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub stop_radius: Option<f64>,
    pub seed_window: Option<f64>,
}

/// A validated problem with its field and equilibria.
pub struct Context {
    pub problem: ProblemSpec,
    pub field: EulerField,
    pub equilibria: Vec<Equilibrium>,
    pub arc_opts: ArcOptions,
}

impl Context {
    pub fn load(path: &Path, ov: &Overrides) -> CliResult<Self> {
        let pf = ProblemFile::load(path)?;
        Self::from_file(&pf, ov)
    }

    pub fn from_file(pf: &ProblemFile, ov: &Overrides) -> CliResult<Self> {
        let mut problem = pf.to_spec()?;
        if let Some(t) = ov.tol {
            check_positive("--tol", t)?;
            problem.options.tol = t;
        }
        if let Some(r) = ov.stop_radius {
            check_positive("--stop-radius", r)?;
            problem.options.stop_radius = r;
        }
        let field = build_field(&problem).map_err(|e| CliError::input(e.to_string()))?;
        let mut arc_opts = ArcOptions::from_problem(&problem);
        if let Some(w) = ov.seed_window {
            check_positive("--seed-window", w)?;
            arc_opts.u_span = w;
        }
        let equilibria = find_equilibria(&field, problem.window.x, problem.options.scan_points, Exec::default());
        log::info!("{}: {} equilibria", problem.name, equilibria.len());
        Ok(Context { problem, field, equilibria, arc_opts })
    }

    fn header(&self, command: &str) -> Value {
        json!({
            "command": command,
            "problem": self.problem.name,
            "schema_version": SCHEMA_VERSION,
            "version": env!("CARGO_PKG_VERSION"),
        })
    }
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

/// `base.ext`, or `base-k.ext` (1-based) when there are several.
fn numbered(base: &str, k: usize, n: usize, ext: &str) -> String {
    if n == 1 {
        format!("{base}.{ext}")
    } else {
        format!("{base}-{}.{ext}", k + 1)
    }
}

pub fn equilibrium_json(e: &Equilibrium) -> Value {
    json!({
        "x": num(e.location.x),
        "u": num(e.location.u),
        "kind": e.kind.name(),
        "eigenvalues": e.eigenvalues.iter().map(|l| json!({ "re": num(l.re), "im": num(l.im) })).collect::<Vec<_>>(),
        "eigenvectors": e.eigenvectors.map(|v| vec![state(v[0]), state(v[1])]),
        "jacobian": [nums(&e.jacobian[0]), nums(&e.jacobian[1])],
        "c_value": num(e.c_value),
    })
}

fn max_abs_residual<C: Curve + ?Sized>(field: &EulerField, c: &C) -> CliResult<f64> {
    Ok(euler_residual(field, c, 2001)?.iter().fold(0.0, |m, r| m.max(r.1.abs())))
}

fn arc_json(field: &EulerField, a: &Arc) -> CliResult<Value> {
    let e = &a.endpoint;
    let constraint = match e.constraint {
        Constraint::FixedX(_) => "fixed_x",
        Constraint::Transversality => "transversality",
    };
    Ok(json!({
        "kind": a.kind.name(),
        "x": num(e.point.x),
        "u": num(e.point.u),
        "constraint": constraint,
        "residuals": nums(&e.residuals),
        "branch": a.branch(),
        "side": e.side.name(),
        "manifold_side": e.manifold_side.name(),
        "degenerate": e.degenerate,
        "duration": num(a.duration),
        "stop_radius": num(a.stop_radius),
        "start_time": num(a.time_offset),
        "saddle_end": state(a.saddle_end()),
        "euler_residual_max": num(max_abs_residual(field, a)?),
    }))
}

fn plan_json(field: &EulerField, p: &TurnpikeApproximation) -> CliResult<Value> {
    let (j0, j1) = p.splice_jumps();
    Ok(json!({
        "saddle": equilibrium_json(&p.saddle),
        "case": p.case.label(),
        "horizon": num(p.horizon),
        "t_entry": num(p.t_entry()),
        "t_leave": num(p.t_leave()),
        "plateau": nums(&[p.plateau().0, p.plateau().1]),
        "splice_jumps": nums(&[j0, j1]),
        "entry": p.entry.as_ref().map(|a| arc_json(field, a)).transpose()?,
        "leaving": p.leaving.as_ref().map(|a| arc_json(field, a)).transpose()?,
        "warnings": p.warnings,
    }))
}

fn log_warnings(plans: &[TurnpikeApproximation]) {
    for p in plans {
        for w in &p.warnings {
            log::warn!("saddle x = {:.6}: {w}", p.saddle.location.x);
        }
    }
}

pub fn analyze(ctx: &Context, out_dir: Option<&Path>) -> CliResult<Outcome> {
    let report = merge(
        ctx.header("analyze"),
        json!({
            "equilibria": ctx.equilibria.iter().map(equilibrium_json).collect::<Vec<_>>(),
            "saddles": ctx.equilibria.iter().filter(|e| e.is_saddle()).count(),
        }),
    );
    let text = to_json(&report);
    let mut bundle = Bundle::default();
    if out_dir.is_some() {
        bundle.add("analysis.json", text.clone());
    }
    Ok(Outcome { stdout: text, bundle, out_dir: out_dir.map(Path::to_path_buf), code: 0 })
}

/// Entry arc from `t = 0`, leaving arc from the saddle end at `t = 0`.
pub fn arcs(ctx: &Context, format: Format, out_dir: &Path) -> CliResult<Outcome> {
    let plans = planner::plan_arcs(&ctx.field, &ctx.equilibria, &ctx.problem.bc, &ctx.arc_opts)?;
    log_warnings(&plans);
    let n = plans.len();
    let ext = format.ext();
    let mut bundle = Bundle::default();
    let mut entries = Vec::new();
    for (k, p) in plans.iter().enumerate() {
        let mut files = serde_json::Map::new();
        for (base, arc) in [("entry", &p.entry), ("leaving", &p.leaving)] {
            let name = numbered(base, k, n, ext);
            match arc {
                Some(a) => {
                    let samples: Vec<_> = a.samples().into_iter().map(|(t, s)| (t - a.time_offset, s)).collect();
                    let meta = merge(
                        ctx.header("arcs"),
                        json!({ "arc": base, "saddle_x": num(p.saddle.location.x), "duration": num(a.duration) }),
                    );
                    bundle.add(name.clone(), Table::trajectory(meta, &samples).render(format));
                    files.insert(base.to_owned(), Value::from(name));
                }
                None => bundle.absent.push(name),
            }
        }
        entries.push(merge(plan_json(&ctx.field, p)?, json!({ "files": files })));
    }
    let report = merge(ctx.header("arcs"), json!({ "plans": entries }));
    bundle.add("endpoints.json", to_json(&report));
    Ok(Outcome { stdout: String::new(), bundle, out_dir: Some(out_dir.to_path_buf()), code: 0 })
}

fn default_samples(horizon: f64) -> usize {
    ((10.0 * horizon).round() as usize + 1).max(2)
}

pub struct ApproxArgs {
    pub samples: Option<usize>,
    pub fit_horizon: bool,
    pub plot_script: bool,
}

pub fn approx(ctx: &Context, args: &ApproxArgs, format: Format, out_dir: &Path) -> CliResult<Outcome> {
    let (field, bc, opts) = (&ctx.field, &ctx.problem.bc, &ctx.arc_opts);
    let plans = if args.fit_horizon {
        planner::plan_arcs(field, &ctx.equilibria, bc, opts)?
            .into_iter()
            .map(|p| {
                if p.t_entry() + p.t_leave() > bc.horizon {
                    planner::fit_stop_radius(field, &p, bc.horizon, opts)
                } else {
                    Ok(p)
                }
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        planner::plan(field, &ctx.equilibria, bc, opts).map_err(|e| match e {
            turnpike::Error::HorizonTooShort { .. } => CliError::Numerical(format!("{e} (see --fit-horizon)")),
            e => e.into(),
        })?
    };
    log_warnings(&plans);
    let n_samples = args.samples.unwrap_or_else(|| default_samples(bc.horizon));
    let n = plans.len();
    let mut bundle = Bundle::default();
    let mut entries = Vec::new();
    for (k, p) in plans.iter().enumerate() {
        let name = numbered("approx", k, n, format.ext());
        let meta = merge(ctx.header("approx"), json!({ "saddle_x": num(p.saddle.location.x), "horizon": num(p.horizon) }));
        let mut table = Table::new(meta, &["t", "x", "u", "piece"]);
        for (t, s, piece) in p.sample(n_samples)? {
            table.rows.push(vec![Cell::Num(t), Cell::Num(s.x), Cell::Num(s.u), Cell::Text(piece.name())]);
        }
        bundle.add(name.clone(), table.render(format));
        entries.push(merge(plan_json(field, p)?, json!({ "file": name, "samples": n_samples })));
        if args.plot_script {
            bundle.add(numbered("approx", k, n, "gp"), time_series_script(&name, p.horizon));
        }
    }
    let report = merge(ctx.header("approx"), json!({ "plans": entries }));
    bundle.add("approx.json", to_json(&report));
    Ok(Outcome { stdout: String::new(), bundle, out_dir: Some(out_dir.to_path_buf()), code: 0 })
}

pub struct ShootArgs {
    pub samples: Option<usize>,
    pub guess_u: Option<f64>,
    pub guess_x: Option<f64>,
}

pub fn shoot(ctx: &Context, args: &ShootArgs, tol: Option<f64>, format: Format, out_dir: &Path) -> CliResult<Outcome> {
    let (field, bc) = (&ctx.field, &ctx.problem.bc);
    // The planned arcs supply both the initial guess and the growth rate
    // for the conditioning guard.
    let plan = planner::plan_arcs(field, &ctx.equilibria, bc, &ctx.arc_opts).ok().and_then(|v| v.into_iter().next());
    let mut guess = match &plan {
        Some(p) => p.entry.as_ref().map_or(PhaseState::new(p.saddle.location.x, 0.0), |a| a.endpoint.point),
        None => PhaseState::new(bc.x0.fixed().unwrap_or(0.5 * (ctx.problem.window.x.lo + ctx.problem.window.x.hi)), 0.0),
    };
    if let Endpoint::Fixed(x0) = bc.x0 {
        guess.x = x0;
    }
    if let Some(u) = args.guess_u {
        guess.u = u;
    }
    if let Some(x) = args.guess_x {
        guess.x = x;
    }
    let growth_rate = match &plan {
        Some(p) => p.saddle.unstable_rate(),
        None => ctx.equilibria.iter().filter_map(Equilibrium::unstable_rate).reduce(f64::max),
    };
    let mut opts = ShootOptions { growth_rate, ..ShootOptions::default() };
    if let Some(t) = tol {
        opts.tol = t;
    }
    log::info!("shooting from ({}, {}) over T = {}", guess.x, guess.u, bc.horizon);
    let r = shooting::shoot(field, bc, guess, &opts)?;
    let n = args.samples.unwrap_or_else(|| default_samples(bc.horizon)).max(2);
    let samples: Vec<_> = (0..n)
        .map(|i| {
            let t = if i + 1 == n { bc.horizon } else { bc.horizon * i as f64 / (n - 1) as f64 };
            Ok((t, r.trajectory.eval(t)?))
        })
        .collect::<Result<_, turnpike::Error>>()?;
    let name = format!("shoot.{}", format.ext());
    let meta = merge(ctx.header("shoot"), json!({ "horizon": num(bc.horizon) }));
    let mut bundle = Bundle::default();
    bundle.add(name.clone(), Table::trajectory(meta, &samples).render(format));
    let report = merge(
        ctx.header("shoot"),
        json!({
            "file": name,
            "horizon": num(bc.horizon),
            "x0": num(r.x0),
            "u0": num(r.u0),
            "residual_norm": num(r.residual_norm),
            "iterations": r.iterations,
            "bracket_width": num(r.bracket_width),
            "growth_rate": growth_rate.map(num),
            "conditioning_limit": num(opts.conditioning_limit()),
            "euler_residual_max": num(max_abs_residual(field, &r.trajectory)?),
            "samples": n,
        }),
    );
    bundle.add("shoot.json", to_json(&report));
    Ok(Outcome { stdout: String::new(), bundle, out_dir: Some(out_dir.to_path_buf()), code: 0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Component {
    X,
    U,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Align {
    Start,
    End,
}

pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    pub tol: Option<f64>,
    pub component: Component,
    pub align: Align,
    pub samples: usize,
}

pub fn compare(args: &CompareArgs) -> CliResult<Outcome> {
    if let Some(t) = args.tol {
        if !(t >= 0.0) {
            return Err(CliError::input(format!("--tol must be non-negative, got {t}")));
        }
    }
    let load = |p: &Path| -> CliResult<SampledCurve> {
        SampledCurve::new(read_trajectory(p)?).map_err(|e| CliError::input(format!("{}: {e}", p.display())))
    };
    let (a, b) = (load(&args.a)?, load(&args.b)?);
    let alignment = match args.align {
        Align::Start => Alignment::Start,
        Align::End => Alignment::End,
    };
    let m = shooting::compare(&a, &b, args.samples, alignment).map_err(|e| match e {
        turnpike::Error::EmptyOverlap => CliError::input("the two trajectories share no time span"),
        e => e.into(),
    })?;
    let metric = match args.component {
        Component::X => m.sup_x,
        Component::U => m.sup_u,
        Component::Both => m.max(),
    };
    let pass = args.tol.is_none_or(|t| metric <= t);
    let report = json!({
        "command": "compare",
        "a": args.a.display().to_string(),
        "b": args.b.display().to_string(),
        "alignment": format!("{:?}", args.align).to_lowercase(),
        "component": format!("{:?}", args.component).to_lowercase(),
        "span": nums(&[m.span.0, m.span.1]),
        "samples": m.samples,
        "sup_x": num(m.sup_x),
        "sup_u": num(m.sup_u),
        "l2_x": num(m.l2_x),
        "l2_u": num(m.l2_u),
        "metric": num(metric),
        "tol": args.tol.map(num),
        "pass": pass,
    });
    Ok(Outcome { stdout: to_json(&report), bundle: Bundle::default(), out_dir: None, code: if pass { 0 } else { 1 } })
}

pub struct ContoursArgs {
    pub grid: usize,
    pub levels: Vec<f64>,
    pub plot_script: bool,
}

pub fn contours(ctx: &Context, args: &ContoursArgs, format: Format, out_dir: &Path) -> CliResult<Outcome> {
    let (field, window) = (&ctx.field, ctx.problem.window);
    let grid = ContourGrid { nx: args.grid.max(4), ny: args.grid.max(4) };
    let saddles: Vec<&Equilibrium> = ctx.equilibria.iter().filter(|e| e.is_saddle()).collect();

    let mut sets: Vec<(CurveSet, Value)> = saddles
        .iter()
        .map(|s| (CurveSet::LevelSet(s.c_value), json!({ "kind": "level_set", "level": num(s.c_value), "saddle_x": num(s.x()) })))
        .collect();
    sets.extend(args.levels.iter().map(|&c| (CurveSet::LevelSet(c), json!({ "kind": "level_set", "level": num(c) }))));
    sets.push((CurveSet::Transversality, json!({ "kind": "transversality" })));

    let mut curves = Table::new(Value::Null, &["curve_id", "x", "u"]);
    let mut index = Vec::new();
    for (set, info) in &sets {
        for line in trace_curve(field, *set, window, grid, Exec::default()) {
            let id = index.len();
            index.push(merge(info.clone(), json!({ "id": id, "closed": line.closed, "points": line.points.len() })));
            curves.rows.extend(line.points.iter().map(|p| vec![Cell::Int(id), Cell::Num(p.x), Cell::Num(p.u)]));
        }
    }
    curves.metadata = merge(ctx.header("contours"), json!({ "curves": index }));

    let mut seps = Table::new(Value::Null, &["curve_id", "x", "u"]);
    let mut sep_index = Vec::new();
    for s in &saddles {
        let branches: Vec<Separatrix> = arcs::separatrices(field, s, 1e-6, &ctx.arc_opts)?;
        for b in branches {
            let id = sep_index.len();
            sep_index.push(json!({ "id": id, "saddle_x": num(s.x()), "kind": b.kind.name(), "branch": b.branch }));
            seps.rows.extend(b.trajectory.samples().iter().map(|(_, p)| vec![Cell::Int(id), Cell::Num(p.x), Cell::Num(p.u)]));
        }
    }
    let eq: Vec<Value> = ctx.equilibria.iter().map(|e| json!({ "x": num(e.x()), "u": num(e.location.u), "kind": e.kind.name() })).collect();
    seps.metadata = merge(ctx.header("contours"), json!({ "curves": sep_index, "equilibria": eq }));

    let ext = format.ext();
    let mut bundle = Bundle::default();
    bundle.add(format!("contours.{ext}"), curves.render(format));
    bundle.add(format!("separatrices.{ext}"), seps.render(format));
    if args.plot_script && format == Format::Csv {
        bundle.add("contours.gp", phase_script(ctx, index.len(), sep_index.len()));
    }
    Ok(Outcome { stdout: String::new(), bundle, out_dir: Some(out_dir.to_path_buf()), code: 0 })
}

// gnuplot: skip the metadata and header lines; NaN breaks lines between curves.
fn phase_script(ctx: &Context, n_curves: usize, n_seps: usize) -> String {
    let w = ctx.problem.window;
    let mut s = String::new();
    s += "set datafile separator ','\n";
    s += &format!("set title '{}'\n", ctx.problem.name.replace('\'', ""));
    s += "set xlabel 'x'\nset ylabel 'u'\nset key off\n";
    s += &format!("set xrange [{}:{}]\nset yrange [{}:{}]\n", w.x.lo, w.x.hi, w.u.lo, w.u.hi);
    let mut layers = Vec::new();
    if n_curves > 0 {
        layers.push(format!(
            "for [i=0:{}] 'contours.csv' skip 2 using ($1==i ? $2 : NaN):3 with lines lc rgb '#808080'",
            n_curves - 1
        ));
    }
    if n_seps > 0 {
        layers.push(format!(
            "for [i=0:{}] 'separatrices.csv' skip 2 using ($1==i ? $2 : NaN):3 with lines lw 2 lc rgb '#1f4e9c'",
            n_seps - 1
        ));
    }
    layers.push("'-' using 1:2 with points pt 7 ps 1.2 lc rgb '#b22222'".to_owned());
    s += &format!("plot {}\n", layers.join(", \\\n     "));
    for e in &ctx.equilibria {
        s += &format!("{} {}\n", fmt17(e.x()), fmt17(e.location.u));
    }
    s += "e\n";
    s
}

fn time_series_script(file: &str, horizon: f64) -> String {
    format!(
        "set datafile separator ','\n\
         set key off\n\
         set xrange [0:{horizon}]\n\
         set multiplot layout 2,1\n\
         set ylabel 'x(t)'\n\
         plot '{file}' skip 2 using 1:2 with lines lw 2\n\
         set xlabel 't'\n\
         set ylabel 'u(t)'\n\
         plot '{file}' skip 2 using 1:3 with lines lw 2\n\
         unset multiplot\n"
    )
}
