use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems").join(name)
}

fn turnpike(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_turnpike")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

fn read_json(p: &Path) -> Value {
    json(&std::fs::read(p).unwrap())
}

// A copy of a bundled problem with one edit applied.
fn edited(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v = read_json(&problem(name));
    edit(&mut v);
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_vec(&v).unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

#[test]
fn analyze_shallow_lakes() {
    let o = turnpike(&["analyze", s(&problem("shallow_lakes.json"))]);
    assert_eq!(code(&o), 0);
    let r = json(&o.stdout);
    let kinds: Vec<&str> = r["equilibria"].as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["saddle", "center_or_focus", "saddle"]);
    assert_eq!(r["saddles"], 2);
}

#[test]
fn analyze_quadratic_has_one_saddle() {
    let o = turnpike(&["analyze", s(&problem("quadratic.json"))]);
    assert_eq!(code(&o), 0);
    let r = json(&o.stdout);
    let eq = r["equilibria"].as_array().unwrap();
    assert_eq!(eq.len(), 1);
    assert_eq!(eq[0]["kind"], "saddle");
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = edited(dir.path(), "shallow_lakes.json", |v| {
        v["constants"].as_object_mut().unwrap().remove("c");
    });
    let o = turnpike(&["analyze", s(&p)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("'c'"));

    let p = edited(dir.path(), "quadratic.json", |v| v["colour"] = Value::from("blue"));
    let o = turnpike(&["analyze", s(&p)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let p = edited(dir.path(), "double_well.json", |v| v["F"] = Value::from("u^^2"));
    assert_eq!(code(&turnpike(&["analyze", s(&p)])), 2);
    assert_eq!(code(&turnpike(&["analyze", "/no/such/file.json"])), 2);
    assert_eq!(code(&turnpike(&["arcs", s(&problem("quadratic.json")), "--stop-radius", "-1"])), 2);
}

#[test]
fn arcs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(code(&turnpike(&["arcs", s(&problem("shallow_lakes.json")), "--out-dir", s(d)])), 0);
    }
    for f in ["entry.csv", "leaving.csv", "endpoints.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let r = read_json(&a.join("endpoints.json"));
    let u_e = r["plans"][0]["entry"]["u"].as_f64().unwrap();
    assert!((u_e - 0.30751221580).abs() < 1e-9, "{u_e}");
}

#[test]
fn never_left_has_no_leaving_file() {
    let dir = tempfile::tempdir().unwrap();
    // a stale leaving.csv from another problem must not survive
    std::fs::write(dir.path().join("leaving.csv"), "stale").unwrap();
    let o = turnpike(&["arcs", s(&problem("shallow_lakes_never_left.json")), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("entry.csv").exists());
    assert!(!dir.path().join("leaving.csv").exists());
    let r = read_json(&dir.path().join("endpoints.json"));
    let plan = &r["plans"][0];
    assert_eq!(plan["case"], "fixed-start-never-left");
    assert!(plan["leaving"].is_null());
    assert!(plan["warnings"][0].as_str().unwrap().contains("never left"));
}

#[test]
fn quadratic_entry_rows_follow_exponential() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&turnpike(&["arcs", s(&problem("quadratic.json")), "--out-dir", s(dir.path())])), 0);
    let rows = rows(&dir.path().join("entry.csv"));
    assert!(rows.len() > 10);
    for r in rows {
        assert!((r[1] - (-r[0]).exp()).abs() < 1e-8, "{r:?}");
        assert!((r[2] + (-r[0]).exp()).abs() < 1e-8, "{r:?}");
    }
}

#[test]
fn ill_conditioned_shoot_exits_3_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = turnpike(&["shoot", s(&problem("shallow_lakes.json")), "--out-dir", s(&out)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("double-precision"));
    assert!(!out.exists());
    let o = turnpike(&["approx", s(&problem("shallow_lakes_t20.json")), "--out-dir", s(&out)]);
    assert_eq!(code(&o), 3);
    assert!(!out.exists());
}

#[test]
fn approx_plateau_for_long_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let o = turnpike(&["approx", s(&problem("shallow_lakes.json")), "--out-dir", s(dir.path()), "--plot-script"]);
    assert_eq!(code(&o), 0);
    let rows = rows(&dir.path().join("approx.csv"));
    assert_eq!(rows.len(), 631);
    let r = read_json(&dir.path().join("approx.json"));
    let plateau: Vec<f64> = r["plans"][0]["plateau"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(plateau[0] > 20.0 && plateau[1] < 45.0 && plateau[0] < plateau[1], "{plateau:?}");
    assert!(std::fs::read_to_string(dir.path().join("approx.gp")).unwrap().contains("approx.csv"));
}

#[test]
fn compare_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let t20 = problem("shallow_lakes_t20.json");
    assert_eq!(code(&turnpike(&["shoot", s(&t20), "--out-dir", s(d)])), 0);
    assert_eq!(code(&turnpike(&["approx", s(&t20), "--out-dir", s(d), "--fit-horizon"])), 0);
    let (a, b) = (d.join("shoot.csv"), d.join("approx.csv"));

    let o = turnpike(&["compare", s(&a), s(&a), "--tol", "0"]);
    assert_eq!(code(&o), 0);
    let m = json(&o.stdout);
    for k in ["sup_x", "sup_u", "l2_x", "l2_u"] {
        assert_eq!(m[k].as_f64(), Some(0.0), "{k}");
    }

    let o = turnpike(&["compare", s(&a), s(&b), "--tol", "1e-6"]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o.stdout)["pass"], false);
    let o = turnpike(&["compare", s(&a), s(&b), "--tol", "0.05"]);
    assert_eq!(code(&o), 0);
    let o = turnpike(&["compare", s(&a), s(&b)]);
    assert_eq!(code(&o), 0);
    assert!(json(&o.stdout)["tol"].is_null());
}

#[test]
fn json_and_csv_outputs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (c, j) = (dir.path().join("c"), dir.path().join("j"));
    let q = problem("quadratic.json");
    assert_eq!(code(&turnpike(&["arcs", s(&q), "--out-dir", s(&c)])), 0);
    assert_eq!(code(&turnpike(&["arcs", s(&q), "--out-dir", s(&j), "--format", "json"])), 0);
    let o = turnpike(&["compare", s(&c.join("entry.csv")), s(&j.join("entry.json")), "--tol", "0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn contours_export_polylines() {
    let dir = tempfile::tempdir().unwrap();
    let o = turnpike(&["contours", s(&problem("shallow_lakes.json")), "--out-dir", s(dir.path()), "--plot-script", "--grid", "120"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("contours.csv")).unwrap();
    let mut lines = text.lines();
    let meta: Value = serde_json::from_str(lines.next().unwrap().trim_start_matches("# ")).unwrap();
    assert_eq!(lines.next(), Some("curve_id,x,u"));
    let curves = meta["curves"].as_array().unwrap();
    assert!(curves.iter().any(|c| c["kind"] == "transversality"));
    let ids: std::collections::BTreeSet<u64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ids.len(), curves.len());
    let seps = read_sep_meta(&dir.path().join("separatrices.csv"));
    assert_eq!(seps["curves"].as_array().unwrap().len(), 8);
    assert!(dir.path().join("contours.gp").exists());
}

fn read_sep_meta(p: &Path) -> Value {
    let text = std::fs::read_to_string(p).unwrap();
    serde_json::from_str(text.lines().next().unwrap().trim_start_matches("# ")).unwrap()
}

#[test]
fn schema_command_prints_the_published_schema() {
    let o = turnpike(&["schema"]);
    assert_eq!(code(&o), 0);
    let published = std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/problem.schema.json")).unwrap();
    assert_eq!(o.stdout, published);
}

#[test]
fn bundled_problems_load() {
    for entry in std::fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("problems")).unwrap() {
        let p = entry.unwrap().path();
        let pf = turnpike_cli::ProblemFile::load(&p).unwrap();
        pf.to_spec().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}
