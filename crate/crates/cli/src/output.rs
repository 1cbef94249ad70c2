//! Bit-stable serialization and all-or-nothing file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};
use serde_json::{Number, Value};
use turnpike::PhaseState;

use crate::error::{CliError, CliResult};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// A JSON number printed with [`fmt17`]; non-finite values become `null`.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::Number(fmt17(v).parse::<Number>().expect("formatted float is a JSON number"))
    } else {
        Value::Null
    }
}

pub fn nums(vs: &[f64]) -> Value {
    Value::Array(vs.iter().map(|&v| num(v)).collect())
}

pub fn state(s: PhaseState) -> Value {
    nums(&[s.x, s.u])
}

/// Serializes an `f64` field through [`num`].
#[derive(Debug, Clone, Copy)]
pub struct F17(pub f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        num(self.0).serialize(s)
    }
}

pub fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(&'static str),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Num(v) => fmt17(*v),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => (*s).to_owned(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => num(*v),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::from(*s),
        }
    }
}

/// Rows with named columns and a metadata object.
///
/// As CSV the metadata is a single `# {json}` line above the header.
#[derive(Debug, Clone)]
pub struct Table {
    pub metadata: Value,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(metadata: Value, columns: &[&'static str]) -> Self {
        Table { metadata, columns: columns.to_vec(), rows: Vec::new() }
    }

    /// `t, x, u` rows from samples.
    pub fn trajectory(metadata: Value, samples: &[(f64, PhaseState)]) -> Self {
        let mut t = Table::new(metadata, &["t", "x", "u"]);
        t.rows = samples.iter().map(|&(t, s)| vec![Cell::Num(t), Cell::Num(s.x), Cell::Num(s.u)]).collect();
        t
    }

    pub fn render(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Csv => {
                let mut out = Vec::new();
                writeln!(out, "# {}", serde_json::to_string(&self.metadata).expect("JSON values serialize")).unwrap();
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.columns).expect("in-memory write");
                for r in &self.rows {
                    w.write_record(r.iter().map(Cell::text)).expect("in-memory write");
                }
                w.into_inner().expect("in-memory write")
            }
            Format::Json => {
                let rows: Vec<Value> = self.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
                let v = serde_json::json!({ "metadata": self.metadata, "columns": self.columns, "rows": rows });
                to_json(&v).into_bytes()
            }
        }
    }
}

/// Reads `t, x, u` samples from a CSV or JSON table written by [`Table::render`].
pub fn read_trajectory(path: &Path) -> CliResult<Vec<(f64, PhaseState)>> {
    let err = |m: String| CliError::input(format!("{}: {m}", path.display()));
    let bytes = std::fs::read(path).map_err(|e| err(e.to_string()))?;
    let (columns, rows): (Vec<String>, Vec<Vec<f64>>) = if path.extension().is_some_and(|e| e == "json") {
        #[derive(serde::Deserialize)]
        struct Doc {
            columns: Vec<String>,
            rows: Vec<Vec<Value>>,
        }
        let doc: Doc = serde_json::from_slice(&bytes).map_err(|e| err(e.to_string()))?;
        let rows = doc.rows.iter().map(|r| r.iter().map(|c| c.as_f64().unwrap_or(f64::NAN)).collect()).collect();
        (doc.columns, rows)
    } else {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes.as_slice());
        let columns = rd.headers().map_err(|e| err(e.to_string()))?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            rows.push(rec.iter().map(|c| c.trim().parse::<f64>().unwrap_or(f64::NAN)).collect());
        }
        (columns, rows)
    };
    let col = |name: &str| columns.iter().position(|c| c == name).ok_or_else(|| err(format!("missing column '{name}'")));
    let (it, ix, iu) = (col("t")?, col("x")?, col("u")?);
    rows.iter()
        .enumerate()
        .map(|(k, r)| {
            let get = |i: usize| r.get(i).copied().filter(|v| v.is_finite());
            match (get(it), get(ix), get(iu)) {
                (Some(t), Some(x), Some(u)) => Ok((t, PhaseState::new(x, u))),
                _ => Err(err(format!("row {} has a missing or non-numeric t, x or u", k + 1))),
            }
        })
        .collect()
}

/// Files produced by one command, written together or not at all.
#[derive(Debug, Clone, Default)]
pub struct Bundle {
    pub files: Vec<(String, Vec<u8>)>,
    /// Names this command owns but did not produce this time; stale copies
    /// are removed.
    pub absent: Vec<String>,
}

impl Bundle {
    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_slice())
    }

    /// Stages every file in `dir` before moving any into place.
    pub fn write(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        let io = |e: std::io::Error| CliError::input(format!("{}: {e}", dir.display()));
        if self.files.is_empty() && self.absent.is_empty() {
            return Ok(Vec::new());
        }
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut staged = Vec::new();
        for (name, bytes) in &self.files {
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
            tmp.write_all(bytes).map_err(io)?;
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::new();
        for (tmp, path) in staged {
            tmp.persist(&path).map_err(|e| io(e.error))?;
            written.push(path);
        }
        for name in &self.absent {
            let p = dir.join(name);
            if p.exists() {
                std::fs::remove_file(&p).map_err(io)?;
            }
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = fmt17(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert_eq!(digits, 17, "{s}");
        }
        assert_eq!(num(f64::NAN), Value::Null);
        assert_eq!(serde_json::to_string(&num(0.5)).unwrap(), "5.0000000000000000e-1");
    }

    #[test]
    fn csv_and_json_tables_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![(0.0, PhaseState::new(1.0, -1.0)), (0.5, PhaseState::new(0.6065306597126334, -0.6065306597126334))];
        let t = Table::trajectory(serde_json::json!({"kind": "test"}), &samples);
        for f in [Format::Csv, Format::Json] {
            let p = dir.path().join(format!("a.{}", f.ext()));
            std::fs::write(&p, t.render(f)).unwrap();
            assert_eq!(read_trajectory(&p).unwrap(), samples);
        }
        let csv = String::from_utf8(t.render(Format::Csv)).unwrap();
        assert!(csv.starts_with("# {\"kind\":\"test\"}\nt,x,u\n"), "{csv}");
    }

    #[test]
    fn bundle_replaces_and_removes() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("old.csv"), "stale").unwrap();
        let mut b = Bundle::default();
        b.add("new.csv", "fresh");
        b.absent.push("old.csv".into());
        b.write(dir.path()).unwrap();
        assert!(!dir.path().join("old.csv").exists());
        assert_eq!(std::fs::read_to_string(dir.path().join("new.csv")).unwrap(), "fresh");
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(names.len(), 1);
    }
}
