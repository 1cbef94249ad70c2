//! The JSON problem file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;
use turnpike::{BoundaryConditions, Endpoint, Interval, ProblemSpec, SolverOptions, Window};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u64 = 1;

/// JSON schema describing [`ProblemFile`].
pub const SCHEMA: &str = include_str!("../schema/problem.schema.json");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: u64,
    pub name: String,
    #[serde(rename = "F")]
    pub f: String,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    pub x_window: [f64; 2],
    pub u_window: [f64; 2],
    pub bc: BcFile,
    #[serde(default)]
    pub options: OptionsFile,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcFile {
    pub x0: EndpointValue,
    #[serde(rename = "xT")]
    pub x_t: EndpointValue,
    #[serde(rename = "T")]
    pub horizon: f64,
}

/// A number or the string `"free"`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "Value")]
pub struct EndpointValue(pub Endpoint);

impl TryFrom<Value> for EndpointValue {
    type Error = String;

    fn try_from(v: Value) -> Result<Self, String> {
        match &v {
            Value::Number(n) => n.as_f64().map(|x| EndpointValue(Endpoint::Fixed(x))).ok_or_else(|| format!("{n} is not a finite number")),
            Value::String(s) if s == "free" => Ok(EndpointValue(Endpoint::Free)),
            _ => Err(format!("expected a number or \"free\", found {v}")),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsFile {
    pub tol: Option<f64>,
    pub stop_radius: Option<f64>,
    pub guard_floor: Option<f64>,
    pub scan_points: Option<usize>,
}

impl ProblemFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let pf: ProblemFile = serde_json::from_str(text).map_err(|e| CliError::input(format!("problem file: {e}")))?;
        if pf.schema_version != SCHEMA_VERSION {
            return Err(CliError::input(format!(
                "problem file: unsupported schema_version {} (expected {SCHEMA_VERSION})",
                pf.schema_version
            )));
        }
        Ok(pf)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    /// Builds the validated problem. Every failure here is an input error.
    pub fn to_spec(&self) -> CliResult<ProblemSpec> {
        let d = SolverOptions::default();
        let o = &self.options;
        let options = SolverOptions {
            tol: o.tol.unwrap_or(d.tol),
            stop_radius: o.stop_radius.unwrap_or(d.stop_radius),
            guard_floor: o.guard_floor.unwrap_or(d.guard_floor),
            scan_points: o.scan_points.unwrap_or(d.scan_points),
        };
        check_positive("options.tol", options.tol)?;
        check_positive("options.stop_radius", options.stop_radius)?;
        if !(options.guard_floor >= 0.0 && options.guard_floor.is_finite()) {
            return Err(CliError::input("options.guard_floor must be a finite non-negative number"));
        }
        let bc = BoundaryConditions { x0: self.bc.x0.0, x_t: self.bc.x_t.0, horizon: self.bc.horizon };
        for (name, e) in [("bc.x0", bc.x0), ("bc.xT", bc.x_t)] {
            if let Endpoint::Fixed(v) = e {
                if !v.is_finite() {
                    return Err(CliError::input(format!("{name} must be finite")));
                }
            }
        }
        let window = Window::new(
            Interval::new(self.x_window[0], self.x_window[1]),
            Interval::new(self.u_window[0], self.u_window[1]),
        );
        ProblemSpec::new(self.name.clone(), &self.f, self.constants.clone(), window, bc, options)
            .map_err(|e| CliError::input(format!("problem '{}': {e}", self.name)))
    }
}

pub fn check_positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::input(format!("{name} must be a finite positive number, got {v}")))
    }
}
