//! Run configuration, schema version 1.

use std::fmt;

use descent_lab::scurve::CausticOptions;
use descent_lab::{Complex64, Contour, SearchOptions, SolverOptions};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Subcommand {
    Equilibrium,
    Maximin,
    Sweep,
    Soliton,
    Wkb,
    Airy,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Equilibrium => "equilibrium",
            Subcommand::Maximin => "maximin",
            Subcommand::Sweep => "sweep",
            Subcommand::Soliton => "soliton",
            Subcommand::Wkb => "wkb",
            Subcommand::Airy => "airy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(format!(
                "unknown format `{other}` (expected json, csv or svg)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldParams {
    pub x: f64,
    pub t: f64,
    pub a: f64,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self {
            x: 0.2,
            t: 0.0,
            a: 1.0,
        }
    }
}

/// Either an explicit list or `count` evenly spaced values from `start` to
/// `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|k| start + (stop - start) * k as f64 / (*n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ContourSpec {
    TestArc {
        vertices: usize,
        eps: f64,
    },
    Arc {
        vertices: usize,
        eps: f64,
        width: f64,
        height: f64,
    },
    /// Polyline vertices as `[re, im]` pairs from `0+` to `0-`.
    Points(Vec<[f64; 2]>),
}

impl Default for ContourSpec {
    fn default() -> Self {
        ContourSpec::TestArc {
            vertices: 17,
            eps: 1e-3,
        }
    }
}

impl ContourSpec {
    pub fn build(&self, a: f64) -> descent_lab::Result<Contour> {
        match self {
            ContourSpec::TestArc { vertices, eps } => Ok(Contour::test_arc(a, *vertices, *eps)),
            ContourSpec::Arc {
                vertices,
                eps,
                width,
                height,
            } => Ok(Contour::arc(a, *vertices, *eps, *width, *height)),
            ContourSpec::Points(p) => {
                let z: Vec<Complex64> = p.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
                Contour::from_points(&z)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub x_grid: Grid,
    pub t_grid: Grid,
    pub options: CausticOptions,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            x_grid: Grid::Range {
                start: -0.8,
                stop: 0.8,
                count: 9,
            },
            t_grid: Grid::Range {
                start: 0.0,
                stop: 0.1,
                count: 5,
            },
            options: CausticOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolitonParams {
    pub n: usize,
    pub x_grid: Grid,
    pub t_grid: Grid,
    /// Norming constants as `[re, im]` pairs of modulus one.
    pub norming: Option<Vec<[f64; 2]>>,
}

impl Default for SolitonParams {
    fn default() -> Self {
        Self {
            n: 8,
            x_grid: Grid::Range {
                start: -3.0,
                stop: 3.0,
                count: 121,
            },
            t_grid: Grid::List(vec![0.0]),
            norming: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WkbParams {
    pub z_grid: Grid,
    pub quad_tol: f64,
}

impl Default for WkbParams {
    fn default() -> Self {
        Self {
            z_grid: Grid::Range {
                start: 0.02,
                stop: 0.98,
                count: 50,
            },
            quad_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AiryParams {
    pub z: Grid,
    pub panels: usize,
    pub nodes: usize,
    /// Also dump the traced steepest-descent branches.
    pub paths: bool,
}

impl Default for AiryParams {
    fn default() -> Self {
        Self {
            z: Grid::List(vec![0.0, 0.5, 1.0, 2.0, 5.0]),
            panels: 16,
            nodes: 24,
            paths: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<Subcommand>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub field: FieldParams,
    #[serde(default)]
    pub contour: ContourSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub search: SearchOptions,
    #[serde(default)]
    pub sweep: SweepParams,
    #[serde(default)]
    pub soliton: SolitonParams,
    #[serde(default)]
    pub wkb: WkbParams,
    #[serde(default)]
    pub airy: AiryParams,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            subcommand: None,
            seed: 0,
            formats: default_formats(),
            field: FieldParams::default(),
            contour: ContourSpec::default(),
            solver: SolverOptions::default(),
            search: SearchOptions::default(),
            sweep: SweepParams::default(),
            soliton: SolitonParams::default(),
            wkb: WkbParams::default(),
            airy: AiryParams::default(),
        }
    }
}

/// A configuration error located in the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(
                f,
                "config line {}, column {}: {}",
                self.line, self.column, self.message
            )
        } else {
            write!(
                f,
                "config line {}, column {}: `{}`: {}",
                self.line, self.column, self.path, self.message
            )
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parses and validates a configuration document.
pub fn parse(src: &str) -> Result<RunConfig, ConfigError> {
    let located = |e: serde_json::Error| ConfigError {
        line: e.line(),
        column: e.column(),
        path: String::new(),
        message: strip_position(&e.to_string()),
    };
    let raw: Value = serde_json::from_str(src).map_err(located)?;
    check_values(&raw, &mut Vec::new(), src)?;
    let cfg: RunConfig = serde_json::from_str(src).map_err(located)?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(at(
            src,
            &["schema_version"],
            format!(
                "unsupported schema version {}, expected {SCHEMA_VERSION}",
                cfg.schema_version
            ),
        ));
    }
    validate(&cfg, src)?;
    Ok(cfg)
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

fn is_tolerance(key: &str) -> bool {
    key.ends_with("_tol") || key == "tolerance" || key == "delta" || key == "support_threshold"
}

/// Rules that apply wherever a key appears: tolerances are positive and
/// grids are nonempty.
fn check_values(v: &Value, path: &mut Vec<String>, src: &str) -> Result<(), ConfigError> {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                path.push(k.clone());
                if is_tolerance(k) {
                    if let Some(x) = child.as_f64() {
                        if !(x > 0.0 && x.is_finite()) {
                            return Err(at_path(
                                src,
                                path,
                                format!("tolerance must be positive, got {x}"),
                            ));
                        }
                    }
                }
                if k.ends_with("grid") || (k == "z" && path.len() == 2) {
                    let empty = match child {
                        Value::Array(a) => a.is_empty(),
                        Value::Object(o) => o.get("count").and_then(Value::as_u64) == Some(0),
                        _ => false,
                    };
                    if empty {
                        return Err(at_path(src, path, "grid must be nonempty".into()));
                    }
                }
                check_values(child, path, src)?;
                path.pop();
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                path.push(i.to_string());
                check_values(child, path, src)?;
                path.pop();
            }
        }
        _ => {}
    }
    Ok(())
}

fn validate(cfg: &RunConfig, src: &str) -> Result<(), ConfigError> {
    let bad = |path: &[&str], msg: &str| Err(at(src, path, msg.to_string()));
    if !(cfg.field.a > 0.0 && cfg.field.a.is_finite()) {
        return bad(&["field", "a"], "spike height must be positive");
    }
    if !(cfg.field.x.is_finite() && cfg.field.t.is_finite()) {
        return bad(&["field"], "x and t must be finite");
    }
    if cfg.formats.is_empty() {
        return bad(&["formats"], "at least one output format is required");
    }
    if cfg.solver.nodes < 8 {
        return bad(&["solver", "nodes"], "need at least 8 nodes");
    }
    if cfg.search.solver.nodes < 8 {
        return bad(&["search", "solver", "nodes"], "need at least 8 nodes");
    }
    if cfg.soliton.n == 0 {
        return bad(&["soliton", "n"], "need at least one soliton");
    }
    if cfg.airy.panels == 0 || cfg.airy.nodes == 0 {
        return bad(&["airy"], "panels and nodes must be positive");
    }
    if cfg.airy.z.values().iter().any(|z| !(*z >= 0.0)) {
        return bad(&["airy", "z"], "the deformed contour covers z >= 0 only");
    }
    Ok(())
}

fn at(src: &str, path: &[&str], message: String) -> ConfigError {
    let owned: Vec<String> = path.iter().map(|s| s.to_string()).collect();
    at_path(src, &owned, message)
}

/// Locates a key path in the source by scanning for each key in turn.
fn at_path(src: &str, path: &[String], message: String) -> ConfigError {
    let mut pos = 0;
    for key in path.iter().filter(|k| k.parse::<usize>().is_err()) {
        let needle = format!("\"{key}\"");
        match src[pos..].find(&needle) {
            Some(off) => pos += off,
            None => break,
        }
    }
    let before = &src[..pos];
    let line = before.matches('\n').count() + 1;
    let column = pos - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    ConfigError {
        line,
        column,
        path: path.join("."),
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let s = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(parse(&s).unwrap(), cfg);
    }

    #[test]
    fn negative_tolerance_is_located() {
        let src =
            "{\n  \"schema_version\": 1,\n  \"solver\": {\n    \"energy_tol\": -1e-6\n  }\n}\n";
        let e = parse(src).unwrap_err();
        assert_eq!((e.line, e.column), (4, 5));
        assert_eq!(e.path, "solver.energy_tol");
    }

    #[test]
    fn unknown_key_reports_serde_position() {
        let src = "{\n  \"schema_version\": 1,\n  \"bogus\": 3\n}";
        let e = parse(src).unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("bogus"), "{}", e.message);
    }

    #[test]
    fn range_grid_includes_both_ends() {
        let g = Grid::Range {
            start: -1.0,
            stop: 1.0,
            count: 5,
        };
        assert_eq!(g.values(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let src = "{\"schema_version\": 1, \"soliton\": {\"x_grid\": []}}";
        assert!(parse(src).unwrap_err().message.contains("nonempty"));
    }
}
