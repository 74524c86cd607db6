//! Model files.
//!
//! ```json
//! {
//!   "n": 1,
//!   "a": [1.0],
//!   "epsilon": 0.5,
//!   "M": { "terms": [ { "pole": [0.0, -1.0], "order": 2, "coeff": [[1.0, 0.0]] } ] },
//!   "search": { "region": [0.2, 2.0, -1.0, -1e-6] },
//!   "grid": { "cutoff": 500.0, "points": 20000 }
//! }
//! ```
//!
//! Complex numbers are `[re, im]` pairs; `coeff` is row-major with `n`
//! columns. `search`, `grid`, `tolerances` and `project` are optional.

use std::path::Path;

use friedrichs_core::{CMat, Complex64, ModelSpec, RationalMatrixFunction, RationalTerm};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_EPSILON: f64 = 1.0;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n: usize,
    a: Vec<f64>,
    epsilon: Option<f64>,
    #[serde(rename = "M")]
    m: RawForm,
    #[serde(default)]
    search: SearchConfig,
    #[serde(default)]
    grid: GridConfig,
    #[serde(default)]
    tolerances: Tolerances,
    project: Option<ProjectConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForm {
    terms: Vec<RawTerm>,
    /// Dimension of the target space; defaults to `n`.
    rows: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    pole: [f64; 2],
    order: u32,
    coeff: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// `[re_min, re_max, im_min, im_max]`.
    pub region: [f64; 4],
    pub max_depth: u32,
    pub newton_tol: f64,
    pub eps_grid: Option<Vec<f64>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { region: [-6.0, 8.0, -6.0, -1e-6], max_depth: 24, newton_tol: 1e-15, eps_grid: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub cutoff: f64,
    pub points: usize,
    pub times: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { cutoff: 500.0, points: 20_000, times: vec![0.5, 1.0, 2.0, 5.0] }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub jump: f64,
    pub density: f64,
    pub moments: f64,
    pub oracle: f64,
    pub unitarity: f64,
    pub simple_pole: f64,
    pub angle: f64,
    pub pairing: f64,
    pub pole_sum: f64,
    pub eigenrelation: f64,
    pub negative_axis_sigma: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            jump: 1e-11,
            density: 1e-10,
            moments: 1e-6,
            oracle: 1e-9,
            unitarity: 1e-9,
            simple_pole: 1e-8,
            angle: 1e-8,
            pairing: 1e-8,
            pole_sum: 1e-5,
            eigenrelation: 1e-3,
            negative_axis_sigma: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectTerm {
    pub pole: [f64; 2],
    pub k: Vec<[f64; 2]>,
}

/// Test function `Σ k_j/(λ - w_j)` and evaluation points for `project`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub terms: Vec<ProjectTerm>,
    pub z: Vec<[f64; 2]>,
}

#[derive(Clone, Debug)]
pub struct Config {
    pub spec: ModelSpec,
    pub search: SearchConfig,
    pub grid: GridConfig,
    pub tolerances: Tolerances,
    pub project: Option<ProjectConfig>,
    /// Hex SHA-256 of the file contents.
    pub hash: String,
    pub warnings: Vec<String>,
}

pub fn c(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn field(path: &str, field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_string(),
        line: None,
        column: None,
        field: Some(field.into()),
        message: message.into(),
    }
}

pub fn load(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        line: None,
        column: None,
        field: None,
        message: e.to_string(),
    })?;
    parse(&text, &path.display().to_string())
}

pub fn parse(text: &str, path: &str) -> Result<Config, CliError> {
    let hash = hex::encode(Sha256::digest(text.as_bytes()));
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_string(),
        line: Some(e.line()),
        column: Some(e.column()),
        field: None,
        message: e.to_string(),
    })?;
    let mut warnings = Vec::new();
    if raw.n == 0 {
        return Err(field(path, "n", "must be at least 1"));
    }
    if raw.a.len() != raw.n {
        return Err(field(path, "a", format!("has {} entries, expected n = {}", raw.a.len(), raw.n)));
    }
    if let Some(i) = raw.a.iter().position(|x| !x.is_finite()) {
        return Err(field(path, format!("a[{i}]"), "not finite"));
    }
    let epsilon = match raw.epsilon {
        Some(e) if e.is_finite() && e >= 0.0 => e,
        Some(_) => return Err(field(path, "epsilon", "must be finite and non-negative")),
        None => {
            warnings.push(format!("epsilon missing, using {DEFAULT_EPSILON}"));
            DEFAULT_EPSILON
        }
    };
    let rows = raw.m.rows.unwrap_or(raw.n);
    if raw.m.terms.is_empty() {
        return Err(field(path, "M.terms", "must not be empty"));
    }
    let mut terms = Vec::with_capacity(raw.m.terms.len());
    for (i, t) in raw.m.terms.iter().enumerate() {
        if t.coeff.len() != rows * raw.n {
            return Err(field(
                path,
                format!("M.terms[{i}].coeff"),
                format!("has {} entries, expected {rows}x{}", t.coeff.len(), raw.n),
            ));
        }
        if t.order == 0 {
            return Err(field(path, format!("M.terms[{i}].order"), "must be at least 1"));
        }
        let coeff = CMat::from_row_major(rows, raw.n, t.coeff.iter().copied().map(c).collect());
        terms.push(RationalTerm::new(c(t.pole), t.order, coeff));
    }
    let m = RationalMatrixFunction::new(rows, raw.n, terms).map_err(|e| field(path, "M.terms", e.to_string()))?;
    let spec = ModelSpec::new(raw.a, m, epsilon).map_err(|e| field(path, "M", e.to_string()))?;
    let r = raw.search.region;
    if !(r[0] < r[1] && r[2] < r[3]) {
        return Err(field(path, "search.region", "needs re_min < re_max and im_min < im_max"));
    }
    if raw.grid.cutoff.is_nan() || raw.grid.cutoff <= 0.0 || raw.grid.points < 100 {
        return Err(field(path, "grid", "needs cutoff > 0 and at least 100 points"));
    }
    Ok(Config {
        spec,
        search: raw.search,
        grid: raw.grid,
        tolerances: raw.tolerances,
        project: raw.project,
        hash,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"{"n": 1, "a": [1.0], "epsilon": 0.5,
        "M": {"terms": [{"pole": [0.0, -1.0], "order": 2, "coeff": [[1.0, 0.0]]}]}}"#;

    #[test]
    fn scalar_model() {
        let cfg = parse(SCALAR, "scalar").unwrap();
        assert_eq!(cfg.spec.n(), 1);
        assert_eq!(cfg.spec.epsilon(), 0.5);
        assert!(cfg.warnings.is_empty());
        assert_eq!(cfg.hash.len(), 64);
        let m = cfg.spec.eval_m(Complex64::new(1.0, 0.0)).unwrap()[(0, 0)];
        assert!((m - Complex64::new(1.0, 1.0).powi(-2) * 0.5).norm() < 1e-15);
    }

    #[test]
    fn missing_epsilon_defaults() {
        let text = SCALAR.replace(r#""epsilon": 0.5,"#, "");
        let cfg = parse(&text, "x").unwrap();
        assert_eq!(cfg.spec.epsilon(), DEFAULT_EPSILON);
        assert_eq!(cfg.warnings.len(), 1);
    }

    #[test]
    fn errors_name_the_field_or_line() {
        let bad = SCALAR.replace("[[1.0, 0.0]]", "[[1.0, 0.0], [2.0, 0.0]]");
        match parse(&bad, "x") {
            Err(CliError::Parse { field: Some(f), .. }) => assert_eq!(f, "M.terms[0].coeff"),
            other => panic!("{other:?}"),
        }
        match parse("{\n \"n\": 1,\n \"a\": [1.0,]\n}", "x") {
            Err(CliError::Parse { line: Some(3), .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse(&SCALAR.replace("\"a\": [1.0]", "\"a\": [1.0, 2.0]"), "x"),
            Err(CliError::Parse { .. })
        ));
        assert!(matches!(
            parse(&SCALAR.replace("\"n\": 1,", "\"n\": 1, \"extra\": 3,"), "x"),
            Err(CliError::Parse { .. })
        ));
    }

    #[test]
    fn hash_tracks_contents() {
        let a = parse(SCALAR, "x").unwrap().hash;
        let b = parse(&SCALAR.replace("0.5", "0.25"), "x").unwrap().hash;
        assert_ne!(a, b);
    }
}
