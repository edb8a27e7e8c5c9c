//! The JSON problem-spec file.
//!
//! ```json
//! {
//!   "model": "builtin",
//!   "builtin": { "name": "graphene", "params": { "p": 1.0 } },
//!   "hbar": [1e-2, 1e-3],
//!   "domain": [-3.0, 3.0],
//!   "options": { "g": 0.2, "tol": 1e-12, "x0": 2.0 }
//! }
//! ```
//!
//! A polynomial model replaces `builtin` with
//! `"polynomial": { "K": M, "B": M, "Gamma": G }`, where `M` is a row-major
//! matrix of polynomials (coefficient lists, lowest degree first, each
//! coefficient `[re, im]`) and `G` a row-major matrix of `[re, im]`.

use crate::CliError;
use pencil_transit::adiabatic::AdiabaticConfig;
use pencil_transit::models::{builtin, polynomial, Poly, PolyMatrix};
use pencil_transit::pencil::BranchSelection;
use pencil_transit::{AnalysisOptions, CMat, Model, OracleOptions, C64};
use serde_json::{Map, Value};
use std::path::Path;

const HERMITIAN_TOL: f64 = 1e-12;

/// Numerical options shared by the subcommands.
#[derive(Debug, Clone, Copy)]
pub struct SpecOptions {
    pub g: f64,
    pub x_star_scale: f64,
    pub tol: f64,
    pub flux_tol: f64,
    /// Projection distance `X0`; `None` uses the default rule.
    pub x0: Option<f64>,
    pub grid_points: usize,
    pub selection: Option<BranchSelection>,
}

impl Default for SpecOptions {
    fn default() -> Self {
        let o = OracleOptions::default();
        let a = AdiabaticConfig::default();
        SpecOptions {
            g: a.g,
            x_star_scale: a.x_star_scale,
            tol: o.tol,
            flux_tol: o.flux_tol,
            x0: None,
            grid_points: AnalysisOptions::default().grid_points,
            selection: None,
        }
    }
}

impl SpecOptions {
    pub fn analysis(&self) -> AnalysisOptions {
        AnalysisOptions {
            grid_points: self.grid_points,
            adiabatic: AdiabaticConfig {
                g: self.g,
                x_star_scale: self.x_star_scale,
                ..AdiabaticConfig::default()
            },
            ..AnalysisOptions::default()
        }
    }

    pub fn oracle(&self) -> OracleOptions {
        OracleOptions {
            tol: self.tol,
            flux_tol: self.flux_tol,
            match_distance: self.x0,
            ..OracleOptions::default()
        }
    }
}

/// A parsed spec file.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub model: Model,
    pub hbar: Vec<f64>,
    pub options: SpecOptions,
}

fn bad(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Parse(format!("{path}: {msg}"))
}

fn real(v: &Value, path: &str) -> Result<f64, CliError> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| bad(path, "expected a finite number"))
}

fn complex(v: &Value, path: &str) -> Result<C64, CliError> {
    match v {
        Value::Array(a) if a.len() == 2 => Ok(C64::new(real(&a[0], path)?, real(&a[1], path)?)),
        Value::Number(_) => Ok(C64::new(real(v, path)?, 0.0)),
        _ => Err(bad(path, "expected [re, im] or a real number")),
    }
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, CliError> {
    v.as_array().ok_or_else(|| bad(path, "expected an array"))
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, CliError> {
    v.as_object().ok_or_else(|| bad(path, "expected an object"))
}

fn check_keys(obj: &Map<String, Value>, allowed: &[&str], path: &str) -> Result<(), CliError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(bad(path, format!("unknown key '{k}' (allowed: {})", allowed.join(", ")))),
        None => Ok(()),
    }
}

fn poly_matrix(v: &Value, path: &str) -> Result<PolyMatrix, CliError> {
    let rows = array(v, path)?;
    let n = rows.len();
    let mut entries = Vec::with_capacity(n);
    for (i, r) in rows.iter().enumerate() {
        let cols = array(r, &format!("{path}[{i}]"))?;
        if cols.len() != n {
            return Err(bad(&format!("{path}[{i}]"), format!("row has {} entries, expected {n}", cols.len())));
        }
        let mut row = Vec::with_capacity(n);
        for (j, e) in cols.iter().enumerate() {
            let p = format!("{path}[{i}][{j}]");
            let coeffs = array(e, &p)?
                .iter()
                .enumerate()
                .map(|(d, c)| complex(c, &format!("{p}[{d}]")))
                .collect::<Result<Vec<_>, _>>()?;
            row.push(Poly(coeffs));
        }
        entries.push(row);
    }
    PolyMatrix::new(entries).map_err(|e| bad(path, e))
}

/// Coefficient-wise Hermiticity: `c_ij^(d) = conj(c_ji^(d))` for every degree.
fn check_hermitian(m: &PolyMatrix, name: &str) -> Result<(), CliError> {
    let n = m.dim();
    let scale = m.entries.iter().flatten().flat_map(|p| p.0.iter()).map(|z| z.norm()).fold(0.0, f64::max);
    let zero = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in i..n {
            let (a, b) = (&m.entries[i][j].0, &m.entries[j][i].0);
            for d in 0..a.len().max(b.len()) {
                let x = a.get(d).copied().unwrap_or(zero);
                let y = b.get(d).copied().unwrap_or(zero);
                if (x - y.conj()).norm() > HERMITIAN_TOL * scale.max(1.0) {
                    return Err(CliError::Parse(format!(
                        "{name} is not Hermitian: entry ({i},{j}) degree {d} is {x}, but entry ({j},{i}) is {y}"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn constant_matrix(v: &Value, path: &str) -> Result<CMat, CliError> {
    let rows = array(v, path)?;
    let n = rows.len();
    let mut m = CMat::zeros(n, n);
    for (i, r) in rows.iter().enumerate() {
        let cols = array(r, &format!("{path}[{i}]"))?;
        if cols.len() != n {
            return Err(bad(&format!("{path}[{i}]"), format!("row has {} entries, expected {n}", cols.len())));
        }
        for (j, e) in cols.iter().enumerate() {
            m[(i, j)] = complex(e, &format!("{path}[{i}][{j}]"))?;
        }
    }
    Ok(m)
}

fn selection(v: &Value) -> Result<BranchSelection, CliError> {
    let path = "options.selection";
    match v {
        Value::String(s) if s == "auto" => Ok(BranchSelection::Auto),
        Value::Object(o) => {
            check_keys(o, &["near", "indices"], path)?;
            if let Some(x) = o.get("near") {
                return Ok(BranchSelection::Near(real(x, &format!("{path}.near"))?));
            }
            let idx = array(o.get("indices").ok_or_else(|| bad(path, "expected 'near' or 'indices'"))?, path)?;
            let get = |k: usize| {
                idx.get(k)
                    .and_then(Value::as_u64)
                    .map(|u| u as usize)
                    .ok_or_else(|| bad(path, "indices must be two non-negative integers"))
            };
            if idx.len() != 2 {
                return Err(bad(path, "indices must be two non-negative integers"));
            }
            Ok(BranchSelection::Indices(get(0)?, get(1)?))
        }
        _ => Err(bad(path, "expected \"auto\", {\"near\": x} or {\"indices\": [i, j]}")),
    }
}

fn options(v: Option<&Value>) -> Result<SpecOptions, CliError> {
    let mut o = SpecOptions::default();
    let Some(v) = v else { return Ok(o) };
    let obj = object(v, "options")?;
    check_keys(
        obj,
        &["g", "x_star_scale", "tol", "flux_tol", "x0", "grid_points", "selection", "gauge"],
        "options",
    )?;
    if let Some(x) = obj.get("g") {
        o.g = real(x, "options.g")?;
    }
    if let Some(x) = obj.get("x_star_scale") {
        o.x_star_scale = real(x, "options.x_star_scale")?;
    }
    if let Some(x) = obj.get("tol") {
        o.tol = real(x, "options.tol")?;
    }
    if let Some(x) = obj.get("flux_tol") {
        o.flux_tol = real(x, "options.flux_tol")?;
    }
    match obj.get("x0") {
        None | Some(Value::Null) => {}
        Some(Value::String(s)) if s == "default" => {}
        Some(x) => o.x0 = Some(real(x, "options.x0")?),
    }
    if let Some(x) = obj.get("grid_points") {
        o.grid_points = x.as_u64().ok_or_else(|| bad("options.grid_points", "expected a positive integer"))? as usize;
    }
    if let Some(x) = obj.get("selection") {
        o.selection = Some(selection(x)?);
    }
    match obj.get("gauge") {
        None => {}
        Some(Value::String(s)) if s == "anchor" => {}
        Some(_) => return Err(bad("options.gauge", "only \"anchor\" is supported")),
    }
    Ok(o)
}

fn hbars(v: Option<&Value>) -> Result<Vec<f64>, CliError> {
    let list = match v {
        None => return Ok(vec![]),
        Some(Value::Array(a)) => a.iter().enumerate().map(|(i, x)| real(x, &format!("hbar[{i}]"))).collect::<Result<Vec<_>, _>>()?,
        Some(x) => vec![real(x, "hbar")?],
    };
    if let Some(h) = list.iter().find(|h| **h <= 0.0) {
        return Err(bad("hbar", format!("{h} is not positive")));
    }
    Ok(list)
}

fn domain(v: Option<&Value>) -> Result<Option<(f64, f64)>, CliError> {
    let Some(v) = v else { return Ok(None) };
    let a = array(v, "domain")?;
    if a.len() != 2 {
        return Err(bad("domain", "expected [x_lo, x_hi]"));
    }
    let d = (real(&a[0], "domain[0]")?, real(&a[1], "domain[1]")?);
    if !(d.0 < d.1) {
        return Err(bad("domain", "x_lo must be below x_hi"));
    }
    Ok(Some(d))
}

impl ProblemSpec {
    pub fn from_value(root: &Value) -> Result<Self, CliError> {
        let obj = object(root, "spec")?;
        check_keys(obj, &["model", "builtin", "polynomial", "hbar", "domain", "options"], "spec")?;
        let kind = obj.get("model").and_then(Value::as_str).ok_or_else(|| bad("model", "expected \"builtin\" or \"polynomial\""))?;
        let dom = domain(obj.get("domain"))?;
        let opts = options(obj.get("options"))?;
        let mut model = match kind {
            "builtin" => {
                let b = object(obj.get("builtin").ok_or_else(|| bad("builtin", "missing"))?, "builtin")?;
                check_keys(b, &["name", "params"], "builtin")?;
                let name = b.get("name").and_then(Value::as_str).ok_or_else(|| bad("builtin.name", "expected a string"))?;
                let mut params = Vec::new();
                if let Some(p) = b.get("params") {
                    for (k, v) in object(p, "builtin.params")? {
                        params.push((k.clone(), real(v, &format!("builtin.params.{k}"))?));
                    }
                }
                if let Some((lo, hi)) = dom {
                    params.retain(|(k, _)| k != "x_lo" && k != "x_hi");
                    params.push(("x_lo".into(), lo));
                    params.push(("x_hi".into(), hi));
                }
                builtin(name, &params)?
            }
            "polynomial" => {
                let p = object(obj.get("polynomial").ok_or_else(|| bad("polynomial", "missing"))?, "polynomial")?;
                check_keys(p, &["K", "B", "Gamma"], "polynomial")?;
                let k = poly_matrix(p.get("K").ok_or_else(|| bad("polynomial.K", "missing"))?, "polynomial.K")?;
                let b = match p.get("B") {
                    Some(v) => poly_matrix(v, "polynomial.B")?,
                    None => PolyMatrix::zeros(k.dim()),
                };
                let g = constant_matrix(p.get("Gamma").ok_or_else(|| bad("polynomial.Gamma", "missing"))?, "polynomial.Gamma")?;
                check_hermitian(&k, "K")?;
                check_hermitian(&b, "B")?;
                let dom = dom.ok_or_else(|| bad("domain", "required for polynomial models"))?;
                polynomial(k, b, g, dom)?
            }
            other => return Err(bad("model", format!("unknown model kind '{other}'"))),
        };
        if let Some(s) = opts.selection {
            model.selection = s;
        }
        Ok(ProblemSpec {
            model,
            hbar: hbars(obj.get("hbar"))?,
            options: opts,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_value(&v)
    }
}

/// Example spec documents for `example <name>`.
pub fn example(name: &str) -> Option<Value> {
    use serde_json::json;
    let v = match name {
        "graphene" => json!({
            "model": "builtin",
            "builtin": {"name": "graphene", "params": {"E": 0.0, "p": 1.0, "U0": 0.0, "U1": -1.0}},
            "domain": [-3.0, 3.0],
            "hbar": [1e-2, 1e-3, 1e-4],
            "options": {"g": 0.2, "tol": 1e-12, "x0": 2.0}
        }),
        "lz" => json!({
            "model": "builtin",
            "builtin": {"name": "lz", "params": {"Q": 1.0, "c": 1.0}},
            "domain": [-3.0, 3.0],
            "hbar": [1e-2, 1e-3, 1e-4],
            "options": {"g": 0.2, "tol": 1e-12, "x0": 2.0}
        }),
        "wave" => json!({
            "model": "builtin",
            "builtin": {"name": "wave", "params": {"g": std::f64::consts::SQRT_2, "a1": 1.0, "a2": 1.0}},
            "domain": [-0.8, 0.8],
            "hbar": [1e-3],
            "options": {"selection": {"near": 1.0}, "g": 0.1}
        }),
        "schrodinger" => json!({
            "model": "builtin",
            "builtin": {"name": "schrodinger", "params": {"E": 0.0, "U1": -1.0}}
        }),
        "polynomial" => json!({
            "model": "polynomial",
            "polynomial": {
                "K": [[[[0.0, 0.0], [-1.0, 0.0]], [[0.0, 0.0]]], [[[0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]],
                "B": [[[], [[0.5, 0.0]]], [[[0.5, 0.0]], []]],
                "Gamma": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]
            },
            "domain": [-2.0, 2.0],
            "hbar": 1e-3
        }),
        _ => return None,
    };
    Some(v)
}

pub const EXAMPLE_NAMES: [&str; 5] = ["graphene", "lz", "wave", "schrodinger", "polynomial"];
