//! TOML experiment configuration.
//!
//! Flat `key = value` pairs at top level, optionally refined by a section
//! named after the verb (`[converge]`, `[stencil-scan]`, ...). Command-line
//! overrides (`key=value`) win over both.

use std::path::Path;

use toml::{Table, Value};

use crate::benchmark::{ExperimentConfig, StencilSize};
use crate::solver::SolverKind;
use crate::weights::{Engine, WlsWeight, DEFAULT_WLS_SIGMA};
use crate::{Error, Result};

pub const VERBS: [&str; 5] = ["solve", "converge", "stencil-scan", "stability", "check-weights"];

const KEYS: [&str; 15] = [
    "d",
    "engine",
    "m",
    "k",
    "n",
    "n_list",
    "N",
    "N_runs",
    "base_seed",
    "wls_weight",
    "wls_sigma",
    "solver",
    "solver_tol",
    "solver_max_iter",
    "timings",
];

/// Default node counts: up to 16000 in 2D and 8000 in 3D.
pub fn default_targets(d: usize) -> Vec<usize> {
    if d == 3 {
        vec![1000, 2000, 4000, 8000]
    } else {
        vec![1000, 2000, 4000, 8000, 16000]
    }
}

/// Reads `path` (if any), applies the `verb` section and then `overrides`.
pub fn parse_config(path: Option<&Path>, verb: Option<&str>, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    parse_config_str(&text, verb, overrides)
}

pub fn parse_config_str(text: &str, verb: Option<&str>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;

    let mut sections = Table::new();
    for name in VERBS {
        if let Some(v) = table.remove(name) {
            match v {
                Value::Table(t) => {
                    sections.insert(name.to_string(), Value::Table(t));
                }
                _ => return Err(Error::Config(format!("`{name}` must be a section"))),
            }
        }
    }
    for (name, section) in &sections {
        let Value::Table(t) = section else { unreachable!() };
        if let Some(bad) = t.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key `{bad}` in [{name}]")));
        }
        if Some(name.as_str()) == verb {
            table.extend(t.clone());
        }
    }
    for ov in overrides {
        let (key, value) = parse_override(ov)?;
        table.insert(key, value);
    }
    from_table(&table)
}

/// `key=value`, with the value read as a TOML value, falling back to a bare
/// string (`engine=wls`).
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((key, value))
}

fn type_error(key: &str, expected: &str, v: &Value) -> Error {
    Error::Config(format!("`{key}` must be {expected}, got {}", v.type_str()))
}

fn as_uint(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(type_error(key, "a non-negative integer", v)),
    }
}

fn as_float(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(type_error(key, "a number", v)),
    }
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| type_error(key, "a string", v))
}

/// A scalar is a one-element list.
fn as_list(v: &Value) -> Vec<&Value> {
    match v {
        Value::Array(a) => a.iter().collect(),
        other => vec![other],
    }
}

fn uint_list(key: &str, v: &Value) -> Result<Vec<usize>> {
    as_list(v).into_iter().map(|x| as_uint(key, x)).collect()
}

fn engines(v: &Value) -> Result<Vec<Engine>> {
    let mut out = Vec::new();
    for x in as_list(v) {
        let s = as_str("engine", x)?;
        if s.eq_ignore_ascii_case("both") {
            out.extend([Engine::Wls, Engine::RbfFd]);
        } else {
            out.push(s.parse()?);
        }
    }
    out.dedup();
    Ok(out)
}

fn from_table(t: &Table) -> Result<ExperimentConfig> {
    if let Some(bad) = t.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(Error::Config(format!("unknown key `{bad}`")));
    }
    let mut cfg = ExperimentConfig::default();
    if let Some(v) = t.get("d") {
        cfg.d = as_uint("d", v)?;
    }
    cfg.n_targets = default_targets(cfg.d);
    if let Some(v) = t.get("engine") {
        cfg.engines = engines(v)?;
    }
    if let Some(v) = t.get("m") {
        cfg.m = uint_list("m", v)?;
    }
    if let Some(v) = t.get("k") {
        cfg.k = as_uint("k", v)? as u32;
    }
    if let Some(v) = t.get("n") {
        cfg.n = match v {
            Value::String(s) if s == "auto" => StencilSize::Auto,
            Value::Integer(_) => StencilSize::Fixed(as_uint("n", v)?),
            _ => return Err(type_error("n", "\"auto\" or an integer", v)),
        };
    }
    if let Some(v) = t.get("n_list") {
        cfg.n_list = Some(uint_list("n_list", v)?);
    }
    if let Some(v) = t.get("N") {
        cfg.n_targets = uint_list("N", v)?;
    }
    if let Some(v) = t.get("N_runs") {
        cfg.n_runs = as_uint("N_runs", v)?;
    }
    if let Some(v) = t.get("base_seed") {
        cfg.base_seed = as_uint("base_seed", v)? as u64;
    }
    let sigma = t.get("wls_sigma").map(|v| as_float("wls_sigma", v)).transpose()?;
    let weight = match t.get("wls_weight") {
        Some(v) => as_str("wls_weight", v)?,
        None => "gaussian",
    };
    cfg.wls_weight = match weight {
        "uniform" => WlsWeight::Uniform,
        "gaussian" => {
            let sigma = sigma.unwrap_or(DEFAULT_WLS_SIGMA);
            if sigma.is_nan() || sigma <= 0.0 {
                return Err(Error::Config("`wls_sigma` must be positive".into()));
            }
            WlsWeight::Gaussian { sigma }
        }
        other => return Err(Error::Config(format!("unknown wls_weight `{other}`"))),
    };
    if let Some(v) = t.get("solver") {
        cfg.solver.kind = match as_str("solver", v)? {
            "direct" => SolverKind::Direct,
            "iterative" => SolverKind::Iterative,
            other => return Err(Error::Config(format!("unknown solver `{other}`"))),
        };
    }
    if let Some(v) = t.get("solver_tol") {
        cfg.solver.tolerance = as_float("solver_tol", v)?;
    }
    if let Some(v) = t.get("solver_max_iter") {
        cfg.solver.max_iterations = as_uint("solver_max_iter", v)?;
    }
    if let Some(v) = t.get("timings") {
        cfg.timings = v.as_bool().ok_or_else(|| type_error("timings", "a boolean", v))?;
    }
    cfg.validate()?;
    Ok(cfg)
}
