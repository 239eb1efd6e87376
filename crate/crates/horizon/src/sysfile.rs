//! JSON system definitions.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use horizon_core::expr::{self, Expr};
use horizon_core::system::{QhSignature, SystemDef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Either a literal order or an expression over `params`, e.g. `"1 - m"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderK {
    Value(f64),
    Expr(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub name: String,
    pub state: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    pub alpha: Vec<u32>,
    pub order_k: OrderK,
    pub qh: Vec<String>,
    pub res: Vec<String>,
    /// Extra Newton starts for the balance-law search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<Vec<f64>>>,
    /// `[start, stop, count]` for tracing root families in `t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<(f64, f64, usize)>,
    /// Time-dependent coefficient reported by sweeps, e.g. `"sin(t)"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub driver: Option<String>,
}

const BUNDLED: &[(&str, &str)] = &[
    ("painleve1", include_str!("../systems/painleve1.json")),
    ("selfsimilar", include_str!("../systems/selfsimilar.json")),
    ("wwl_k2", include_str!("../systems/wwl_k2.json")),
    ("wwl_k1", include_str!("../systems/wwl_k1.json")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

/// A parsed system file, kept together with its source for error locations.
#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub path: PathBuf,
    pub file: SystemFile,
    pub sys: SystemDef,
    pub driver: Option<Expr>,
}

impl LoadedSystem {
    pub fn seeds(&self) -> Vec<Vec<f64>> {
        self.file.seeds.clone().unwrap_or_default()
    }

    /// Grid points of `t_grid`, inclusive of both ends.
    pub fn t_grid(&self) -> Vec<f64> {
        match self.file.t_grid {
            Some((a, b, n)) if n >= 2 => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            Some((a, _, 1)) => vec![a],
            _ => Vec::new(),
        }
    }
}

/// Load `spec` as a file path, or as the name of a bundled system when no
/// such file exists.
pub fn load(spec: &str, overrides: &[(String, f64)]) -> Result<LoadedSystem> {
    let path = Path::new(spec);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
        return from_str(&text, path, overrides);
    }
    let name = spec.strip_suffix(".json").unwrap_or(spec);
    match BUNDLED.iter().find(|(n, _)| *n == name) {
        Some((n, text)) => from_str(text, Path::new(&format!("<bundled>/{n}.json")), overrides),
        None => Err(Error::Usage(format!(
            "no file `{spec}` and no bundled system of that name (bundled: {})",
            bundled_names().collect::<Vec<_>>().join(", ")
        ))),
    }
}

pub fn bundled(name: &str) -> Result<LoadedSystem> {
    load(name, &[])
}

/// 1-based line of the first occurrence of `needle` in `text`.
fn line_of(text: &str, needle: &str) -> usize {
    text.find(needle).map_or(1, |at| text[..at].matches('\n').count() + 1)
}

pub fn from_str(text: &str, path: &Path, overrides: &[(String, f64)]) -> Result<LoadedSystem> {
    let mut file: SystemFile =
        serde_json::from_str(text).map_err(|source| Error::Json { path: path.into(), source })?;
    for (k, v) in overrides {
        if !file.params.contains_key(k) {
            return Err(Error::Usage(format!("system `{}` has no parameter `{k}`", file.name)));
        }
        file.params.insert(k.clone(), *v);
    }
    let schema = |key: &str, message: String| Error::Schema { path: path.into(), line: line_of(text, key), message };

    let params: Vec<(&str, f64)> = file.params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let states: Vec<&str> = file.state.iter().map(String::as_str).collect();
    let n = states.len();
    for (key, len) in [("\"alpha\"", file.alpha.len()), ("\"qh\"", file.qh.len()), ("\"res\"", file.res.len())] {
        if len != n {
            return Err(schema(key, format!("{} has {len} entries but there are {n} states", key.trim_matches('"'))));
        }
    }
    let k = match &file.order_k {
        OrderK::Value(k) => *k,
        OrderK::Expr(src) => expr::parse_with_params(src, &[], &params)
            .map_err(|e| schema("\"order_k\"", format!("order_k: {e}")))?
            .eval(0.0, &[])
            .map_err(|e| schema("\"order_k\"", format!("order_k: {e}")))?,
    };
    let sig = QhSignature::new(file.alpha.clone(), k).map_err(|e| schema("\"alpha\"", e.to_string()))?;

    let parse_list = |key: &str, list: &[String]| -> Result<Vec<Expr>> {
        list.iter()
            .enumerate()
            .map(|(i, src)| {
                expr::parse_with_params(src, &states, &params).map_err(|e| {
                    let line = line_of(text, &format!("\"{src}\""));
                    Error::Schema { path: path.into(), line, message: format!("{key}[{i}] `{src}`: {e}") }
                })
            })
            .collect()
    };
    let qh = parse_list("qh", &file.qh)?;
    let res = parse_list("res", &file.res)?;
    let driver = match &file.driver {
        Some(src) => Some(
            expr::parse_with_params(src, &[], &params).map_err(|e| schema("\"driver\"", format!("driver: {e}")))?,
        ),
        None => None,
    };
    if let Some(seeds) = &file.seeds {
        if let Some(bad) = seeds.iter().find(|s| s.len() != n) {
            return Err(schema("\"seeds\"", format!("seed {bad:?} does not have {n} components")));
        }
    }
    let sys = SystemDef::new(file.name.clone(), file.state.clone(), sig, qh, res)
        .map_err(|e| schema("\"state\"", e.to_string()))?;
    Ok(LoadedSystem { path: path.into(), file, sys, driver })
}
