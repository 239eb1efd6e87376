//! Golden-value fixtures: one JSON file per bundled system, each entry a
//! quantity, the context it is computed in, the expected value and its
//! tolerance.

use std::collections::BTreeMap;
use std::fmt;

use horizon_core::balance::BalanceRoot;
use horizon_core::correspondence::SpectralReport;
use horizon_core::flow::{self, FlowOptions, RateFit, TmaxEstimate, Trajectory};
use horizon_core::linalg::{self, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::run::Pipeline;
use crate::sysfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    PaperTable,
    PaperFormula,
    DerivedOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expected {
    Scalar(f64),
    Vector(Vec<f64>),
    Complex(Vec<[f64; 2]>),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    #[serde(default)]
    pub abs: f64,
    #[serde(default)]
    pub rel: f64,
}

impl Tolerance {
    fn admits(&self, got: f64, want: f64) -> bool {
        (got - want).abs() <= self.abs + self.rel * want.abs()
    }
}

/// Where a quantity is computed: a balance-law evaluation at fixed `t`, or
/// a desingularized trajectory from `(t0, x0)` (or original-coordinate `y0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Context {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<Vec<f64>>,
    /// Pick the balance root closest to this vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_near: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenFixture {
    pub id: String,
    pub quantity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
    pub at: Context,
    pub expected: Expected,
    pub tolerance: Tolerance,
    pub provenance: Provenance,
    /// Where the number comes from, or how the oracle computes it.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureFile {
    pub system: String,
    pub fixtures: Vec<GoldenFixture>,
}

const FILES: &[&str] = &[
    include_str!("../fixtures/painleve1.json"),
    include_str!("../fixtures/selfsimilar.json"),
    include_str!("../fixtures/wwl_k2.json"),
    include_str!("../fixtures/wwl_k1.json"),
];

pub fn bundled_fixtures() -> Vec<FixtureFile> {
    FILES.iter().map(|t| serde_json::from_str(t).expect("bundled fixture file parses")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Got {
    Scalar(f64),
    Vector(Vec<f64>),
    Complex(Vec<C64>),
    Text(String),
}

impl fmt::Display for Got {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Got::Scalar(v) => write!(f, "{v}"),
            Got::Vector(v) => write!(f, "{v:?}"),
            Got::Complex(v) => {
                let parts: Vec<String> = v.iter().map(|z| format!("{}{:+}i", z.re, z.im)).collect();
                write!(f, "[{}]", parts.join(", "))
            }
            Got::Text(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub system: String,
    pub id: String,
    pub pass: bool,
    pub got: Option<Got>,
    /// Human-readable description of the mismatch; empty on success.
    pub diff: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}/{}", self.system, self.id)?;
        if !self.pass {
            write!(f, ": {}", self.diff)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub outcomes: Vec<Outcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }

    pub fn first_failure(&self) -> Option<&Outcome> {
        self.outcomes.iter().find(|o| !o.pass)
    }
}

/// Compare a computed value against the fixture; `Err` carries the diff.
fn compare(got: &Got, want: &Expected, tol: &Tolerance) -> Result<(), String> {
    match (got, want) {
        (Got::Scalar(g), Expected::Scalar(w)) => {
            if tol.admits(*g, *w) {
                Ok(())
            } else {
                Err(format!("expected {w}, got {g} (off by {:e}; tolerance abs {:e} rel {:e})", g - w, tol.abs, tol.rel))
            }
        }
        (Got::Vector(g), Expected::Vector(w)) => {
            if g.len() != w.len() {
                return Err(format!("expected {} components, got {}", w.len(), g.len()));
            }
            for (i, (a, b)) in g.iter().zip(w).enumerate() {
                if !tol.admits(*a, *b) {
                    return Err(format!("component {i}: expected {b}, got {a} (off by {:e})", a - b));
                }
            }
            Ok(())
        }
        (Got::Complex(g), Expected::Complex(w)) => {
            if g.len() != w.len() {
                return Err(format!("expected {} eigenvalues, got {}", w.len(), g.len()));
            }
            let want: Vec<C64> = w.iter().map(|p| C64::new(p[0], p[1])).collect();
            // absolute tolerance applies per eigenvalue; rel is relative to |λ|
            let mut used = vec![false; g.len()];
            for z in &want {
                let best = (0..g.len())
                    .filter(|&j| !used[j])
                    .min_by(|&a, &b| linalg::cabs(g[a] - z).total_cmp(&linalg::cabs(g[b] - z)));
                match best {
                    Some(j) if linalg::cabs(g[j] - z) <= tol.abs + tol.rel * linalg::cabs(*z) => used[j] = true,
                    _ => return Err(format!("no computed eigenvalue near {}{:+}i in {got}", z.re, z.im)),
                }
            }
            Ok(())
        }
        (Got::Text(g), Expected::Text(w)) => {
            if g == w {
                Ok(())
            } else {
                Err(format!("expected `{w}`, got `{g}`"))
            }
        }
        (g, w) => Err(format!("type mismatch: expected {w:?}, got {g}")),
    }
}

/// Computed state for one balance context.
struct BalanceCtx {
    roots: Vec<BalanceRoot>,
    chosen: Option<(BalanceRoot, Result<SpectralReport, String>)>,
}

/// Computed state for one flow context.
struct FlowCtx {
    traj: Trajectory,
    tmax: Result<TmaxEstimate, String>,
    analysis: Result<(BalanceRoot, SpectralReport), String>,
    fit: Option<RateFit>,
}

fn pick_root(roots: &[BalanceRoot], near: Option<&[f64]>) -> Option<BalanceRoot> {
    match near {
        None => roots.first().cloned(),
        Some(v) => roots
            .iter()
            .min_by(|a, b| {
                let d = |r: &BalanceRoot| r.y0.iter().zip(v).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
                d(a).total_cmp(&d(b))
            })
            .cloned(),
    }
}

fn balance_ctx(p: &Pipeline, at: &Context) -> BalanceCtx {
    let t = at.t.unwrap_or(0.0);
    let roots = p.bl.find_roots(t, &p.search(0));
    let chosen = pick_root(&roots, at.root_near.as_deref()).map(|r| {
        let a = p.analyze(&r).map_err(|e| e.to_string());
        (r, a)
    });
    BalanceCtx { roots, chosen }
}

fn flow_ctx(p: &Pipeline, at: &Context) -> Result<FlowCtx, String> {
    let t0 = at.t0.unwrap_or(0.0);
    let x0 = p.initial_point(at.x0.as_deref(), at.y0.as_deref()).map_err(|e| e.to_string())?;
    let traj = p.integrate(t0, &x0, &FlowOptions::default());
    let tmax = flow::t_max(&p.df, &traj).map_err(|e| e.to_string());
    let analysis = match &tmax {
        Ok(tm) => p
            .limit_root(&traj, tm, 0)
            .and_then(|r| Ok((r.clone(), p.analyze(&r)?)))
            .map_err(|e| e.to_string()),
        Err(e) => Err(e.clone()),
    };
    let fit = match (&tmax, &analysis) {
        (Ok(tm), Ok((root, _))) => Some(flow::rate_check(&p.df, &traj, tm, &root.y0)),
        _ => None,
    };
    Ok(FlowCtx { traj, tmax, analysis, fit })
}

fn sign_text(v: f64) -> String {
    if v > 0.0 { "+" } else if v < 0.0 { "-" } else { "0" }.into()
}

fn cvec(v: &[C64]) -> Got {
    Got::Complex(v.to_vec())
}

fn eval_balance(fx: &GoldenFixture, p: &Pipeline, ctx: &BalanceCtx) -> Result<Got, String> {
    let chosen = || ctx.chosen.as_ref().ok_or_else(|| "no balance root".to_string());
    let report = || -> Result<&SpectralReport, String> { chosen()?.1.as_ref().map_err(Clone::clone) };
    Ok(match fx.quantity.as_str() {
        "root_count" => Got::Scalar(ctx.roots.len() as f64),
        "balance_root" => Got::Vector(chosen()?.0.y0.clone()),
        "spec_a_ext" => cvec(&report()?.power.spec_ext),
        "equilibrium" => Got::Vector(report()?.eq.x_star.clone()),
        "equilibrium_p2c" => Got::Scalar(p.df.spec.p2c(&report()?.eq.x_star)),
        "c_star" => Got::Scalar(report()?.eq.c_star),
        "r" => Got::Scalar(report()?.eq.r),
        "spec_dg" => cvec(&report()?.spec_dg),
        "verdict" => Got::Text(match report()?.verdict.status {
            horizon_core::correspondence::VerdictStatus::Exists => "exists".into(),
            horizon_core::correspondence::VerdictStatus::Inconclusive => "inconclusive".into(),
        }),
        "rate_exponents" => Got::Vector(report()?.verdict.rates.iter().map(|r| r.exponent).collect()),
        q => return Err(format!("unknown balance quantity `{q}`")),
    })
}

fn eval_flow(fx: &GoldenFixture, p: &Pipeline, ctx: &FlowCtx) -> Result<Got, String> {
    let tmax = || ctx.tmax.as_ref().map_err(Clone::clone);
    let analysis = || ctx.analysis.as_ref().map_err(Clone::clone);
    let fit_component = || -> Result<_, String> {
        let fit = ctx.fit.as_ref().ok_or("no rate fit")?;
        let i = fx.component.ok_or("rate quantities need a component")?;
        fit.components.iter().find(|c| c.index == i).ok_or_else(|| format!("no fit for component {i} ({:?})", fit.status))
    };
    let last = ctx.traj.last();
    Ok(match fx.quantity.as_str() {
        "t_max" => Got::Scalar(tmax()?.value),
        "limit_point" => Got::Vector(last.x.clone()),
        "sign_x1x3" => Got::Text(sign_text(last.x[0] * last.x[2])),
        "driver_at_t_max" => {
            let d = p.loaded.driver.as_ref().ok_or("system has no driver")?;
            Got::Scalar(d.eval(tmax()?.value, &[]).map_err(|e| e.to_string())?)
        }
        "limit_c_star" => Got::Scalar(analysis()?.1.eq.c_star),
        "limit_spec_dg" => cvec(&analysis()?.1.spec_dg),
        "limit_d" => Got::Scalar(analysis()?.1.transversal.d.ok_or("d is only defined for k = 1")?),
        "limit_transversal_vector" => {
            let v = &analysis()?.1.transversal.vector;
            let lead = v[0];
            if lead == 0.0 {
                return Err("transversal vector has no time component".into());
            }
            Got::Vector(v.iter().map(|a| a / lead).collect())
        }
        "rate_slope" => Got::Scalar(fit_component()?.slope),
        "rate_coefficient" => Got::Scalar(fit_component()?.coefficient),
        q => return Err(format!("unknown flow quantity `{q}`")),
    })
}

fn is_flow(at: &Context) -> bool {
    at.t0.is_some() || at.x0.is_some() || at.y0.is_some()
}

fn context_key(at: &Context) -> String {
    serde_json::to_string(&Context { root_near: if is_flow(at) { None } else { at.root_near.clone() }, ..at.clone() })
        .expect("context serializes")
}

/// Evaluate every fixture of one file. Contexts shared by several fixtures
/// are computed once; distinct contexts run in parallel.
pub fn run_file(file: &FixtureFile) -> Vec<Outcome> {
    let fail_all = |msg: String| {
        file.fixtures
            .iter()
            .map(|f| Outcome { system: file.system.clone(), id: f.id.clone(), pass: false, got: None, diff: msg.clone() })
            .collect()
    };
    let loaded = match sysfile::bundled(&file.system) {
        Ok(l) => l,
        Err(e) => return fail_all(e.to_string()),
    };
    let p = Pipeline::new(loaded);

    let mut contexts: BTreeMap<String, Context> = BTreeMap::new();
    for f in &file.fixtures {
        contexts.entry(context_key(&f.at)).or_insert_with(|| f.at.clone());
    }
    let entries: Vec<(String, Context)> = contexts.into_iter().collect();
    enum Ctx {
        Balance(BalanceCtx),
        Flow(Result<FlowCtx, String>),
    }
    let computed: BTreeMap<String, Ctx> = entries
        .par_iter()
        .map(|(key, at)| {
            let c = if is_flow(at) { Ctx::Flow(flow_ctx(&p, at)) } else { Ctx::Balance(balance_ctx(&p, at)) };
            (key.clone(), c)
        })
        .collect();

    file.fixtures
        .iter()
        .map(|f| {
            let got = match &computed[&context_key(&f.at)] {
                Ctx::Balance(c) => eval_balance(f, &p, c),
                Ctx::Flow(Ok(c)) => eval_flow(f, &p, c),
                Ctx::Flow(Err(e)) => Err(e.clone()),
            };
            let (pass, got, diff) = match got {
                Ok(g) => match compare(&g, &f.expected, &f.tolerance) {
                    Ok(()) => (true, Some(g), String::new()),
                    Err(d) => (false, Some(g), d),
                },
                Err(e) => (false, None, e),
            };
            Outcome { system: file.system.clone(), id: f.id.clone(), pass, got, diff }
        })
        .collect()
}

pub fn run_golden_suite(files: &[FixtureFile]) -> SuiteReport {
    let outcomes = files.par_iter().map(run_file).collect::<Vec<_>>().concat();
    SuiteReport { outcomes }
}
