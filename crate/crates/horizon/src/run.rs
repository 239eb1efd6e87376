//! End-to-end pipelines behind the `report`, `correspond` and `sweep` commands.

use horizon_core::balance::{BalanceLaw, BalanceRoot, RootSearch};
use horizon_core::correspondence::{self, SpectralReport};
use horizon_core::desing::DesingField;
use horizon_core::flow::{self, FlowOptions, TmaxEstimate, Trajectory};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::report::{AnalysisRecord, CheckRecord, FlowRecord, RateFitRecord, Report};
use crate::sysfile::LoadedSystem;

/// The κ-growth check is only meaningful while `1 − p2c` carries digits.
pub const KAPPA_GROWTH_FLOOR: f64 = 1e-6;
pub const KAPPA_GROWTH_TOL: f64 = 1e-5;
pub const VECTOR_TOL: f64 = 1e-7;
pub const SPECTRUM_TOL: f64 = 1e-6;
pub const PROP_ONE_TOL: f64 = 1e-9;

/// A system together with its desingularized field and balance law.
pub struct Pipeline {
    pub loaded: LoadedSystem,
    pub df: DesingField,
    pub bl: BalanceLaw,
}

impl Pipeline {
    pub fn new(loaded: LoadedSystem) -> Self {
        let df = DesingField::build(&loaded.sys);
        let bl = BalanceLaw::new(&loaded.sys);
        Pipeline { loaded, df, bl }
    }

    pub fn search(&self, seed: u64) -> RootSearch {
        RootSearch { seeds: self.loaded.seeds(), seed, ..RootSearch::default() }
    }

    /// Embedded initial point from either `x0` or original coordinates `y0`.
    pub fn initial_point(&self, x0: Option<&[f64]>, y0: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = self.df.dim();
        let x = match (x0, y0) {
            (Some(x), None) => x.to_vec(),
            (None, Some(y)) => {
                if y.len() != n {
                    return Err(Error::Usage(format!("--y0 needs {n} components, got {}", y.len())));
                }
                self.df.spec.embed(0.0, y).x
            }
            _ => return Err(Error::Usage("give exactly one of --x0 and --y0".into())),
        };
        if x.len() != n {
            return Err(Error::Usage(format!("--x0 needs {n} components, got {}", x.len())));
        }
        let p2c = self.df.spec.p2c(&x);
        if !(p2c <= 1.0) {
            return Err(Error::Usage(format!("initial point lies outside the compactified ball (p2c = {p2c})")));
        }
        Ok(x)
    }

    pub fn integrate(&self, t0: f64, x0: &[f64], opts: &FlowOptions) -> Trajectory {
        flow::integrate(&self.df, t0, x0, opts)
    }

    /// The balance root matching the limit point of a converged trajectory,
    /// solved at `t = t_max` and seeded with `r^Λ x_last`.
    pub fn limit_root(&self, traj: &Trajectory, tmax: &TmaxEstimate, seed: u64) -> Result<BalanceRoot> {
        let last = traj.last();
        let k = self.df.k();
        let guess = if last.big_g > 0.0 {
            self.df.spec.scale((k * last.big_g).powf(-1.0 / k), &last.x)
        } else {
            last.x.clone()
        };
        if let Some(root) = self.bl.newton(tmax.value, &guess) {
            if root.y0.iter().any(|v| v.abs() > 1e-8) {
                return Ok(root);
            }
        }
        let dist = |r: &BalanceRoot| r.y0.iter().zip(&guess).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        self.bl
            .find_roots(tmax.value, &self.search(seed))
            .into_iter()
            .min_by(|a, b| dist(a).total_cmp(&dist(b)))
            .ok_or_else(|| Error::Core(horizon_core::Error::Insufficient(format!("no balance root at t = {}", tmax.value))))
    }

    pub fn analyze(&self, root: &BalanceRoot) -> Result<SpectralReport> {
        Ok(correspondence::analyze(&self.bl, &self.df, root)?)
    }

    /// Balance roots at `t` with their full correspondence analysis.
    pub fn correspond(&self, t: f64, seed: u64) -> Vec<(BalanceRoot, Result<SpectralReport>)> {
        self.bl
            .find_roots(t, &self.search(seed))
            .into_iter()
            .map(|r| {
                let a = self.analyze(&r);
                (r, a)
            })
            .collect()
    }

    pub fn report(&self, cfg: &RunConfig) -> Report {
        let traj = self.integrate(cfg.t0, &cfg.x0, &cfg.flow);
        let mut rep = Report {
            system: self.loaded.sys.name.clone(),
            params: self.loaded.file.params.clone(),
            seed: cfg.seed,
            h: cfg.flow.h,
            tau_max: cfg.flow.tau_max,
            t0: cfg.t0,
            x0: cfg.x0.clone(),
            y0: cfg.y0.clone(),
            flow: FlowRecord::new(&traj, None),
            analysis: None,
            rate_fit: None,
            checks: Vec::new(),
            error: None,
        };
        rep.checks.push(CheckRecord::at_most(
            "kappa growth rate equals G along the trajectory",
            flow::kappa_growth_residual(&traj, KAPPA_GROWTH_FLOOR),
            KAPPA_GROWTH_TOL,
        ));
        let tmax = match flow::t_max(&self.df, &traj) {
            Ok(t) => t,
            Err(e) => {
                rep.error = Some(e.to_string());
                return rep;
            }
        };
        rep.flow = FlowRecord::new(&traj, Some(&tmax));
        rep.checks.push(CheckRecord::flag("t_max quadrature agrees with the limit of t", tmax.consistent));

        let analysis = self.limit_root(&traj, &tmax, cfg.seed).and_then(|root| Ok((self.analyze(&root)?, root)));
        let (spectral, root) = match analysis {
            Ok(a) => a,
            Err(e) => {
                rep.error = Some(e.to_string());
                return rep;
            }
        };
        let record = AnalysisRecord::new(&self.loaded.sys, &spectral);
        rep.checks.push(CheckRecord::at_most("Spec(Dg) correspondence", Some(record.spectrum_mismatch), SPECTRUM_TOL));
        rep.checks.push(CheckRecord::at_most("eigenvector residuals", Some(record.max_vector_residual), VECTOR_TOL));
        rep.checks.push(CheckRecord::at_most(
            "A^ext (0, ΛY0) = (0, ΛY0)",
            Some(spectral.prop_one_residual),
            PROP_ONE_TOL,
        ));
        rep.checks.push(CheckRecord::flag("stable dimension m_A + 1", spectral.stability_gap_holds()));
        rep.analysis = Some(record);

        let fit = flow::rate_check(&self.df, &traj, &tmax, &root.y0);
        let fit = RateFitRecord::new(&self.loaded.sys, &fit);
        rep.checks.push(CheckRecord::flag("blow-up rate fit", fit.status != "fail"));
        rep.rate_fit = Some(fit);
        rep
    }

    /// One row per `t0`, computed in parallel and returned in input order.
    pub fn sweep(&self, t0s: &[f64], x0: &[f64], opts: &FlowOptions) -> Vec<SweepRow> {
        let opts = FlowOptions { record_every: opts.record_every.max(1000), ..opts.clone() };
        t0s.par_iter()
            .map(|&t0| {
                let traj = self.integrate(t0, x0, &opts);
                match flow::t_max(&self.df, &traj) {
                    Ok(tm) => {
                        let x = &traj.last().x;
                        let prod = if x.len() >= 3 { x[0] * x[2] } else { f64::NAN };
                        let driver = self.loaded.driver.as_ref().and_then(|d| d.eval(tm.value, &[]).ok());
                        SweepRow { t0, t_max: Some(tm.value), sign: Some(sign_label(prod)), driver, status: "converged".into() }
                    }
                    Err(_) => SweepRow {
                        t0,
                        t_max: None,
                        sign: None,
                        driver: None,
                        status: crate::report::status_label(&traj.status),
                    },
                }
            })
            .collect()
    }
}

fn sign_label(v: f64) -> String {
    if v > 0.0 {
        "+".into()
    } else if v < 0.0 {
        "-".into()
    } else {
        "0".into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub t0: f64,
    pub x0: Vec<f64>,
    /// Original-coordinate start, if that is how the run was specified.
    pub y0: Option<Vec<f64>>,
    pub seed: u64,
    pub flow: FlowOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub t0: f64,
    pub t_max: Option<f64>,
    /// `+`, `-` or `0` for `x1 x3` at the limit point.
    pub sign: Option<String>,
    /// Driver coefficient at `t_max`.
    pub driver: Option<f64>,
    pub status: String,
}
