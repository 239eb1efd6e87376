//! Serializable records of analysis results, and re-verification of stored
//! eigenpairs.

use std::collections::BTreeMap;

use horizon_core::balance::BalanceRoot;
use horizon_core::correspondence::{PairKind, SpectralReport, VerdictStatus};
use horizon_core::flow::{FitStatus, FlowStatus, RateFit, TmaxEstimate, Trajectory};
use horizon_core::linalg::{self, C64};
use horizon_core::nalgebra::{DMatrix, DVector};
use horizon_core::system::SystemDef;
use serde::{Deserialize, Serialize};

/// Complex number as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cx(pub f64, pub f64);

impl From<C64> for Cx {
    fn from(z: C64) -> Self {
        Cx(z.re, z.im)
    }
}

impl From<Cx> for C64 {
    fn from(z: Cx) -> Self {
        C64::new(z.0, z.1)
    }
}

fn cxs(v: &[C64]) -> Vec<Cx> {
    v.iter().map(|&z| z.into()).collect()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>]) -> DMatrix<f64> {
    let n = r.len();
    let m = r.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, m, |i, j| r[i][j])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenpairRecord {
    pub kind: String,
    pub value: Cx,
    pub vector: Vec<Cx>,
    pub residual: f64,
}

impl EigenpairRecord {
    fn real(kind: &str, value: f64, v: &DVector<f64>, residual: f64) -> Self {
        EigenpairRecord {
            kind: kind.into(),
            value: Cx(value, 0.0),
            vector: v.iter().map(|&a| Cx(a, 0.0)).collect(),
            residual,
        }
    }

    fn complex(kind: String, value: C64, v: &DVector<C64>, residual: f64) -> Self {
        EigenpairRecord { kind, value: value.into(), vector: cxs(v.as_slice()), residual }
    }

    /// `‖M v − λ v‖ / ‖v‖` recomputed from the stored numbers.
    pub fn recompute(&self, m: &DMatrix<f64>) -> f64 {
        let v = DVector::from_iterator(self.vector.len(), self.vector.iter().map(|&z| C64::from(z)));
        linalg::eig_residual(m, self.value.into(), &v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootRecord {
    pub t_star: f64,
    pub y0: Vec<f64>,
    pub residual_norm: f64,
    pub r_y0: f64,
}

impl From<&BalanceRoot> for RootRecord {
    fn from(r: &BalanceRoot) -> Self {
        RootRecord { t_star: r.t_star, y0: r.y0.clone(), residual_norm: r.residual_norm, r_y0: r.r_y0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransversalRecord {
    pub value: f64,
    pub vector: Vec<f64>,
    pub d: Option<f64>,
    pub d_numerator: Option<f64>,
    pub d_denominator: Option<f64>,
    pub restricted_inverse: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub state: String,
    pub coefficient: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceRecord {
    pub combination: Vec<usize>,
    pub target: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    /// `exists` or `inconclusive`.
    pub status: String,
    pub min_abs_re: f64,
    pub m_a: usize,
    pub m: usize,
    pub m_dg: usize,
    pub stability_gap: bool,
    pub rates: Vec<RateRecord>,
    pub resonances: Vec<ResonanceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroRecord {
    pub tangency: f64,
    pub projected: Vec<f64>,
    pub projection_residual: f64,
}

/// Everything `correspond` knows about one balance root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub root: RootRecord,
    pub x_star: Vec<f64>,
    pub c_star: f64,
    pub r: f64,
    pub spec_a: Vec<Cx>,
    pub spec_a_ext: Vec<Cx>,
    pub spec_dg: Vec<Cx>,
    pub spec_dg_predicted: Vec<Cx>,
    pub spectrum_mismatch: f64,
    pub a_ext: Vec<Vec<f64>>,
    pub dg: Vec<Vec<f64>>,
    pub a_ext_pairs: Vec<EigenpairRecord>,
    pub dg_pairs: Vec<EigenpairRecord>,
    pub transversal: TransversalRecord,
    pub zero: ZeroRecord,
    pub vectors_checked: bool,
    pub decomposition_residual: f64,
    pub max_vector_residual: f64,
    pub verdict: VerdictRecord,
}

fn kind_label(kind: PairKind) -> String {
    match kind {
        PairKind::Zero => "zero".into(),
        PairKind::Transversal => "transversal".into(),
        PairKind::Tangential(l) => format!("tangential({:?}{:+?}i)", l.re, l.im),
    }
}

impl AnalysisRecord {
    pub fn new(sys: &SystemDef, rep: &SpectralReport) -> Self {
        let n = sys.dim();
        let mut lam_y = DVector::zeros(n + 1);
        for i in 0..n {
            lam_y[i + 1] = sys.sig.alpha_f(i) * rep.root.y0[i];
        }
        let a_ext_pairs = vec![
            EigenpairRecord::real("one", 1.0, &lam_y, rep.prop_one_residual),
            EigenpairRecord::real("zero", 0.0, &rep.zero.a_ext_vector, rep.zero.a_ext_residual),
        ];
        let mut dg_pairs: Vec<EigenpairRecord> = rep
            .dg_pairs
            .iter()
            .map(|p| EigenpairRecord::complex(format!("computed {}", kind_label(p.kind)), p.value, &p.vector, p.residual))
            .collect();
        dg_pairs.push(EigenpairRecord::real("transversal", rep.transversal.value, &rep.transversal.vector, rep.transversal.residual));
        dg_pairs.push(EigenpairRecord::real("zero", 0.0, &rep.zero.dg_vector, rep.zero.dg_residual));
        if rep.vectors_checked {
            for m in &rep.tangential {
                dg_pairs.push(EigenpairRecord::complex(
                    format!("predicted {}", kind_label(PairKind::Tangential(m.lambda_tilde))),
                    m.predicted,
                    &m.vector,
                    m.residual,
                ));
            }
        }
        let v = &rep.verdict;
        let verdict = VerdictRecord {
            status: match v.status {
                VerdictStatus::Exists => "exists".into(),
                VerdictStatus::Inconclusive => "inconclusive".into(),
            },
            min_abs_re: v.min_abs_re,
            m_a: v.m_a,
            m: v.m,
            m_dg: rep.m_dg,
            stability_gap: rep.stability_gap_holds(),
            rates: v
                .rates
                .iter()
                .map(|r| RateRecord { state: sys.states[r.index].clone(), coefficient: r.coefficient, exponent: r.exponent })
                .collect(),
            resonances: v
                .resonances
                .iter()
                .map(|r| ResonanceRecord { combination: r.combination.clone(), target: r.target, value: r.value })
                .collect(),
        };
        let t = &rep.transversal;
        AnalysisRecord {
            root: (&rep.root).into(),
            x_star: rep.eq.x_star.clone(),
            c_star: rep.eq.c_star,
            r: rep.eq.r,
            spec_a: cxs(&rep.power.spec_a),
            spec_a_ext: cxs(&rep.power.spec_ext),
            spec_dg: cxs(&rep.spec_dg),
            spec_dg_predicted: cxs(&rep.predicted_dg),
            spectrum_mismatch: rep.spectrum_mismatch,
            a_ext: rows(&rep.power.a_ext),
            dg: rows(&rep.dec.dg),
            a_ext_pairs,
            dg_pairs,
            transversal: TransversalRecord {
                value: t.value,
                vector: t.vector.iter().copied().collect(),
                d: t.d,
                d_numerator: t.d_numerator,
                d_denominator: t.d_denominator,
                restricted_inverse: t.restricted_inverse,
                residual: t.residual,
            },
            zero: ZeroRecord {
                tangency: rep.zero.tangency,
                projected: rep.zero.projected.iter().copied().collect(),
                projection_residual: rep.zero.projection_residual,
            },
            vectors_checked: rep.vectors_checked,
            decomposition_residual: rep.dec.decomposition_residual,
            max_vector_residual: rep.max_vector_residual(),
            verdict,
        }
    }

    /// Largest difference between stored and recomputed eigenpair residuals.
    pub fn reverify(&self) -> f64 {
        let a_ext = from_rows(&self.a_ext);
        let dg = from_rows(&self.dg);
        let a = self.a_ext_pairs.iter().map(|p| (p.recompute(&a_ext) - p.residual).abs());
        let d = self.dg_pairs.iter().map(|p| (p.recompute(&dg) - p.residual).abs());
        a.chain(d).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub tau: f64,
    pub t: f64,
    pub x: Vec<f64>,
    pub p2c: f64,
    pub big_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmaxRecord {
    pub value: f64,
    pub t_limit: f64,
    pub tail: f64,
    pub discrepancy: f64,
    pub consistent: bool,
}

impl From<&TmaxEstimate> for TmaxRecord {
    fn from(e: &TmaxEstimate) -> Self {
        TmaxRecord { value: e.value, t_limit: e.t_limit, tail: e.tail, discrepancy: e.discrepancy, consistent: e.consistent }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub status: String,
    pub steps: usize,
    pub renormalizations: usize,
    pub last: PointRecord,
    pub t_max: Option<TmaxRecord>,
}

pub fn status_label(s: &FlowStatus) -> String {
    match s {
        FlowStatus::Converged => "converged".into(),
        FlowStatus::MaxTau => "max-tau".into(),
        FlowStatus::DomainError(e) => format!("domain-error: {e}"),
        FlowStatus::Overshoot { p2c } => format!("overshoot: p2c = {p2c}"),
    }
}

impl FlowRecord {
    pub fn new(traj: &Trajectory, tmax: Option<&TmaxEstimate>) -> Self {
        let l = traj.last();
        FlowRecord {
            status: status_label(&traj.status),
            steps: traj.steps,
            renormalizations: traj.renormalizations,
            last: PointRecord { tau: l.tau, t: l.t, x: l.x.clone(), p2c: l.p2c, big_g: l.big_g },
            t_max: tmax.map(Into::into),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFitRecord {
    pub state: String,
    pub slope: f64,
    pub expected_slope: f64,
    pub coefficient: f64,
    pub expected_coefficient: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFitRecord {
    /// `pass`, `fail` or `inconclusive`.
    pub status: String,
    pub theta_window: (f64, f64),
    pub samples: usize,
    pub components: Vec<ComponentFitRecord>,
}

impl RateFitRecord {
    pub fn new(sys: &SystemDef, fit: &RateFit) -> Self {
        RateFitRecord {
            status: match fit.status {
                FitStatus::Pass => "pass",
                FitStatus::Fail => "fail",
                FitStatus::Inconclusive => "inconclusive",
            }
            .into(),
            theta_window: fit.window,
            samples: fit.samples,
            components: fit
                .components
                .iter()
                .map(|c| ComponentFitRecord {
                    state: sys.states[c.index].clone(),
                    slope: c.slope,
                    expected_slope: c.expected_slope,
                    coefficient: c.coefficient,
                    expected_coefficient: c.expected_coefficient,
                    pass: c.slope_ok && c.coefficient_ok,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub value: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRecord {
    pub fn at_most(name: &str, value: Option<f64>, tolerance: f64) -> Self {
        CheckRecord { name: name.into(), value, tolerance, pass: value.is_some_and(|v| v <= tolerance) }
    }

    pub fn flag(name: &str, pass: bool) -> Self {
        CheckRecord { name: name.into(), value: None, tolerance: 0.0, pass }
    }
}

/// Output of the `report` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub system: String,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
    pub h: f64,
    pub tau_max: f64,
    pub t0: f64,
    pub x0: Vec<f64>,
    pub y0: Option<Vec<f64>>,
    pub flow: FlowRecord,
    pub analysis: Option<AnalysisRecord>,
    pub rate_fit: Option<RateFitRecord>,
    pub checks: Vec<CheckRecord>,
    /// Set when the pipeline stopped early; the fields above are partial.
    pub error: Option<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass)
    }

    pub fn reverify(&self) -> Option<f64> {
        self.analysis.as_ref().map(AnalysisRecord::reverify)
    }
}
