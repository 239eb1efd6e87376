//! Eigenstructure correspondence between the blow-up power-determining
//! matrix `A^ext` at a balance root and the Jacobian `Dg^ext_*` at the
//! paired horizon equilibrium, plus the type-I blow-up existence verdict.
//!
//! With `r = (kC*)^{−1/k}`:
//! - `0` is an eigenvalue on both sides (the nonautonomous direction);
//! - `−C*` is the transversal eigenvalue of `Dg`, the image of `λ̃ = 1`;
//! - every other `λ̃ ∈ Spec(A)` appears in `Spec(Dg)` as `r^{−k} λ̃`, with
//!   eigenvector `(I − P) r^{−Λ^ext} (0, Ũ)`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::balance::{self, BalanceLaw, BalanceRoot, BlowupPowerMatrix, HorizonEquilibrium};
use crate::desing::{DesingField, EquilibriumDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{self, cabs, C64};

/// Spectral distance under which `−C*` is considered an eigenvalue of `A_g`.
pub const RESOLVENT_GUARD: f64 = 1e-8;
/// `d` formula denominator below this is degenerate.
pub const D_DENOMINATOR_TOL: f64 = 1e-12;
/// Eigenvalues of `A` closer than this count as a repeated spectrum.
pub const SIMPLE_SPECTRUM_TOL: f64 = 1e-8;
/// `|Re λ|` below this leaves the existence criterion inconclusive.
pub const IMAGINARY_AXIS_TOL: f64 = 1e-8;
/// Integer combinations closer than this to another eigenvalue are flagged.
pub const RESONANCE_TOL: f64 = 1e-6;
/// Relative matching tolerance for spectra.
pub const MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairKind {
    Zero,
    Transversal,
    /// Image of this eigenvalue of `A`.
    Tangential(C64),
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: C64,
    pub vector: DVector<C64>,
    pub residual: f64,
    pub kind: PairKind,
}

#[derive(Debug, Clone)]
pub struct TransversalPair {
    pub value: f64,
    /// Time component 1 when `k = 1`; `(0, Λx*)` otherwise.
    pub vector: DVector<f64>,
    pub d: Option<f64>,
    pub d_numerator: Option<f64>,
    pub d_denominator: Option<f64>,
    /// `−C*` was (numerically) in `Spec(A_g)` and the restricted inverse was used.
    pub restricted_inverse: bool,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ZeroPairs {
    /// `(1, −A^{−1} D_t f_qh)`.
    pub a_ext_vector: DVector<f64>,
    pub a_ext_residual: f64,
    /// `(1, −(D_x g)^{−1} (D_t g))`.
    pub dg_vector: DVector<f64>,
    pub dg_residual: f64,
    /// `|∇p_αᵀ w|` for the `Dg` vector.
    pub tangency: f64,
    /// `(I − P) r^{−Λ^ext} (1, ṽ)`.
    pub projected: DVector<f64>,
    /// `‖projected − dg_vector‖`.
    pub projection_residual: f64,
}

#[derive(Debug, Clone)]
pub struct TangentialMatch {
    pub lambda_tilde: C64,
    /// `r^{−k} λ̃`.
    pub predicted: C64,
    /// Closest computed eigenvalue of `Dg`.
    pub computed: C64,
    /// `(I − P) r^{−Λ^ext} (0, Ũ)`, unit-normalized.
    pub vector: DVector<C64>,
    pub residual: f64,
    /// Residual of `A^ext U = λ̃ U` for `U = r^{Λ^ext}(A_g − kC*I) w` built from
    /// the computed `Dg` eigenvector `w`; `None` if vectors were not compared.
    pub reverse_residual: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictStatus {
    Exists,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePrediction {
    pub index: usize,
    /// `Y0_i`.
    pub coefficient: f64,
    /// `−α_i / k`.
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resonance {
    /// Multiset of indices into the checked spectrum.
    pub combination: Vec<usize>,
    pub target: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupVerdict {
    pub status: VerdictStatus,
    pub min_abs_re: f64,
    pub m_a: usize,
    /// Predicted stable dimension `m_A + 1` at the horizon equilibrium.
    pub m: usize,
    pub rates: Vec<RatePrediction>,
    /// The spectrum the resonance scan ran on (`Spec(Dg) \ {0}`, predicted).
    pub scanned: Vec<C64>,
    pub resonances: Vec<Resonance>,
}

#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub root: BalanceRoot,
    pub eq: HorizonEquilibrium,
    pub power: BlowupPowerMatrix,
    pub dec: EquilibriumDecomposition,
    pub spec_dg: Vec<C64>,
    pub predicted_dg: Vec<C64>,
    pub spectrum_mismatch: f64,
    /// `‖A^ext (0, ΛY0) − (0, ΛY0)‖ / ‖(0, ΛY0)‖`.
    pub prop_one_residual: f64,
    pub transversal: TransversalPair,
    pub zero: ZeroPairs,
    pub tangential: Vec<TangentialMatch>,
    pub dg_pairs: Vec<Eigenpair>,
    pub vectors_checked: bool,
    /// Stable dimension counted on the computed `Spec(Dg)`.
    pub m_dg: usize,
    pub verdict: BlowupVerdict,
}

impl SpectralReport {
    /// Largest eigenvector verification residual in the report.
    pub fn max_vector_residual(&self) -> f64 {
        let mut worst = self
            .prop_one_residual
            .max(self.transversal.residual)
            .max(self.zero.a_ext_residual)
            .max(self.zero.dg_residual)
            .max(self.zero.projection_residual);
        for m in &self.tangential {
            worst = worst.max(m.residual).max(m.reverse_residual.unwrap_or(0.0));
        }
        for p in &self.dg_pairs {
            worst = worst.max(p.residual);
        }
        worst
    }

    pub fn stability_gap_holds(&self) -> bool {
        self.m_dg == self.verdict.m_a + 1
    }
}

fn rel_residual(m: &DMatrix<f64>, lambda: f64, v: &DVector<f64>) -> f64 {
    (m * v - v * lambda).norm() / v.norm().max(f64::MIN_POSITIVE)
}

/// `(M + r lᵀ/(lᵀr))^{−1} (I − r lᵀ/(lᵀr))`, the inverse of `M` on the
/// complement of its (simple, real) null direction.
fn restricted_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let right = linalg::eigenvector(m, C64::new(0.0, 0.0)).map(|z| z.re);
    let left = linalg::eigenvector(&m.transpose(), C64::new(0.0, 0.0)).map(|z| z.re);
    let lr = left.dot(&right);
    if libm::fabs(lr) < D_DENOMINATOR_TOL {
        return Err(Error::FormulaDegenerate { what: "spectral projector lᵀr", denominator: lr });
    }
    let proj = &right * left.transpose() / lr;
    let shifted = m + &proj;
    let inv = shifted.try_inverse().ok_or(Error::Singular("restricted resolvent"))?;
    Ok(inv * (DMatrix::identity(n, n) - proj))
}

/// Transversal eigenvector for `k = 1` from its closed form:
/// `(1, (C*/2c) v + d·INV v − INV D_t g)` with `INV = (A_g + C* I)^{−1}` and
/// `d = ∇pᵀ INV D_t g / ∇pᵀ INV v`.
pub fn transversal_vector_k1(
    a_g: &DMatrix<f64>,
    c_star: f64,
    c: f64,
    v: &DVector<f64>,
    grad_p: &DVector<f64>,
    dtg: &DVector<f64>,
) -> Result<(DVector<f64>, f64, f64, f64, bool)> {
    let n = a_g.nrows();
    let m = a_g + DMatrix::identity(n, n) * c_star;
    let gap = linalg::eigenvalues(a_g)
        .iter()
        .map(|l| cabs(l + c_star))
        .fold(f64::INFINITY, f64::min);
    let restricted = gap <= RESOLVENT_GUARD;
    let inv = if restricted {
        restricted_inverse(&m)?
    } else {
        m.try_inverse().ok_or(Error::Singular("A_g + C* I"))?
    };
    let inv_v = &inv * v;
    let inv_dtg = &inv * dtg;
    let num = grad_p.dot(&inv_dtg);
    let den = grad_p.dot(&inv_v);
    if libm::fabs(den) < D_DENOMINATOR_TOL {
        return Err(Error::FormulaDegenerate { what: "d = ∇pᵀ INV D_t g / ∇pᵀ INV v", denominator: den });
    }
    let d = num / den;
    let w = v * (c_star / (2.0 * c)) + inv_v * d - inv_dtg;
    let mut out = DVector::zeros(n + 1);
    out[0] = 1.0;
    out.rows_mut(1, n).copy_from(&w);
    Ok((out, d, num, den, restricted))
}

/// The eigenpair of `Dg^ext_*` for `−C*`.
pub fn transversal_pair(dec: &EquilibriumDecomposition, k: f64, c: f64) -> Result<TransversalPair> {
    let c_star = dec.c_star;
    if c_star <= balance::DEGENERATE_C_STAR {
        return Err(Error::DegenerateEquilibrium { c_star });
    }
    if k != 1.0 {
        let v = dec.v.clone();
        let residual = rel_residual(&dec.dg, -c_star, &v);
        return Ok(TransversalPair {
            value: -c_star,
            vector: v,
            d: None,
            d_numerator: None,
            d_denominator: None,
            restricted_inverse: false,
            residual,
        });
    }
    let (vector, d, num, den, restricted) =
        transversal_vector_k1(&dec.a_g_block(), c_star, c, &dec.v_alpha(), &dec.grad_p(), &dec.dtg())?;
    let residual = rel_residual(&dec.dg, -c_star, &vector);
    Ok(TransversalPair {
        value: -c_star,
        vector,
        d: Some(d),
        d_numerator: Some(num),
        d_denominator: Some(den),
        restricted_inverse: restricted,
        residual,
    })
}

/// Zero eigenpairs of `A^ext` and `Dg^ext_*` coming from the time direction.
pub fn nonautonomous_zero_pairs(pm: &BlowupPowerMatrix, dec: &EquilibriumDecomposition, r: f64) -> Result<ZeroPairs> {
    let n = dec.dim();
    let tilde = linalg::solve(&pm.a, &(-&pm.dt_col), "A")?;
    let mut a_vec = DVector::zeros(n + 1);
    a_vec[0] = 1.0;
    a_vec.rows_mut(1, n).copy_from(&tilde);
    let a_ext_residual = rel_residual(&pm.a_ext, 0.0, &a_vec);

    let w = linalg::solve(&dec.dxg(), &(-dec.dtg()), "D_x g")?;
    let mut dg_vec = DVector::zeros(n + 1);
    dg_vec[0] = 1.0;
    dg_vec.rows_mut(1, n).copy_from(&w);
    let dg_residual = rel_residual(&dec.dg, 0.0, &dg_vec);
    let tangency = libm::fabs(dec.grad_p().dot(&w));

    let mut scaled = a_vec.clone();
    for i in 0..n {
        scaled[i + 1] *= libm::pow(r, -dec.alpha[i]);
    }
    let projected = &scaled - &dec.p * &scaled;
    let projection_residual = (&projected - &dg_vec).norm();
    Ok(ZeroPairs { a_ext_vector: a_vec, a_ext_residual, dg_vector: dg_vec, tangency, projected, projection_residual, dg_residual })
}

fn scale_ext(dec: &EquilibriumDecomposition, r: f64, sign: f64, v: &DVector<C64>) -> DVector<C64> {
    let mut out = v.clone();
    for i in 0..dec.dim() {
        out[i + 1] *= libm::pow(r, sign * dec.alpha[i]);
    }
    out
}

/// Map each eigenpair of `A` (except `λ̃ = 1`) to its predicted tangential
/// eigenpair of `Dg` and verify it; `check_vectors = false` downgrades to
/// eigenvalue-only matching.
pub fn tangential_match(
    pm: &BlowupPowerMatrix,
    dec: &EquilibriumDecomposition,
    spec_dg: &[C64],
    r: f64,
    k: f64,
    check_vectors: bool,
) -> Result<Vec<TangentialMatch>> {
    let n = dec.dim();
    let skip = index_of_one(&pm.spec_a);
    let p = linalg::to_complex(&dec.p);
    let eye = DMatrix::<C64>::identity(n + 1, n + 1);
    let rk = libm::pow(r, -k);
    let mut out = Vec::new();
    for (idx, &lt) in pm.spec_a.iter().enumerate() {
        if Some(idx) == skip {
            continue;
        }
        let predicted = lt * rk;
        let computed = spec_dg
            .iter()
            .copied()
            .min_by(|a, b| cabs(a - predicted).total_cmp(&cabs(b - predicted)))
            .ok_or(Error::Insufficient("empty Dg spectrum".into()))?;
        if cabs(computed - predicted) > MATCH_TOL * (1.0 + cabs(predicted)) {
            return Err(Error::Consistency {
                what: "tangential eigenvalue correspondence",
                residual: cabs(computed - predicted),
            });
        }
        let u = linalg::eigenvector(&pm.a, lt);
        let mut ext = DVector::zeros(n + 1);
        ext.rows_mut(1, n).copy_from(&u);
        let w = linalg::normalize(&((&eye - &p) * scale_ext(dec, r, -1.0, &ext)));
        let residual = if check_vectors { linalg::eig_residual(&dec.dg, predicted, &w) } else { 0.0 };

        let reverse_residual = if check_vectors {
            // (I − P) removes any transversal component, which matters when
            // −C* coincides with a tangential eigenvalue
            let raw = linalg::eigenvector(&dec.dg, computed);
            let proj = (&eye - &p) * &raw;
            let wd = if proj.norm() > 1e-6 { linalg::normalize(&proj) } else { w.clone() };
            let shift = linalg::to_complex(&(&dec.a_g - DMatrix::identity(n + 1, n + 1) * (k * dec.c_star)));
            let back = scale_ext(dec, r, 1.0, &(shift * wd));
            Some(linalg::eig_residual(&pm.a_ext, lt, &back))
        } else {
            None
        };
        out.push(TangentialMatch { lambda_tilde: lt, predicted, computed, vector: w, residual, reverse_residual });
    }
    Ok(out)
}

/// Index of the eigenvalue closest to 1 if it is within matching tolerance.
fn index_of_one(spec: &[C64]) -> Option<usize> {
    let one = C64::new(1.0, 0.0);
    spec.iter()
        .enumerate()
        .min_by(|a, b| cabs(a.1 - one).total_cmp(&cabs(b.1 - one)))
        .filter(|(_, z)| cabs(*z - one) <= MATCH_TOL * 2.0)
        .map(|(i, _)| i)
}

/// `{0} ∪ {−C*} ∪ r^{−k}(Spec(A) \ {1})`, labeled.
pub fn predicted_dg_spectrum(pm: &BlowupPowerMatrix, c_star: f64, r: f64, k: f64) -> Vec<(C64, PairKind)> {
    let skip = index_of_one(&pm.spec_a);
    let rk = libm::pow(r, -k);
    let mut out = alloc::vec![
        (C64::new(0.0, 0.0), PairKind::Zero),
        (C64::new(-c_star, 0.0), PairKind::Transversal),
    ];
    for (i, &l) in pm.spec_a.iter().enumerate() {
        if Some(i) != skip {
            out.push((l * rk, PairKind::Tangential(l)));
        }
    }
    out
}

fn count_stable(spec: &[C64]) -> usize {
    spec.iter().filter(|z| z.re < -IMAGINARY_AXIS_TOL).count()
}

/// Type-I blow-up criterion: no eigenvalue of `A` on the imaginary axis.
pub fn existence_verdict(pm: &BlowupPowerMatrix, root: &BalanceRoot, alpha: &[u32], k: f64, scanned: Vec<C64>) -> BlowupVerdict {
    let min_abs_re = pm.spec_a.iter().map(|z| libm::fabs(z.re)).fold(f64::INFINITY, f64::min);
    let status = if min_abs_re < IMAGINARY_AXIS_TOL { VerdictStatus::Inconclusive } else { VerdictStatus::Exists };
    let m_a = count_stable(&pm.spec_a);
    let rates = root
        .y0
        .iter()
        .enumerate()
        .filter(|(_, y)| **y != 0.0)
        .map(|(i, &y)| RatePrediction { index: i, coefficient: y, exponent: -(alpha[i] as f64) / k })
        .collect();
    let resonances = resonance_scan(&scanned);
    BlowupVerdict { status, min_abs_re, m_a, m: m_a + 1, rates, scanned, resonances }
}

/// All `Σ a_j λ_j − λ_l` with `a_j ∈ ℕ`, `Σ a_j ∈ {2, 3}` and modulus below
/// [`RESONANCE_TOL`].
pub fn resonance_scan(spec: &[C64]) -> Vec<Resonance> {
    let n = spec.len();
    let mut out = Vec::new();
    let mut check = |combo: Vec<usize>| {
        let sum: C64 = combo.iter().map(|&i| spec[i]).sum();
        for (l, &target) in spec.iter().enumerate() {
            let v = cabs(sum - target);
            if v < RESONANCE_TOL {
                out.push(Resonance { combination: combo.clone(), target: l, value: v });
            }
        }
    };
    for a in 0..n {
        for b in a..n {
            check(alloc::vec![a, b]);
            for c in b..n {
                check(alloc::vec![a, b, c]);
            }
        }
    }
    out
}

/// Full correspondence analysis for one balance root.
pub fn analyze(bl: &BalanceLaw, df: &DesingField, root: &BalanceRoot) -> Result<SpectralReport> {
    let n = df.dim();
    let k = df.k();
    let eq = balance::root_to_equilibrium(df, root)?;
    let power = bl.power_matrix(root)?;
    let dec = df.decompose_at_equilibrium(eq.t_star, &eq.x_star)?;
    let r = eq.r;

    let mut lam_y = DVector::zeros(n + 1);
    for i in 0..n {
        lam_y[i + 1] = df.sys.sig.alpha_f(i) * root.y0[i];
    }
    let prop_one_residual = rel_residual(&power.a_ext, 1.0, &lam_y);

    let spec_dg = linalg::eigenvalues(&dec.dg);
    let labeled = predicted_dg_spectrum(&power, eq.c_star, r, k);
    let predicted: Vec<C64> = labeled.iter().map(|p| p.0).collect();
    let matching = linalg::match_spectra(&predicted, &spec_dg, MATCH_TOL).map_err(|z| Error::Consistency {
        what: "Spec(Dg) = {0} ∪ {−C*} ∪ r^{−k}(Spec(A) \\ {1})",
        residual: spec_dg.iter().map(|w| cabs(w - z)).fold(f64::INFINITY, f64::min),
    })?;
    let spectrum_mismatch = matching.iter().map(|m| m.2).fold(0.0, f64::max);

    let vectors_checked = linalg::min_gap(&power.spec_a) >= SIMPLE_SPECTRUM_TOL;
    let dg_pairs = matching
        .iter()
        .map(|&(i, j, _)| {
            let value = spec_dg[j];
            let vector = linalg::eigenvector(&dec.dg, value);
            let residual = linalg::eig_residual(&dec.dg, value, &vector);
            Eigenpair { value, vector, residual, kind: labeled[i].1 }
        })
        .collect();

    let transversal = transversal_pair(&dec, k, df.c())?;
    let zero = nonautonomous_zero_pairs(&power, &dec, r)?;
    let tangential = tangential_match(&power, &dec, &spec_dg, r, k, vectors_checked)?;
    let scanned: Vec<C64> = predicted[1..].to_vec();
    let verdict = existence_verdict(&power, root, &df.sys.sig.alpha, k, scanned);
    let m_dg = count_stable(&spec_dg);

    Ok(SpectralReport {
        root: root.clone(),
        eq,
        power,
        dec,
        spec_dg,
        predicted_dg: predicted,
        spectrum_mismatch,
        prop_one_residual,
        transversal,
        zero,
        tangential,
        dg_pairs,
        vectors_checked,
        m_dg,
        verdict,
    })
}
