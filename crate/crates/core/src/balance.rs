//! Balance law `−(1/k) Λ Y + f_qh(t, Y) = 0`, its roots, and their pairing
//! with horizon equilibria of the desingularized field.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::desing::{DesingField, EQUILIBRIUM_TOL};
use crate::embedding::HORIZON_TOL;
use crate::error::{Error, Result};
use crate::expr::{Expr, ExprError, Var};
use crate::linalg::{self, C64};
use crate::system::SystemDef;

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 100;
pub const NEWTON_MAX_HALVINGS: usize = 30;
pub const DEDUP_TOL: f64 = 1e-8;
pub const TRIVIAL_TOL: f64 = 1e-8;
/// `C*` at or below this makes the root/equilibrium map undefined.
pub const DEGENERATE_C_STAR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceRoot {
    pub t_star: f64,
    pub y0: Vec<f64>,
    pub residual_norm: f64,
    /// `p_α(Y0)`.
    pub r_y0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonEquilibrium {
    pub t_star: f64,
    pub x_star: Vec<f64>,
    pub c_star: f64,
    /// `(k C*)^{−1/k}`.
    pub r: f64,
    pub root: BalanceRoot,
}

#[derive(Debug, Clone)]
pub struct BlowupPowerMatrix {
    /// `−(1/k) Λ^ext + Df^ext_qh(t*, Y0)`; row 0 is zero.
    pub a_ext: DMatrix<f64>,
    /// Lower-right `n × n` block.
    pub a: DMatrix<f64>,
    /// `D_t f_qh(t*, Y0)`.
    pub dt_col: DVector<f64>,
    pub spec_a: Vec<C64>,
    pub spec_ext: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootSearch {
    pub seeds: Vec<Vec<f64>>,
    /// Grid covers `[−half_width, half_width]ⁿ`.
    pub half_width: f64,
    pub points_per_axis: usize,
    pub max_starts: usize,
    /// Extra uniformly random starts in the same box.
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for RootSearch {
    fn default() -> Self {
        RootSearch {
            seeds: Vec::new(),
            half_width: 3.0,
            points_per_axis: 5,
            max_starts: 100_000,
            random_starts: 32,
            seed: 0,
        }
    }
}

/// Balance law of a system with its symbolic Jacobian precomputed.
#[derive(Debug, Clone)]
pub struct BalanceLaw {
    pub sys: SystemDef,
    /// `∂f_qh,i / ∂(t, y_1, …, y_n)`.
    pub jac: Vec<Vec<Expr>>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, a| m.max(libm::fabs(*a)))
}

fn l2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|a| a * a).sum())
}

impl BalanceLaw {
    pub fn new(sys: &SystemDef) -> Self {
        let n = sys.dim();
        let jac = sys
            .qh
            .iter()
            .map(|e| {
                (0..=n)
                    .map(|col| e.diff(if col == 0 { Var::Time } else { Var::State(col - 1) }))
                    .collect()
            })
            .collect();
        BalanceLaw { sys: sys.clone(), jac }
    }

    fn k(&self) -> f64 {
        self.sys.k()
    }

    /// `−(1/k) Λ Y + f_qh(t, Y)`; the trivial time row is omitted.
    pub fn residual(&self, t: f64, y: &[f64]) -> core::result::Result<Vec<f64>, ExprError> {
        let mut f = self.sys.eval_qh(t, y)?;
        for (i, fi) in f.iter_mut().enumerate() {
            *fi -= self.sys.sig.alpha_f(i) / self.k() * y[i];
        }
        Ok(f)
    }

    /// `Df_qh(t, Y)` as an `n × (n+1)` matrix, time column first.
    pub fn df(&self, t: f64, y: &[f64]) -> core::result::Result<DMatrix<f64>, ExprError> {
        let n = self.sys.dim();
        let mut m = DMatrix::zeros(n, n + 1);
        for i in 0..n {
            for col in 0..=n {
                m[(i, col)] = self.jac[i][col].eval(t, y)?;
            }
        }
        Ok(m)
    }

    fn newton_jacobian(&self, t: f64, y: &[f64]) -> core::result::Result<DMatrix<f64>, ExprError> {
        let n = self.sys.dim();
        let df = self.df(t, y)?;
        let mut j = df.columns(1, n).into_owned();
        for i in 0..n {
            j[(i, i)] -= self.sys.sig.alpha_f(i) / self.k();
        }
        Ok(j)
    }

    fn converged(&self, y: &[f64], r: &[f64]) -> bool {
        l2(r) < NEWTON_TOL * inf_norm(y).max(1.0)
    }

    /// Damped Newton from `y`. `None` if the start is abandoned.
    pub fn newton(&self, t: f64, start: &[f64]) -> Option<BalanceRoot> {
        let mut y = start.to_vec();
        let mut r = self.residual(t, &y).ok()?;
        for _ in 0..NEWTON_MAX_ITER {
            if self.converged(&y, &r) {
                break;
            }
            let j = self.newton_jacobian(t, &y).ok()?;
            let rhs = -DVector::from_column_slice(&r);
            let step = linalg::solve(&j, &rhs, "balance Newton").ok()?;
            let r0 = l2(&r);
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..=NEWTON_MAX_HALVINGS {
                let cand: Vec<f64> = y.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
                if let Ok(rc) = self.residual(t, &cand) {
                    if l2(&rc) < r0 {
                        accepted = Some((cand, rc));
                        break;
                    }
                }
                lambda *= 0.5;
            }
            let (ny, nr) = accepted?;
            y = ny;
            r = nr;
        }
        if !self.converged(&y, &r) {
            return None;
        }
        let r_y0 = self.sys.embedding().p_alpha(&y);
        Some(BalanceRoot { t_star: t, residual_norm: l2(&r), y0: y, r_y0 })
    }

    /// Multistart Newton over seeds, a grid, and seeded random starts.
    /// Nontrivial roots are deduplicated and returned in lexicographic order.
    pub fn find_roots(&self, t: f64, search: &RootSearch) -> Vec<BalanceRoot> {
        let n = self.sys.dim();
        let mut starts: Vec<Vec<f64>> = search.seeds.iter().filter(|s| s.len() == n).cloned().collect();

        let mut per_axis = search.points_per_axis.max(1);
        while per_axis > 1 && libm::pow(per_axis as f64, n as f64) > search.max_starts as f64 {
            per_axis -= 1;
        }
        let total = per_axis.pow(n as u32);
        let coord = |i: usize| {
            if per_axis == 1 {
                0.0
            } else {
                -search.half_width + 2.0 * search.half_width * i as f64 / (per_axis - 1) as f64
            }
        };
        for mut idx in 0..total {
            let mut p = Vec::with_capacity(n);
            for _ in 0..n {
                p.push(coord(idx % per_axis));
                idx /= per_axis;
            }
            starts.push(p);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
        for _ in 0..search.random_starts {
            starts.push((0..n).map(|_| rng.random_range(-search.half_width..search.half_width)).collect());
        }

        let mut roots: Vec<BalanceRoot> = Vec::new();
        for s in starts {
            let Some(root) = self.newton(t, &s) else { continue };
            if inf_norm(&root.y0) < TRIVIAL_TOL {
                continue;
            }
            let dup = roots.iter().any(|r| {
                r.y0.iter().zip(&root.y0).all(|(a, b)| libm::fabs(a - b) <= DEDUP_TOL)
            });
            if !dup {
                roots.push(root);
            }
        }
        roots.sort_by(|a, b| {
            a.y0.iter()
                .zip(&b.y0)
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(core::cmp::Ordering::Equal)
        });
        roots
    }

    /// `A^ext = −(1/k) Λ^ext + Df^ext_qh(t*, Y0)`.
    pub fn power_matrix(&self, root: &BalanceRoot) -> Result<BlowupPowerMatrix> {
        let n = self.sys.dim();
        let df = self.df(root.t_star, &root.y0)?;
        let mut a_ext = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for col in 0..=n {
                a_ext[(i + 1, col)] = df[(i, col)];
            }
            a_ext[(i + 1, i + 1)] -= self.sys.sig.alpha_f(i) / self.k();
        }
        let a = a_ext.view((1, 1), (n, n)).into_owned();
        let dt_col = df.column(0).into_owned();
        let spec_a = linalg::eigenvalues(&a);
        let mut spec_ext = spec_a.clone();
        spec_ext.push(C64::new(0.0, 0.0));
        linalg::sort_spectrum(&mut spec_ext);
        Ok(BlowupPowerMatrix { a_ext, a, dt_col, spec_a, spec_ext })
    }
}

/// `x* = r^{−Λ} Y0` with `r = p_α(Y0)`; verifies the horizon equilibrium and
/// the identity `C* = (1/k) r^{−k}`.
pub fn root_to_equilibrium(df: &DesingField, root: &BalanceRoot) -> Result<HorizonEquilibrium> {
    let k = df.k();
    if root.r_y0 <= 0.0 {
        return Err(Error::NotEquilibrium("trivial balance root".into()));
    }
    let x = df.spec.scale(1.0 / root.r_y0, &root.y0);
    let fv = df.eval_field(root.t_star, &x)?;
    if libm::fabs(fv.p2c - 1.0) > HORIZON_TOL {
        return Err(Error::Consistency { what: "p2c(x*) = 1", residual: libm::fabs(fv.p2c - 1.0) });
    }
    if fv.norm() > EQUILIBRIUM_TOL {
        return Err(Error::Consistency { what: "g(t*, x*) = 0", residual: fv.norm() });
    }
    let c_star = fv.big_g;
    let expect = libm::pow(root.r_y0, -k) / k;
    if libm::fabs(c_star - expect) > 1e-9 * (1.0 + expect) {
        return Err(Error::Consistency { what: "C* = r^{-k}/k", residual: libm::fabs(c_star - expect) });
    }
    let r = libm::pow(k * c_star, -1.0 / k);
    Ok(HorizonEquilibrium { t_star: root.t_star, x_star: x, c_star, r, root: root.clone() })
}

/// `Y0 = r^Λ x*` with `r = (k C*)^{−1/k}`.
pub fn equilibrium_to_root(bl: &BalanceLaw, df: &DesingField, t: f64, x: &[f64]) -> Result<BalanceRoot> {
    let k = df.k();
    let fv = df.eval_field(t, x)?;
    if libm::fabs(fv.p2c - 1.0) > HORIZON_TOL || fv.norm() > EQUILIBRIUM_TOL {
        return Err(Error::NotEquilibrium(format!("p2c = {}, |g| = {:e}", fv.p2c, fv.norm())));
    }
    let c_star = fv.big_g;
    if c_star <= DEGENERATE_C_STAR {
        return Err(Error::DegenerateEquilibrium { c_star });
    }
    let r = libm::pow(k * c_star, -1.0 / k);
    let y0 = df.spec.scale(r, x);
    let res = l2(&bl.residual(t, &y0)?);
    if res > 1e-10 * (1.0 + l2(&y0)) {
        return Err(Error::Consistency { what: "balance residual at r^Λ x*", residual: res });
    }
    let r_y0 = df.spec.p_alpha(&y0);
    Ok(BalanceRoot { t_star: t, y0, residual_norm: res, r_y0 })
}

/// Continuation of one root family over a grid of `t` values: each solve is
/// seeded with the previous root.
pub fn continue_family(bl: &BalanceLaw, start: &BalanceRoot, ts: &[f64]) -> Vec<Option<BalanceRoot>> {
    let mut seed = start.y0.clone();
    ts.iter()
        .map(|&t| {
            let r = bl.newton(t, &seed);
            if let Some(r) = &r {
                seed = r.y0.clone();
            }
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn painleve() -> SystemDef {
        SystemDef::parse("p1", &["u", "v"], vec![2, 3], 1.0, &["v", "6*u^2"], &["0", "t"], &[]).unwrap()
    }

    #[test]
    fn painleve_residual_at_root() {
        let bl = BalanceLaw::new(&painleve());
        assert_eq!(bl.residual(3.0, &[1.0, 2.0]).unwrap(), [0.0, 0.0]);
        assert_eq!(bl.residual(3.0, &[0.0, 0.0]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn painleve_single_root() {
        let bl = BalanceLaw::new(&painleve());
        for t in [-1.0, 0.0, 2.0] {
            let roots = bl.find_roots(t, &RootSearch::default());
            assert_eq!(roots.len(), 1);
            assert!((roots[0].y0[0] - 1.0).abs() < 1e-12);
            assert!((roots[0].y0[1] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn painleve_equilibrium_and_back() {
        let sys = painleve();
        let bl = BalanceLaw::new(&sys);
        let df = DesingField::build(&sys);
        let root = bl.find_roots(0.0, &RootSearch::default()).remove(0);
        let eq = root_to_equilibrium(&df, &root).unwrap();
        assert!((eq.r - libm::pow(17.0, 1.0 / 12.0)).abs() < 1e-12);
        assert!((eq.r - root.r_y0).abs() < 1e-10);
        let back = equilibrium_to_root(&bl, &df, eq.t_star, &eq.x_star).unwrap();
        for (a, b) in back.y0.iter().zip(&root.y0) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_c_star_is_degenerate() {
        let sys = SystemDef::parse("flat", &["u"], vec![1], 1.0, &["0"], &["0"], &[]).unwrap();
        let bl = BalanceLaw::new(&sys);
        let df = DesingField::build(&sys);
        let err = equilibrium_to_root(&bl, &df, 0.0, &[1.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateEquilibrium { .. }));
    }

    #[test]
    fn power_matrix_block_form() {
        let sys = painleve();
        let bl = BalanceLaw::new(&sys);
        let root = bl.newton(0.0, &[1.1, 1.9]).unwrap();
        let pm = bl.power_matrix(&root).unwrap();
        assert!(pm.a_ext.row(0).iter().all(|&v| v == 0.0));
        let want = [-6.0, 0.0, 1.0];
        for (z, w) in pm.spec_ext.iter().zip(want) {
            assert!((z.re - w).abs() < 1e-12 && z.im == 0.0);
        }
    }
}
