//! The desingularized extended vector field on the compactified phase space.
//!
//! With `s = 1 − p2c(x)` (so `κ = 1/s`) and
//! `f̃_j(t, x) = κ^{−(k+α_j)} f_j(t, κ^Λ x)`, the field in the rescaled time
//! `τ` is
//!
//! ```text
//! g_0 = (1 − (2c−1)/(2c) · s) s^k
//! g_j = (1 − (2c−1)/(2c) · s) f̃_j − G α_j x_j,     G = Σ_{j∈I} (β_j/c) x_j^{2β_j−1} f̃_j
//! ```
//!
//! The quasi-homogeneous part satisfies `f̃_qh = f_qh(t, x)` identically. The
//! residual is rewritten symbolically in `x` and `s` (see [`rescale`]), so the
//! whole field is an ordinary expression tree, smooth up to the horizon.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::embedding::{EmbeddingSpec, HORIZON_TOL};
use crate::error::{Error, Result};
use crate::expr::{self, Expr, ExprError, Var};
use crate::system::SystemDef;

/// Equilibrium test on `‖g^ext‖`.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;
/// Decomposition residual above which the input is rejected.
pub const DECOMPOSITION_REJECT: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct DesingField {
    pub sys: SystemDef,
    pub spec: EmbeddingSpec,
    /// `1 − p2c(x)`.
    pub s: Expr,
    /// Rescaled residual `f̃_res`.
    pub ft_res: Vec<Expr>,
    /// Full `f̃ = f_qh + f̃_res`.
    pub ft: Vec<Expr>,
    pub big_g: Expr,
    /// Rows `g_0, g_1, …, g_n`.
    pub g: Vec<Expr>,
    /// `∂g_r / ∂(t, x_1, …, x_n)`.
    pub jac: Vec<Vec<Expr>>,
    /// `∂f̃_j / ∂(t, x)`, and the same for the qh part alone.
    pub dft: Vec<Vec<Expr>>,
    pub dft_qh: Vec<Vec<Expr>>,
}

/// Numeric value of the field at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldValue {
    /// `(g_0, g_1, …, g_n)`.
    pub g: Vec<f64>,
    pub big_g: f64,
    pub p2c: f64,
}

impl FieldValue {
    pub fn norm(&self) -> f64 {
        norm(&self.g)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|a| a * a).sum())
}

fn var_of(col: usize) -> Var {
    if col == 0 {
        Var::Time
    } else {
        Var::State(col - 1)
    }
}

/// Rewrite `e(t, s^{−Λ} x)` as `s^{−w} e'(t, x)`, returning `(e', w)`.
///
/// Weights propagate through the tree: a state `x_i` has weight `α_i`, sums
/// pad the lighter terms with powers of `s`, products add weights, powers
/// multiply them. A function applied to a weighted argument has no such
/// expansion; its argument is substituted literally (weight 0 result), which
/// is correct but generally singular at the horizon.
pub fn rescale(e: &Expr, alpha: &[u32], s: &Expr) -> (Expr, f64) {
    let spow = |w: f64| expr::pow(s.clone(), w);
    match e {
        Expr::Const(c) => (Expr::Const(*c), 0.0),
        Expr::Var(Var::Time) => (Expr::time(), 0.0),
        Expr::Var(Var::State(i)) => (Expr::state(*i), alpha[*i] as f64),
        Expr::Neg(a) => {
            let (a, w) = rescale(a, alpha, s);
            (expr::neg(a), w)
        }
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            let (a, wa) = rescale(a, alpha, s);
            let (b, wb) = rescale(b, alpha, s);
            // A vanishing term carries no weight.
            let wa = if a.is_zero() { f64::NEG_INFINITY } else { wa };
            let wb = if b.is_zero() { f64::NEG_INFINITY } else { wb };
            let w = wa.max(wb);
            if w == f64::NEG_INFINITY {
                return (Expr::Const(0.0), 0.0);
            }
            let a = if a.is_zero() { a } else { expr::mul(a, spow(w - wa)) };
            let b = if b.is_zero() { b } else { expr::mul(b, spow(w - wb)) };
            let out = if matches!(e, Expr::Add(..)) { expr::add(a, b) } else { expr::sub(a, b) };
            (out, w)
        }
        Expr::Mul(a, b) => {
            let (a, wa) = rescale(a, alpha, s);
            let (b, wb) = rescale(b, alpha, s);
            (expr::mul(a, b), wa + wb)
        }
        Expr::Div(a, b) => {
            let (a, wa) = rescale(a, alpha, s);
            let (b, wb) = rescale(b, alpha, s);
            (expr::div(a, b), wa - wb)
        }
        Expr::Pow(a, p) => {
            let (a, w) = rescale(a, alpha, s);
            (expr::pow(a, *p), w * p)
        }
        Expr::Call(f, a) => {
            let (a2, w) = rescale(a, alpha, s);
            if w == 0.0 {
                (expr::call(*f, a2), 0.0)
            } else {
                (expr::call(*f, expr::mul(a2, spow(-w))), 0.0)
            }
        }
    }
}

impl DesingField {
    pub fn build(sys: &SystemDef) -> DesingField {
        let n = sys.dim();
        let spec = sys.embedding();
        let k = sys.k();
        let c = spec.c as f64;

        let mut p2c = Expr::Const(0.0);
        for i in 0..n {
            if spec.beta[i] > 0 {
                p2c = expr::add(p2c, expr::pow(Expr::state(i), (2 * spec.beta[i]) as f64));
            }
        }
        let s = expr::sub(Expr::Const(1.0), p2c);

        let ft_res: Vec<Expr> = sys
            .res
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let (e, w) = rescale(r, &sys.sig.alpha, &s);
                if e.is_zero() {
                    Expr::Const(0.0)
                } else {
                    expr::mul(expr::pow(s.clone(), k + sys.sig.alpha_f(j) - w), e)
                }
            })
            .collect();
        let ft: Vec<Expr> = sys.qh.iter().zip(&ft_res).map(|(q, r)| expr::add(q.clone(), r.clone())).collect();

        let mut big_g = Expr::Const(0.0);
        for j in 0..n {
            if spec.beta[j] > 0 {
                let b = spec.beta[j] as f64;
                let w = expr::mul(Expr::Const(b / c), expr::pow(Expr::state(j), 2.0 * b - 1.0));
                big_g = expr::add(big_g, expr::mul(w, ft[j].clone()));
            }
        }

        let pref = expr::sub(
            Expr::Const(1.0),
            expr::mul(Expr::Const((2.0 * c - 1.0) / (2.0 * c)), s.clone()),
        );
        let mut g = Vec::with_capacity(n + 1);
        g.push(expr::mul(pref.clone(), expr::pow(s.clone(), k)));
        for j in 0..n {
            let drift = expr::mul(
                big_g.clone(),
                expr::mul(Expr::Const(sys.sig.alpha_f(j)), Expr::state(j)),
            );
            g.push(expr::sub(expr::mul(pref.clone(), ft[j].clone()), drift));
        }

        let grad = |rows: &[Expr]| -> Vec<Vec<Expr>> {
            rows.iter().map(|e| (0..=n).map(|col| e.diff(var_of(col))).collect()).collect()
        };
        let jac = grad(&g);
        let dft = grad(&ft);
        let dft_qh = grad(&sys.qh);

        DesingField { sys: sys.clone(), spec, s, ft_res, ft, big_g, g, jac, dft, dft_qh }
    }

    pub fn dim(&self) -> usize {
        self.sys.dim()
    }

    pub fn k(&self) -> f64 {
        self.sys.k()
    }

    pub fn c(&self) -> f64 {
        self.spec.c as f64
    }

    pub fn eval_ft(&self, t: f64, x: &[f64]) -> core::result::Result<Vec<f64>, ExprError> {
        self.ft.iter().map(|e| e.eval(t, x)).collect()
    }

    /// `G(t, x)`.
    pub fn big_g(&self, t: f64, x: &[f64]) -> core::result::Result<f64, ExprError> {
        let ft = self.eval_ft(t, x)?;
        Ok(self.big_g_from(x, &ft))
    }

    fn big_g_from(&self, x: &[f64], ft: &[f64]) -> f64 {
        let c = self.c();
        let mut big_g = 0.0;
        for j in 0..self.dim() {
            let b = self.spec.beta[j];
            if b > 0 {
                big_g += b as f64 / c * libm::pow(x[j], (2 * b - 1) as f64) * ft[j];
            }
        }
        big_g
    }

    /// Numeric `(g_0, g, G, p2c)`; same formulas as the symbolic rows.
    pub fn eval_field(&self, t: f64, x: &[f64]) -> core::result::Result<FieldValue, ExprError> {
        let n = self.dim();
        let c = self.c();
        let p2c = self.spec.p2c(x);
        let s = 1.0 - p2c;
        let ft = self.eval_ft(t, x)?;
        let big_g = self.big_g_from(x, &ft);
        let pref = 1.0 - (2.0 * c - 1.0) / (2.0 * c) * s;
        let mut g = Vec::with_capacity(n + 1);
        g.push(pref * expr::real_pow(s, self.k())?);
        for j in 0..n {
            g.push(pref * ft[j] - big_g * self.sys.sig.alpha_f(j) * x[j]);
        }
        Ok(FieldValue { g, big_g, p2c })
    }

    /// `g_0 = (1/2c)(1 + (2c−1) p2c)(1 − p2c)^k`, the integrand of `t_max`.
    pub fn g0(&self, p2c: f64) -> f64 {
        let c = self.c();
        (1.0 + (2.0 * c - 1.0) * p2c) / (2.0 * c) * libm::pow((1.0 - p2c).max(0.0), self.k())
    }

    fn eval_matrix(rows: &[Vec<Expr>], t: f64, x: &[f64]) -> core::result::Result<DMatrix<f64>, ExprError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = DMatrix::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            for (col, e) in row.iter().enumerate() {
                m[(r, col)] = e.eval(t, x)?;
            }
        }
        Ok(m)
    }

    /// Symbolic Jacobian `Dg^ext` in `(t, x)`.
    pub fn jacobian(&self, t: f64, x: &[f64]) -> core::result::Result<DMatrix<f64>, ExprError> {
        Self::eval_matrix(&self.jac, t, x)
    }

    /// Central finite-difference Jacobian with relative step `h`.
    pub fn jacobian_fd(&self, t: f64, x: &[f64], h: f64) -> core::result::Result<DMatrix<f64>, ExprError> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        let mut z: Vec<f64> = core::iter::once(t).chain(x.iter().copied()).collect();
        for col in 0..=n {
            let z0 = z[col];
            let step = h * (1.0 + libm::fabs(z0));
            z[col] = z0 + step;
            let plus = self.eval_field(z[0], &z[1..])?.g;
            z[col] = z0 - step;
            let minus = self.eval_field(z[0], &z[1..])?.g;
            z[col] = z0;
            for r in 0..=n {
                m[(r, col)] = (plus[r] - minus[r]) / (2.0 * step);
            }
        }
        Ok(m)
    }

    /// `d p2c / dτ = Σ 2β_j x_j^{2β_j−1} g_j`.
    pub fn p2c_rate(&self, t: f64, x: &[f64]) -> core::result::Result<f64, ExprError> {
        let fv = self.eval_field(t, x)?;
        let mut r = 0.0;
        for j in 0..self.dim() {
            let b = self.spec.beta[j];
            if b > 0 {
                r += 2.0 * b as f64 * libm::pow(x[j], (2 * b - 1) as f64) * fv.g[j + 1];
            }
        }
        Ok(r)
    }

    /// Split of `Dg^ext` at a horizon equilibrium.
    pub fn decompose_at_equilibrium(&self, t: f64, x: &[f64]) -> Result<EquilibriumDecomposition> {
        let n = self.dim();
        let k = self.k();
        let c = self.c();
        let fv = self.eval_field(t, x)?;
        if libm::fabs(fv.p2c - 1.0) > HORIZON_TOL {
            return Err(Error::NotEquilibrium(alloc::format!("p2c = {} is off the horizon", fv.p2c)));
        }
        if fv.norm() > EQUILIBRIUM_TOL {
            return Err(Error::NotEquilibrium(alloc::format!("|g| = {:e}", fv.norm())));
        }
        let c_star = fv.big_g;
        let alpha: Vec<f64> = (0..n).map(|i| self.sys.sig.alpha_f(i)).collect();

        let mut v = DVector::zeros(n + 1);
        let mut dp = DVector::zeros(n + 1);
        let grad = self.spec.grad_p(x);
        for i in 0..n {
            v[i + 1] = alpha[i] * x[i];
            dp[i + 1] = grad[i];
        }
        let p = &v * dp.transpose();

        let dft = Self::eval_matrix(&self.dft, t, x)?;
        let dft_qh = Self::eval_matrix(&self.dft_qh, t, x)?;
        let mut a_g = DMatrix::zeros(n + 1, n + 1);
        for j in 0..n {
            for col in 0..=n {
                a_g[(j + 1, col)] = dft[(j, col)];
            }
            a_g[(j + 1, j + 1)] -= c_star * alpha[j];
        }
        let eye = DMatrix::<f64>::identity(n + 1, n + 1);
        let b_g = -(&p * (&a_g + &eye * c_star));
        let mut a_res = DMatrix::zeros(n + 1, n + 1);
        if k == 1.0 {
            for i in 0..n {
                a_res[(0, i + 1)] = -2.0 * c * dp[i + 1];
            }
        }
        let dg = self.jacobian(t, x)?;
        let assembled = &a_g + &b_g + &a_res;
        let decomposition_residual = (&assembled - &dg).amax();
        let idempotence_residual = (&p * &p - &p).amax();
        let inner = dp.dot(&v);
        let qh_limit_residual = (dft.columns(1, n) - dft_qh.columns(1, n)).amax();

        if decomposition_residual > DECOMPOSITION_REJECT {
            return Err(Error::Consistency { what: "Dg = A_g + B_g + A_res", residual: decomposition_residual });
        }
        Ok(EquilibriumDecomposition {
            t_star: t,
            x_star: x.to_vec(),
            alpha,
            c_star,
            v,
            dp,
            p,
            a_g,
            b_g,
            a_res,
            dg,
            decomposition_residual,
            idempotence_residual,
            inner_residual: libm::fabs(inner - 1.0),
            qh_limit_residual,
        })
    }
}

/// `Dg^ext_* = A_g + B_g + δ_{1,k} A_res` at a horizon equilibrium.
#[derive(Debug, Clone)]
pub struct EquilibriumDecomposition {
    pub t_star: f64,
    pub x_star: Vec<f64>,
    pub alpha: Vec<f64>,
    pub c_star: f64,
    /// `(0, Λ x*)`.
    pub v: DVector<f64>,
    /// `(0, ∇p_α(x*))`; `dpᵀ v = 1`.
    pub dp: DVector<f64>,
    /// `v dpᵀ`.
    pub p: DMatrix<f64>,
    pub a_g: DMatrix<f64>,
    pub b_g: DMatrix<f64>,
    pub a_res: DMatrix<f64>,
    /// The symbolic Jacobian at the point.
    pub dg: DMatrix<f64>,
    pub decomposition_residual: f64,
    pub idempotence_residual: f64,
    pub inner_residual: f64,
    /// `max |D_x f̃ − D_x f̃_qh|`.
    pub qh_limit_residual: f64,
}

impl EquilibriumDecomposition {
    pub fn dim(&self) -> usize {
        self.x_star.len()
    }

    /// Lower-right `n × n` block of `A_g`.
    pub fn a_g_block(&self) -> DMatrix<f64> {
        let n = self.dim();
        self.a_g.view((1, 1), (n, n)).into_owned()
    }

    /// `(D_x g)_*`, lower-right block of `Dg`.
    pub fn dxg(&self) -> DMatrix<f64> {
        let n = self.dim();
        self.dg.view((1, 1), (n, n)).into_owned()
    }

    /// `(D_t g)_*`, first column of `Dg` below row 0.
    pub fn dtg(&self) -> DVector<f64> {
        let n = self.dim();
        self.dg.view((1, 0), (n, 1)).column(0).into_owned()
    }

    pub fn v_alpha(&self) -> DVector<f64> {
        self.v.rows(1, self.dim()).into_owned()
    }

    pub fn grad_p(&self) -> DVector<f64> {
        self.dp.rows(1, self.dim()).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn painleve() -> SystemDef {
        SystemDef::parse("p1", &["u", "v"], vec![2, 3], 1.0, &["v", "6*u^2"], &["0", "t"], &[]).unwrap()
    }

    fn wwl_k1() -> SystemDef {
        SystemDef::parse(
            "wwl1",
            &["u1", "v1", "u2", "v2"],
            vec![1, 2, 1, 2],
            1.0,
            &["v1", "-u1^3 - 2*u1*u2^2*sin(t)", "v2", "-u2^3 - 2*u1^2*u2*sin(t)"],
            &["0", "0", "0", "0"],
            &[],
        )
        .unwrap()
    }

    #[test]
    fn rescaled_residual_weights() {
        // f_2 = t with k + α_2 = 4: f̃ = s^4 t
        let df = DesingField::build(&painleve());
        let x = [0.3, 0.4];
        let s = 1.0 - df.spec.p2c(&x);
        assert!((df.ft_res[1].eval(1.7, &x).unwrap() - libm::pow(s, 4.0) * 1.7).abs() < 1e-15);
        assert!(df.ft_res[0].is_zero());

        // −u with α = 1, k = 2: f̃_2 = κ^{-3}(−κ u) = −s² u
        let ss = SystemDef::parse("ss", &["u", "v"], vec![1, 1], 2.0, &["u^2*v", "t*u^2*v"], &["0", "-u"], &[])
            .unwrap();
        let df = DesingField::build(&ss);
        let s = 1.0 - df.spec.p2c(&x);
        assert!((df.ft_res[1].eval(0.0, &x).unwrap() + s * s * 0.3).abs() < 1e-15);
    }

    #[test]
    fn g0_at_origin() {
        let df = DesingField::build(&painleve());
        let fv = df.eval_field(0.0, &[0.0, 0.0]).unwrap();
        assert!((fv.g[0] - 1.0 / 12.0).abs() < 1e-15);
        assert!((df.g0(0.0) - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn wwl_g0_closed_form() {
        let df = DesingField::build(&wwl_k1());
        let x = [0.7, 0.1, 0.1, 0.1];
        let p4 = df.spec.p2c(&x);
        let want = 0.25 * (1.0 + 3.0 * p4) * (1.0 - p4);
        assert!((df.eval_field(0.0, &x).unwrap().g[0] - want).abs() < 1e-15);
        assert!((df.g[0].eval(0.0, &x).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn wwl_big_g_closed_form() {
        let df = DesingField::build(&wwl_k1());
        let x = [0.5, -0.2, 0.3, 0.4];
        let t = 0.9;
        let f = df.eval_ft(t, &x).unwrap();
        let want = x[0].powi(3) * f[0] + 0.5 * x[1] * f[1] + x[2].powi(3) * f[2] + 0.5 * x[3] * f[3];
        assert!((df.big_g(t, &x).unwrap() - want).abs() < 1e-15);
        assert!((df.big_g.eval(t, &x).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn symbolic_rows_match_numeric() {
        let df = DesingField::build(&painleve());
        let x = [0.4, -0.6];
        let fv = df.eval_field(0.3, &x).unwrap();
        for (r, e) in df.g.iter().enumerate() {
            assert!((e.eval(0.3, &x).unwrap() - fv.g[r]).abs() < 1e-14);
        }
    }

    #[test]
    fn painleve_x_row_on_horizon() {
        // prefactor is 1 on the horizon: g_1 = f̃_1 − 2 x_1 G
        let df = DesingField::build(&painleve());
        let x = df.spec.rescale_to(&[0.3, 0.8], 1.0).unwrap();
        let fv = df.eval_field(0.5, &x).unwrap();
        let ft = df.eval_ft(0.5, &x).unwrap();
        assert!((fv.g[1] - (ft[0] - 2.0 * x[0] * fv.big_g)).abs() < 1e-14);
        assert!(fv.g[0].abs() < 1e-14);
    }
}
