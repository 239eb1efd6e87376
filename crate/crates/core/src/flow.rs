//! Fixed-step RK4 integration of the desingularized field in `τ`, blow-up
//! time recovery, and fits of the blow-up rate.

use alloc::vec::Vec;

use crate::desing::DesingField;
use crate::error::{Error, Result};
use crate::expr::ExprError;
use crate::system::least_squares_slope;

/// Overshoot past the horizon that is pulled back instead of aborting.
pub const OVERSHOOT_TOL: f64 = 1e-9;
/// Rate fits use samples with `1 − p2c` at or above this.
pub const RATE_WINDOW_FLOOR: f64 = 1e-9;
/// Fewer tail samples than this leaves a rate fit inconclusive.
pub const MIN_TAIL_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOptions {
    pub h: f64,
    pub tau_max: f64,
    /// Record every `record_every`-th step (the end point is always kept).
    pub record_every: usize,
    pub field_tol: f64,
    pub gap_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { h: 1e-3, tau_max: 2000.0, record_every: 1, field_tol: 1e-12, gap_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlowStatus {
    Converged,
    MaxTau,
    DomainError(ExprError),
    /// A step left the compactified ball by more than [`OVERSHOOT_TOL`].
    Overshoot { p2c: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub tau: f64,
    pub t: f64,
    pub x: Vec<f64>,
    pub p2c: f64,
    pub big_g: f64,
    /// `1 − p2c`.
    pub kappa_inv: f64,
    /// Trapezoid quadrature of `g_0` from the start up to here.
    pub quad: f64,
    /// Sum of RK4 time increments since the previous recorded sample.
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub h: f64,
    pub t0: f64,
    pub samples: Vec<Sample>,
    pub steps: usize,
    pub status: FlowStatus,
    /// Number of radial pull-backs onto the horizon.
    pub renormalizations: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least its initial sample")
    }

    pub fn converged(&self) -> bool {
        self.status == FlowStatus::Converged
    }
}

fn add_scaled(z: &[f64], k: &[f64], a: f64) -> Vec<f64> {
    z.iter().zip(k).map(|(zi, ki)| zi + a * ki).collect()
}

/// Integrate `(t, x)' = g^ext(t, x)` from `(t0, x0)` with classical RK4.
pub fn integrate(df: &DesingField, t0: f64, x0: &[f64], opts: &FlowOptions) -> Trajectory {
    let n = df.dim();
    let h = opts.h;
    let every = opts.record_every.max(1);
    let mut z: Vec<f64> = core::iter::once(t0).chain(x0.iter().copied()).collect();
    let mut traj = Trajectory { h, t0, samples: Vec::new(), steps: 0, status: FlowStatus::MaxTau, renormalizations: 0 };

    let rhs = |z: &[f64]| df.eval_field(z[0], &z[1..]);
    let mut fv = match rhs(&z) {
        Ok(fv) => fv,
        Err(e) => {
            traj.status = FlowStatus::DomainError(e);
            return traj;
        }
    };
    let sample = |tau: f64, z: &[f64], fv: &crate::desing::FieldValue, quad: f64, dt: f64| Sample {
        tau,
        t: z[0],
        x: z[1..].to_vec(),
        p2c: fv.p2c,
        big_g: fv.big_g,
        kappa_inv: 1.0 - fv.p2c,
        quad,
        dt,
    };
    traj.samples.push(sample(0.0, &z, &fv, 0.0, 0.0));

    let mut tau = 0.0;
    let mut quad = 0.0;
    let mut dt_acc = 0.0;
    let mut g0_prev = df.g0(fv.p2c);
    loop {
        if fv.norm() < opts.field_tol && 1.0 - fv.p2c < opts.gap_tol {
            traj.status = FlowStatus::Converged;
            break;
        }
        if tau >= opts.tau_max {
            traj.status = FlowStatus::MaxTau;
            break;
        }
        let step = (|| -> core::result::Result<Vec<f64>, ExprError> {
            let k1 = &fv.g;
            let k2 = rhs(&add_scaled(&z, k1, 0.5 * h))?.g;
            let k3 = rhs(&add_scaled(&z, &k2, 0.5 * h))?.g;
            let k4 = rhs(&add_scaled(&z, &k3, h))?.g;
            Ok((0..=n).map(|i| h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
        })();
        let incr = match step {
            Ok(d) => d,
            Err(e) => {
                traj.status = FlowStatus::DomainError(e);
                break;
            }
        };
        let mut next: Vec<f64> = z.iter().zip(&incr).map(|(a, b)| a + b).collect();
        let p2c = df.spec.p2c(&next[1..]);
        if p2c > 1.0 + OVERSHOOT_TOL {
            traj.status = FlowStatus::Overshoot { p2c };
            break;
        }
        if p2c > 1.0 {
            if let Some(x) = df.spec.rescale_to(&next[1..], 1.0) {
                next[1..].copy_from_slice(&x);
                traj.renormalizations += 1;
            }
        }
        let nfv = match rhs(&next) {
            Ok(v) => v,
            Err(e) => {
                traj.status = FlowStatus::DomainError(e);
                break;
            }
        };
        z = next;
        fv = nfv;
        tau += h;
        traj.steps += 1;
        let g0 = df.g0(fv.p2c);
        quad += 0.5 * h * (g0_prev + g0);
        g0_prev = g0;
        dt_acc += incr[0];
        let done = fv.norm() < opts.field_tol && 1.0 - fv.p2c < opts.gap_tol;
        if traj.steps % every == 0 || done || tau >= opts.tau_max {
            traj.samples.push(sample(tau, &z, &fv, quad, dt_acc));
            dt_acc = 0.0;
        }
    }
    if traj.last().tau != tau {
        traj.samples.push(sample(tau, &z, &fv, quad, dt_acc));
    }
    traj
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmaxEstimate {
    /// `t0 + trapezoid + tail`.
    pub value: f64,
    /// `t_last + tail`, the limit of the integrated time component.
    pub t_limit: f64,
    /// `g_0(last) / (k C*)`.
    pub tail: f64,
    /// `C*` at the final point.
    pub c_star: f64,
    pub discrepancy: f64,
    /// `discrepancy ≤ 1e-6 · (1 + |value|)`.
    pub consistent: bool,
}

/// Blow-up time of a converged trajectory.
///
/// Near the equilibrium `κ` grows like `e^{C* τ}`, so the integrand decays
/// like `e^{−k C* τ}` and the remaining integral is `g_0 / (k C*)`.
pub fn t_max(df: &DesingField, traj: &Trajectory) -> Result<TmaxEstimate> {
    if !traj.converged() {
        return Err(Error::NotConverged);
    }
    let last = traj.last();
    let c_star = last.big_g;
    let k = df.k();
    let g0 = df.g0(last.p2c);
    let tail = if g0 == 0.0 { 0.0 } else { g0 / (k * c_star) };
    let value = traj.t0 + last.quad + tail;
    let t_limit = last.t + tail;
    let discrepancy = libm::fabs(value - t_limit);
    Ok(TmaxEstimate { value, t_limit, tail, c_star, discrepancy, consistent: discrepancy <= 1e-6 * (1.0 + libm::fabs(value)) })
}

/// `θ = t_max − t` at every sample, accumulated backwards from the tail so
/// that small values keep full relative precision.
pub fn theta(traj: &Trajectory, tail: f64) -> Vec<f64> {
    let m = traj.samples.len();
    let mut out = alloc::vec![0.0; m];
    let mut acc = tail;
    for i in (0..m).rev() {
        out[i] = acc;
        acc += traj.samples[i].dt;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentFit {
    pub index: usize,
    pub slope: f64,
    pub expected_slope: f64,
    /// Median of `|y_i| θ^{α_i/k}` over the window.
    pub coefficient: f64,
    pub expected_coefficient: f64,
    pub slope_ok: bool,
    pub coefficient_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub status: FitStatus,
    pub window: (f64, f64),
    pub samples: usize,
    pub components: Vec<ComponentFit>,
}

/// Fit `log|y_i|` against `log θ` over the last decade of `θ` that is still
/// resolved (`1 − p2c ≥ 1e-9`), for every `i` with `Y0_i ≠ 0`.
pub fn rate_check(df: &DesingField, traj: &Trajectory, tmax: &TmaxEstimate, y0: &[f64]) -> RateFit {
    let th = theta(traj, tmax.tail);
    let k = df.k();
    let resolved: Vec<usize> = (0..traj.samples.len())
        .filter(|&i| traj.samples[i].kappa_inv >= RATE_WINDOW_FLOOR && th[i] > 0.0)
        .collect();
    let Some(&last) = resolved.last() else {
        return RateFit { status: FitStatus::Inconclusive, window: (0.0, 0.0), samples: 0, components: Vec::new() };
    };
    let lo = th[last];
    let hi = 10.0 * lo;
    let window: Vec<usize> = resolved.into_iter().filter(|&i| th[i] <= hi).collect();
    if window.len() < MIN_TAIL_SAMPLES {
        return RateFit { status: FitStatus::Inconclusive, window: (lo, hi), samples: window.len(), components: Vec::new() };
    }

    let mut components = Vec::new();
    for (i, &y0i) in y0.iter().enumerate() {
        if y0i == 0.0 {
            continue;
        }
        let a = df.sys.sig.alpha_f(i);
        let mut pts = Vec::with_capacity(window.len());
        let mut coefs = Vec::with_capacity(window.len());
        for &m in &window {
            let s = &traj.samples[m];
            let y = s.x[i] * libm::pow(s.kappa_inv, -a);
            pts.push((libm::log(th[m]), libm::log(libm::fabs(y))));
            coefs.push(libm::fabs(y) * libm::pow(th[m], a / k));
        }
        let slope = least_squares_slope(&pts);
        coefs.sort_by(f64::total_cmp);
        let coefficient = coefs[coefs.len() / 2];
        let expected_slope = -a / k;
        let expected_coefficient = libm::fabs(y0i);
        components.push(ComponentFit {
            index: i,
            slope,
            expected_slope,
            coefficient,
            expected_coefficient,
            slope_ok: libm::fabs(slope - expected_slope) <= 0.05,
            coefficient_ok: libm::fabs(coefficient / expected_coefficient - 1.0) <= 0.05,
        });
    }
    let ok = components.iter().all(|c| c.slope_ok && c.coefficient_ok);
    RateFit {
        status: if ok { FitStatus::Pass } else { FitStatus::Fail },
        window: (lo, hi),
        samples: window.len(),
        components,
    }
}

/// `max |κ^{−1} Δκ/Δτ − G|` over consecutive samples with `1 − p2c ≥ floor`,
/// comparing the finite difference of `−log(1 − p2c)` with the midpoint `G`.
pub fn kappa_growth_residual(traj: &Trajectory, floor: f64) -> Option<f64> {
    let mut worst: Option<f64> = None;
    for w in traj.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.kappa_inv < floor || b.kappa_inv < floor || b.tau <= a.tau {
            continue;
        }
        let rate = (libm::log(a.kappa_inv) - libm::log(b.kappa_inv)) / (b.tau - a.tau);
        let mid = 0.5 * (a.big_g + b.big_g);
        let r = libm::fabs(rate - mid);
        worst = Some(worst.map_or(r, |x: f64| x.max(r)));
    }
    worst
}
