//! Quasi-parabolic compactification.
//!
//! For type `α`, let `c = lcm{α_i : α_i > 0}` and `β_i = c / α_i`. The map
//! `y_j = κ^{α_j} x_j` with `κ = (1 − p2c(x))^{-1}`,
//! `p2c(x) = Σ_{α_i>0} x_i^{2β_i}`, sends the open set `{p2c < 1}` onto
//! ℝⁿ. Its boundary `{p2c = 1}` is the horizon, the image of infinity.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Points with `|p2c − 1|` below this count as on the horizon.
pub const HORIZON_TOL: f64 = 1e-12;

/// `unembed` refuses points with `p2c` at or above `1 − UNEMBED_GUARD`.
pub const UNEMBED_GUARD: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpec {
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    pub c: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub p2c: f64,
    /// `1/κ = 1 − p2c`.
    pub kappa_inv: f64,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl EmbeddingSpec {
    /// Panics if `alpha` is all zeros; `SystemDef` rejects that earlier.
    pub fn new(alpha: &[u32]) -> Self {
        let c = alpha
            .iter()
            .filter(|&&a| a > 0)
            .fold(1u32, |acc, &a| acc / gcd(acc, a) * a);
        assert!(alpha.iter().any(|&a| a > 0), "type must have a positive entry");
        let beta = alpha.iter().map(|&a| if a > 0 { c / a } else { 0 }).collect();
        EmbeddingSpec { alpha: alpha.to_vec(), beta, c }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn in_index_set(&self, i: usize) -> bool {
        self.alpha[i] > 0
    }

    /// `Σ_{i∈I_α} x_i^{2β_i}`, the 2c-th power of `p_α`.
    pub fn p2c(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.beta)
            .filter(|(_, &b)| b > 0)
            .map(|(&xi, &b)| libm::pow(xi, (2 * b) as f64))
            .sum()
    }

    pub fn p_alpha(&self, x: &[f64]) -> f64 {
        libm::pow(self.p2c(x), 1.0 / (2 * self.c) as f64)
    }

    /// Gradient of `p_α` on the horizon: `(β_j / c) x_j^{2β_j − 1}`.
    pub fn grad_p(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.beta)
            .map(|(&xi, &b)| {
                if b == 0 {
                    0.0
                } else {
                    b as f64 / self.c as f64 * libm::pow(xi, (2 * b - 1) as f64)
                }
            })
            .collect()
    }

    /// Quasi-homogeneous scaling `x_i ↦ s^{α_i} x_i`.
    pub fn scale(&self, s: f64, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.alpha)
            .map(|(&xi, &a)| libm::pow(s, a as f64) * xi)
            .collect()
    }

    /// Move `x` along its quasi-homogeneous orbit until `p2c = target`.
    /// Returns `None` when `x` has no component in the index set.
    pub fn rescale_to(&self, x: &[f64], target: f64) -> Option<Vec<f64>> {
        let p = self.p2c(x);
        if p <= 0.0 {
            return None;
        }
        let s = libm::pow(target / p, 1.0 / (2 * self.c) as f64);
        Some(self.scale(s, x))
    }

    pub fn on_horizon(&self, x: &[f64]) -> bool {
        libm::fabs(self.p2c(x) - 1.0) <= HORIZON_TOL
    }

    /// `T_para`: original coordinates to the compactified ball.
    pub fn embed(&self, t: f64, y: &[f64]) -> EmbeddedPoint {
        let u = self.solve_kappa_inv(self.p2c(y));
        let x = self.scale(u, y);
        EmbeddedPoint { t, x, p2c: 1.0 - u, kappa_inv: u }
    }

    /// `S_para`: compactified coordinates back to ℝⁿ.
    pub fn unembed(&self, pt: &EmbeddedPoint) -> Result<(f64, Vec<f64>)> {
        Ok((pt.t, self.unembed_x(&pt.x)?))
    }

    pub fn unembed_x(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p2c = self.p2c(x);
        if p2c >= 1.0 - UNEMBED_GUARD {
            return Err(Error::Infinity { p2c });
        }
        Ok(self.scale(1.0 / (1.0 - p2c), x))
    }

    /// Solve `κ^{2c} − κ^{2c−1} = P` for `u = 1/κ ∈ (0, 1]`, i.e.
    /// `P u^{2c} + u − 1 = 0`. The left side increases from −1 at `u = 0`
    /// to `P` at `u = 1`, so the root is unique and bracketed.
    pub fn solve_kappa_inv(&self, big_p: f64) -> f64 {
        if big_p <= 0.0 {
            return 1.0;
        }
        let n = (2 * self.c) as f64;
        let phi = |u: f64| big_p * libm::pow(u, n) + u - 1.0;
        // For large P the root sits near P^{-1/2c}; start the bracket there.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let guess = libm::pow(big_p, -1.0 / n).min(1.0);
        if phi(guess) > 0.0 {
            hi = guess;
        } else {
            lo = guess;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-6 * hi {
                break;
            }
        }
        let mut u = 0.5 * (lo + hi);
        for _ in 0..50 {
            let f = phi(u);
            let df = n * big_p * libm::pow(u, n - 1.0) + 1.0;
            let next = (u - f / df).clamp(lo, hi);
            if next == u {
                break;
            }
            if phi(next) > 0.0 {
                hi = next;
            } else {
                lo = next;
            }
            u = next;
        }
        u
    }

    /// Residual of the κ equation in its original form, relative to `1 + P`.
    pub fn kappa_residual(&self, big_p: f64, u: f64) -> f64 {
        let n = (2 * self.c) as f64;
        let kappa = 1.0 / u;
        let lhs = libm::pow(kappa, n) - libm::pow(kappa, n - 1.0);
        libm::fabs(lhs - big_p) / (1.0 + big_p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_and_c() {
        let s = EmbeddingSpec::new(&[2, 3]);
        assert_eq!((s.beta.as_slice(), s.c), (&[3, 2][..], 6));
        let s = EmbeddingSpec::new(&[1, 1]);
        assert_eq!((s.beta.as_slice(), s.c), (&[1, 1][..], 1));
        let s = EmbeddingSpec::new(&[1, 3, 1, 3]);
        assert_eq!((s.beta.as_slice(), s.c), (&[3, 1, 3, 1][..], 3));
        let s = EmbeddingSpec::new(&[1, 2, 1, 2]);
        assert_eq!((s.beta.as_slice(), s.c), (&[2, 1, 2, 1][..], 2));
        let s = EmbeddingSpec::new(&[0, 4, 6]);
        assert_eq!((s.beta.as_slice(), s.c), (&[0, 3, 2][..], 12));
    }

    #[test]
    fn p2c_examples() {
        let s = EmbeddingSpec::new(&[2, 3]);
        let x = [libm::pow(17.0, -1.0 / 6.0), 2.0 * libm::pow(17.0, -0.25)];
        assert!((s.p2c(&x) - 1.0).abs() < 1e-15);
        assert_eq!(s.p2c(&[0.0, 0.0]), 0.0);
        let s = EmbeddingSpec::new(&[1, 2, 1, 2]);
        let p = s.p2c(&[0.7, 0.1, 0.1, 0.1]);
        assert!((p - (0.2401 + 0.01 + 0.0001 + 0.01)).abs() < 1e-15);
    }

    #[test]
    fn origin_is_fixed() {
        let s = EmbeddingSpec::new(&[2, 3]);
        let pt = s.embed(0.0, &[0.0, 0.0]);
        assert_eq!(pt.kappa_inv, 1.0);
        assert_eq!(pt.x, [0.0, 0.0]);
        assert_eq!(pt.p2c, 0.0);
        assert_eq!(s.unembed_x(&[0.0, 0.0]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn ray_converges_to_horizon_point() {
        let s = EmbeddingSpec::new(&[2, 3]);
        let y = s.scale(1e6, &[1.0, 2.0]);
        let pt = s.embed(0.0, &y);
        let want = [libm::pow(17.0, -1.0 / 6.0), 2.0 * libm::pow(17.0, -0.25)];
        assert!((pt.x[0] - want[0]).abs() < 1e-4);
        assert!((pt.x[1] - want[1]).abs() < 1e-4);
    }

    #[test]
    fn horizon_is_infinity() {
        let s = EmbeddingSpec::new(&[1, 1]);
        // p2c = 1 − 1e-16 (rounded); either way past the guard
        let x = [libm::sqrt(0.5 - 0.5e-16), libm::sqrt(0.5)];
        assert!(matches!(s.unembed_x(&x), Err(Error::Infinity { .. })));
    }

    #[test]
    fn kappa_solver_large_and_small() {
        let s = EmbeddingSpec::new(&[2, 3]);
        for p in [1e-300, 1e-12, 1e-3, 0.5, 1.0, 7.0, 1e6, 1e40, 1e120] {
            let u = s.solve_kappa_inv(p);
            assert!(u > 0.0 && u <= 1.0);
            assert!(s.kappa_residual(p, u) < 1e-14, "P = {p}: {}", s.kappa_residual(p, u));
        }
    }
}
