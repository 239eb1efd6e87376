//! Dense eigen-helpers on top of nalgebra.

use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Imaginary parts below this (relative to `1 + |λ|`) are treated as zero.
const REAL_TOL: f64 = 1e-10;

/// Eigenvalues of a real matrix with conjugate pairs made exactly symmetric,
/// sorted by real part, then imaginary part.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let raw: Vec<C64> = m.clone().complex_eigenvalues().iter().copied().collect();
    let mut out = Vec::with_capacity(raw.len());
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for z in raw {
        if libm::fabs(z.im) <= REAL_TOL * (1.0 + cabs(z)) {
            out.push(C64::new(z.re, 0.0));
        } else if z.im > 0.0 {
            upper.push(z);
        } else {
            lower.push(z);
        }
    }
    for z in upper {
        // pair with the nearest conjugate
        let best = (0..lower.len()).min_by(|&a, &b| {
            cabs(lower[a].conj() - z).total_cmp(&cabs(lower[b].conj() - z))
        });
        let (re, im) = match best {
            Some(i) => {
                let w = lower.swap_remove(i);
                (0.5 * (z.re + w.re), 0.5 * (z.im - w.im))
            }
            None => (z.re, z.im),
        };
        out.push(C64::new(re, im));
        out.push(C64::new(re, -im));
    }
    out.extend(lower);
    sort_spectrum(&mut out);
    out
}

/// `|z|`.
pub fn cabs(z: C64) -> f64 {
    libm::hypot(z.re, z.im)
}

pub fn sort_spectrum(v: &mut [C64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|a| C64::new(a, 0.0))
}

pub fn to_complex_vec(v: &DVector<f64>) -> DVector<C64> {
    v.map(|a| C64::new(a, 0.0))
}

/// Unit Euclidean norm, first non-negligible component positive real.
pub fn normalize(v: &DVector<C64>) -> DVector<C64> {
    let nrm = v.norm();
    if nrm == 0.0 {
        return v.clone();
    }
    let mut w = v / C64::new(nrm, 0.0);
    let biggest = w.iter().map(|z| cabs(*z)).fold(0.0, f64::max);
    if let Some(first) = w.iter().find(|z| cabs(**z) > 1e-8 * biggest).copied() {
        let phase = first / C64::new(cabs(first), 0.0);
        w /= phase;
    }
    w
}

/// Right null vector of `m − λI` from the smallest singular value.
pub fn eigenvector(m: &DMatrix<f64>, lambda: C64) -> DVector<C64> {
    let n = m.nrows();
    let shifted = to_complex(m) - DMatrix::<C64>::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let v = v_t.row(imin).transpose().map(|z| z.conj());
    normalize(&v)
}

/// `‖M v − λ v‖ / ‖v‖`.
pub fn eig_residual(m: &DMatrix<f64>, lambda: C64, v: &DVector<C64>) -> f64 {
    let mv = to_complex(m) * v;
    (mv - v * lambda).norm() / v.norm().max(f64::MIN_POSITIVE)
}

/// Greedy nearest-neighbour pairing of two spectra. Each `a[i]` is paired
/// with the closest unused `b[j]`; returns `(i, j, |a_i − b_j|)`, or the
/// first `a` value that has no partner within `tol·(1 + |a|)`.
pub fn match_spectra(a: &[C64], b: &[C64], tol: f64) -> core::result::Result<Vec<(usize, usize, f64)>, C64> {
    let mut used = alloc::vec![false; b.len()];
    let mut out = Vec::with_capacity(a.len());
    for (i, &z) in a.iter().enumerate() {
        let best = (0..b.len())
            .filter(|&j| !used[j])
            .min_by(|&p, &q| cabs(b[p] - z).total_cmp(&cabs(b[q] - z)));
        match best {
            Some(j) if cabs(b[j] - z) <= tol * (1.0 + cabs(z)) => {
                used[j] = true;
                out.push((i, j, cabs(b[j] - z)));
            }
            _ => return Err(z),
        }
    }
    Ok(out)
}

/// Solve `M y = b` by LU.
pub fn solve(m: &DMatrix<f64>, b: &DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
    let lu = m.clone().lu();
    lu.solve(b).filter(|y| y.iter().all(|v| v.is_finite())).ok_or(Error::Singular(what))
}

/// Smallest pairwise distance in a spectrum.
pub fn min_gap(v: &[C64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            gap = gap.min(cabs(v[i] - v[j]));
        }
    }
    gap
}
