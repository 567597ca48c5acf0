//! Vector kernels shared by the iterative solvers.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const PAR_MIN: usize = 4096;

/// A Hermitian linear map on `C^dim`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);

    /// A guaranteed upper bound on the spectral radius, if cheaply known.
    fn norm_bound(&self) -> Option<f64> {
        None
    }
}

impl LinearOperator for super::SparseHermitian {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.matvec_into(x, y)
    }

    fn norm_bound(&self) -> Option<f64> {
        Some(self.matrix().norm_inf())
    }
}

/// `xᴴy`.
pub fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.par_iter().with_min_len(PAR_MIN).zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(x: &[Complex64]) -> f64 {
    x.par_iter().with_min_len(PAR_MIN).map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += a x`.
pub fn axpy(a: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    y.par_iter_mut().with_min_len(PAR_MIN).zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

pub fn scale(a: f64, x: &mut [Complex64]) {
    x.par_iter_mut().with_min_len(PAR_MIN).for_each(|v| *v *= a);
}

pub fn random_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..dim).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two passes of classical Gram–Schmidt of `w` against `basis`; returns the
/// accumulated coefficients `basisᴴ w`.
pub fn orthogonalize(w: &mut [Complex64], basis: &[Vec<Complex64>]) -> Vec<Complex64> {
    let mut total = vec![Complex64::new(0.0, 0.0); basis.len()];
    for _ in 0..2 {
        let coeffs: Vec<Complex64> = basis.par_iter().map(|v| dot(v, w)).collect();
        for (v, c) in basis.iter().zip(&coeffs) {
            axpy(-c, v, w);
        }
        for (t, c) in total.iter_mut().zip(coeffs) {
            *t += c;
        }
    }
    total
}
