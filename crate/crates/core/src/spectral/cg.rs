//! Preconditioned conjugate gradients for Hermitian positive semidefinite systems.

use super::linalg::{axpy, dot, norm, LinearOperator};
use super::SpectralError;
use num_complex::Complex64;
use rayon::prelude::*;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    /// True relative residual `‖b − Ax‖ / ‖b‖` at exit.
    pub relative_residual: f64,
}

/// Solves `Ax = b` to relative residual `tol`, with optional Jacobi
/// preconditioner given as the inverse diagonal.
///
/// Returns [`SpectralError::Stagnation`] with the best achieved residual if
/// the iteration budget runs out or the search direction degenerates.
pub fn conjugate_gradient(
    a: &dyn LinearOperator,
    b: &[Complex64],
    inv_diag: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome, SpectralError> {
    let dim = a.dim();
    assert_eq!(b.len(), dim);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(CgOutcome { x: vec![ZERO; dim], iterations: 0, relative_residual: 0.0 });
    }
    let precond = |r: &[Complex64], z: &mut [Complex64]| match inv_diag {
        Some(d) => z.par_iter_mut().zip(r).zip(d).for_each(|((zi, ri), di)| *zi = ri * di),
        None => z.copy_from_slice(r),
    };
    let mut x = vec![ZERO; dim];
    let mut r = b.to_vec();
    let mut z = vec![ZERO; dim];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z).re;
    let mut ap = vec![ZERO; dim];
    let mut best = 1.0f64;
    let mut iterations = 0;
    while iterations < max_iter {
        let rel = norm(&r) / bnorm;
        best = best.min(rel);
        if rel <= tol {
            break;
        }
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap).re;
        if !(pap > 0.0) {
            return Err(SpectralError::Stagnation { achieved: best, iterations });
        }
        let alpha = rz / pap;
        axpy(Complex64::new(alpha, 0.0), &p, &mut x);
        axpy(Complex64::new(-alpha, 0.0), &ap, &mut r);
        precond(&r, &mut z);
        let rz_new = dot(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + *pi * beta);
        iterations += 1;
    }
    // recurrence residuals drift; report the true one
    a.apply(&x, &mut ap);
    let true_res = ap.iter().zip(b).map(|(v, bi)| (bi - v).norm_sqr()).sum::<f64>().sqrt() / bnorm;
    if true_res > tol {
        return Err(SpectralError::Stagnation { achieved: true_res, iterations });
    }
    Ok(CgOutcome { x, iterations, relative_residual: true_res })
}
