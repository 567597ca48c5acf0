//! The canonical solution `u = ∂̄*_φ N_{φ,q} f` of `∂̄u = f`.
//!
//! Works with the centered `∂̄` of [`crate::calculus::dbar`] and its exact
//! weighted adjoint. The equation is imposed at interior nodes, where the
//! stencil fits, while `u` is free up to the boundary; this leaves `∂̄` with
//! a genuine kernel of boundary-determined discrete holomorphic forms. In the
//! frame `v = e^{-φ/2}u` the solution is `Bᴴy` with `BBᴴy = f`, orthogonal to
//! that kernel by construction.

use super::assemble::assemble_dbar;
use super::cg::conjugate_gradient;
use super::linalg::LinearOperator;
use super::sparse::CsrMatrix;
use super::{from_frame, to_frame, SpectralError};
use crate::calculus::{dbar, norm_sq, tabulate_weight, Grid, GridForm, WeightField};
use crate::weights::WeightExpr;
use num_complex::Complex64;

#[derive(Clone, Copy, Debug)]
pub struct CanonicalOptions {
    /// Largest accepted `‖∂̄f‖_φ / ‖f‖_φ`.
    pub closed_tol: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CanonicalOptions {
    fn default() -> Self {
        CanonicalOptions { closed_tol: 1e-6, tol: 1e-8, max_iter: 50_000 }
    }
}

#[derive(Clone, Debug)]
pub struct CanonicalSolution {
    pub u: GridForm,
    /// `‖∂̄u − f‖_φ / ‖f‖_φ`.
    pub residual: f64,
    pub iterations: usize,
}

/// `∂̄` from degree `q − 1` to `q` conjugated into the transformed frame,
/// restricted to rows at interior nodes.
pub struct FrameDbar {
    pub b: CsrMatrix,
    pub bh: CsrMatrix,
    /// Row of the full degree-`q` vector for each row of `b`.
    pub rows: Vec<usize>,
}

/// True if no coordinate index of `p` lies on the boundary of the grid.
pub fn is_interior(g: &Grid, p: usize) -> bool {
    (0..g.axes()).all(|a| {
        let i = g.axis_index(p, a);
        i > 0 && i + 1 < g.m
    })
}

impl FrameDbar {
    pub fn new(wf: &WeightField, q: usize) -> Result<Self, SpectralError> {
        let g = wf.grid;
        if q == 0 || q > g.n {
            return Err(SpectralError::Degree { n: g.n, q });
        }
        let len = g.len();
        let d = assemble_dbar(&g, q - 1)?;
        let phi = &wf.phi;
        let rows: Vec<usize> = (0..d.nrows()).filter(|&r| is_interior(&g, r % len)).collect();
        let cols: Vec<usize> = (0..d.ncols()).collect();
        let d = d.submatrix(&rows, &cols);
        let b = d.map_entries(|r, c, v| v * (0.5 * (phi[c % len] - phi[rows[r] % len])).exp());
        let bh = b.adjoint();
        Ok(FrameDbar { b, bh, rows })
    }

    fn row_norms_sq(&self) -> Vec<f64> {
        (0..self.b.nrows()).map(|r| self.b.row(r).1.iter().map(|v| v.norm_sqr()).sum()).collect()
    }
}

/// `BBᴴ` on degree-`q` vectors.
impl LinearOperator for FrameDbar {
    fn dim(&self) -> usize {
        self.b.nrows()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let t = self.bh.matvec(x);
        self.b.matvec_into(&t, y);
    }
}

pub fn canonical_solution(w: &WeightExpr, grid: &Grid, f: &GridForm) -> Result<CanonicalSolution, SpectralError> {
    canonical_solution_with(w, grid, f, &CanonicalOptions::default())
}

pub fn canonical_solution_with(w: &WeightExpr, grid: &Grid, f: &GridForm, opts: &CanonicalOptions) -> Result<CanonicalSolution, SpectralError> {
    if w.dim() != grid.n {
        return Err(SpectralError::Dimension { weight: w.dim(), grid: grid.n });
    }
    if f.grid != *grid {
        return Err(SpectralError::Mismatch { operator: grid.len(), form: f.grid.len() });
    }
    let wf = tabulate_weight(w, grid)?;
    let frame = FrameDbar::new(&wf, f.q)?;
    let fnorm = norm_sq(f, &wf)?.sqrt();
    if fnorm == 0.0 {
        return Ok(CanonicalSolution { u: GridForm::zeros(*grid, f.q - 1)?, residual: 0.0, iterations: 0 });
    }
    if f.q < grid.n {
        let ratio = norm_sq(&dbar(f)?, &wf)?.sqrt() / fnorm;
        if ratio > opts.closed_tol {
            return Err(SpectralError::NotClosed { ratio });
        }
    }
    let full = to_frame(f, &wf);
    let rhs: Vec<Complex64> = frame.rows.iter().map(|&r| full[r]).collect();
    let inv_diag: Vec<f64> = frame.row_norms_sq().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let out = conjugate_gradient(&frame, &rhs, Some(&inv_diag), opts.tol, opts.max_iter)?;
    let v = frame.bh.matvec(&out.x);
    let u = from_frame(&v, grid, f.q - 1, &wf)?;
    // ∂̄u at interior nodes against f everywhere
    let mut err = dbar(&u)?;
    let len = grid.len();
    for (i, (e, x)) in err.data.iter_mut().zip(&f.data).enumerate() {
        if !is_interior(grid, i % len) {
            *e = Complex64::new(0.0, 0.0);
        }
        *e -= x;
    }
    let residual = norm_sq(&err, &wf)?.sqrt() / fnorm;
    Ok(CanonicalSolution { u, residual, iterations: out.iterations })
}
