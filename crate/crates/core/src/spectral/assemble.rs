//! Sparse operators of the discrete complex.
//!
//! The complex Laplacian is assembled in the frame `v = e^{-φ/2} u`, where the
//! weighted inner product becomes the plain one and `∂̄` becomes
//! `∂/∂z̄_j + ½ ∂φ/∂z̄_j`. That operator is a magnetic Cauchy–Riemann operator
//! with real vector potential `A = ½(−φ_y, φ_x)` in each complex coordinate, so
//! it is discretized gauge-covariantly: each grid edge carries the phase
//! `exp(−i ∫ A·dl)`, integrated by 3-point Gauss–Legendre. Forward and
//! backward one-sided differences are each exactly adjoint-consistent, and the
//! box is the average of the two Hodge Laplacians, which suppresses the
//! spurious near-zero modes a centered stencil produces.

use super::sparse::{CsrMatrix, SparseHermitian};
use super::SpectralError;
use crate::calculus::{Grid, DEFAULT_SIZE_LIMIT};
use crate::forms::{binomial, MultiIndexTable};
use crate::weights::{complex_gradient, WeightExpr};
use num_complex::Complex64;
use rayon::prelude::*;

const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Difference {
    Forward,
    Backward,
}

/// Edge phases: `links[a][p]` is the phase on the edge from `p` to `p + e_a`
/// (unused on the last layer of axis `a`).
#[derive(Clone, Debug)]
pub struct GaugeLinks {
    pub grid: Grid,
    pub links: Vec<Vec<Complex64>>,
}

impl GaugeLinks {
    /// All links equal to one: the flat operator, or the plain difference scheme.
    pub fn trivial(grid: &Grid) -> Self {
        GaugeLinks { grid: *grid, links: vec![vec![Complex64::new(1.0, 0.0); grid.len()]; grid.axes()] }
    }

    /// Links for the weight `w`: `exp((i/2)∫φ_y dx)` on `x`-edges and `exp(−(i/2)∫φ_x dy)` on `y`-edges.
    pub fn for_weight(w: &WeightExpr, grid: &Grid) -> Result<Self, SpectralError> {
        if w.dim() != grid.n {
            return Err(SpectralError::Dimension { weight: w.dim(), grid: grid.n });
        }
        let grad: Vec<_> = complex_gradient(w).iter().map(WeightExpr::compile).collect();
        let h = grid.h;
        let mut links = Vec::with_capacity(grid.axes());
        for axis in 0..grid.axes() {
            let j = axis / 2;
            let is_x = axis % 2 == 0;
            let tape = &grad[j];
            let stride = grid.stride(axis);
            let col: Vec<Complex64> = (0..grid.len())
                .into_par_iter()
                .map_init(Vec::new, |stack, p| {
                    if (p / stride) % grid.m + 1 >= grid.m {
                        return Complex64::new(1.0, 0.0);
                    }
                    let mut z = grid.point(p);
                    let base = z[j];
                    let mut integral = 0.0;
                    for (t, wt) in GAUSS3 {
                        z[j] = if is_x { base + Complex64::new(t * h, 0.0) } else { base + Complex64::new(0.0, t * h) };
                        let dz = tape.eval_with(&z, stack);
                        // φ_x = 2 Re ∂φ/∂z, φ_y = −2 Im ∂φ/∂z
                        let val = if is_x { -2.0 * dz.im } else { 2.0 * dz.re };
                        integral += wt * val;
                    }
                    integral *= h;
                    let phase = if is_x { 0.5 * integral } else { -0.5 * integral };
                    Complex64::from_polar(1.0, phase)
                })
                .collect();
            links.push(col);
        }
        Ok(GaugeLinks { grid: *grid, links })
    }
}

fn check_size(grid: &Grid, q: usize) -> Result<(), SpectralError> {
    let rows = binomial(grid.n, q).saturating_mul(grid.len());
    if rows > DEFAULT_SIZE_LIMIT {
        return Err(SpectralError::TooLarge { rows, limit: DEFAULT_SIZE_LIMIT });
    }
    Ok(())
}

/// Covariant one-sided `∂̄` from degree `q` to `q + 1` in the transformed frame.
pub fn assemble_covariant_dbar(links: &GaugeLinks, q: usize, diff: Difference) -> Result<CsrMatrix, SpectralError> {
    let g = links.grid;
    if q >= g.n {
        return Err(SpectralError::Degree { n: g.n, q });
    }
    check_size(&g, q + 1)?;
    let n_pts = g.len();
    let table = MultiIndexTable::new(g.n, q).expect("degree checked");
    let wedge = table.wedge_map();
    let inv_h = 1.0 / g.h;
    let half = Complex64::new(0.5, 0.0);
    let half_i = Complex64::new(0.0, 0.5);
    let mut trip = Vec::new();
    for r in 0..table.len() {
        for j in 1..=g.n {
            let Some((sign, l)) = wedge[r * g.n + j - 1] else { continue };
            for (axis, coef) in [(2 * (j - 1), half), (2 * j - 1, half_i)] {
                let c = coef * sign * inv_h;
                let stride = g.stride(axis);
                let link = &links.links[axis];
                for p in 0..n_pts {
                    let i = (p / stride) % g.m;
                    let (row, col) = (l * n_pts + p, r * n_pts + p);
                    match diff {
                        Difference::Forward => {
                            trip.push((row, col, -c));
                            if i + 1 < g.m {
                                trip.push((row, col + stride, c * link[p]));
                            }
                        }
                        Difference::Backward => {
                            trip.push((row, col, c));
                            if i > 0 {
                                trip.push((row, col - stride, -c * link[p - stride].conj()));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(binomial(g.n, q + 1) * n_pts, table.len() * n_pts, trip))
}

/// Plain centered `∂̄` from degree `q` to `q + 1` in the original frame; the
/// matrix of `calculus::dbar`.
pub fn assemble_dbar(grid: &Grid, q: usize) -> Result<CsrMatrix, SpectralError> {
    let g = *grid;
    if q >= g.n {
        return Err(SpectralError::Degree { n: g.n, q });
    }
    check_size(&g, q + 1)?;
    let n_pts = g.len();
    let table = MultiIndexTable::new(g.n, q).expect("degree checked");
    let wedge = table.wedge_map();
    let mut trip = Vec::new();
    for r in 0..table.len() {
        for j in 1..=g.n {
            let Some((sign, l)) = wedge[r * g.n + j - 1] else { continue };
            for (axis, coef) in [(2 * (j - 1), Complex64::new(0.5, 0.0)), (2 * j - 1, Complex64::new(0.0, 0.5))] {
                let c = coef * sign / (2.0 * g.h);
                let stride = g.stride(axis);
                for p in 0..n_pts {
                    let i = (p / stride) % g.m;
                    let (row, col) = (l * n_pts + p, r * n_pts + p);
                    if i + 1 < g.m {
                        trip.push((row, col + stride, c));
                    }
                    if i > 0 {
                        trip.push((row, col - stride, -c));
                    }
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(binomial(g.n, q + 1) * n_pts, table.len() * n_pts, trip))
}

/// `½ Σ_± (D_q^{±*} D_q^± + D_{q−1}^± D_{q−1}^{±*})` from precomputed links.
pub fn box_from_links(links: &GaugeLinks, q: usize) -> Result<SparseHermitian, SpectralError> {
    let g = links.grid;
    if q > g.n {
        return Err(SpectralError::Degree { n: g.n, q });
    }
    check_size(&g, q)?;
    let size = binomial(g.n, q) * g.len();
    let mut acc = CsrMatrix::from_triplets(size, size, Vec::new());
    for diff in [Difference::Forward, Difference::Backward] {
        if q < g.n {
            let d = assemble_covariant_dbar(links, q, diff)?;
            acc = acc.add_scaled(1.0, &d.adjoint().matmul(&d), 0.5);
        }
        if q > 0 {
            let d = assemble_covariant_dbar(links, q - 1, diff)?;
            acc = acc.add_scaled(1.0, &d.matmul(&d.adjoint()), 0.5);
        }
    }
    SparseHermitian::new(acc).map_err(|defect| SpectralError::NotHermitian { defect })
}

/// The discrete complex Laplacian `□_φ` on `(0,q)`-forms vanishing outside
/// `grid`, transformed frame.
///
/// Assembled on the grid widened by one layer and restricted to the original
/// nodes, so couplings across the boundary are kept: the result is the
/// quadratic form of the whole lattice restricted to forms supported on
/// `grid`, and nested grids of equal spacing give principal submatrices.
pub fn assemble_box(w: &WeightExpr, grid: &Grid, q: usize) -> Result<SparseHermitian, SpectralError> {
    let g = *grid;
    if q > g.n {
        return Err(SpectralError::Degree { n: g.n, q });
    }
    check_size(&g, q)?;
    let wide = Grid { n: g.n, radius: g.radius + g.h, m: g.m + 2, h: g.h };
    let full = box_from_links(&GaugeLinks::for_weight(w, &wide)?, q)?;
    let wide_len = wide.len();
    let mut rows = Vec::with_capacity(binomial(g.n, q) * g.len());
    let mut idx = vec![0; g.axes()];
    for c in 0..binomial(g.n, q) {
        for p in 0..g.len() {
            for (a, i) in idx.iter_mut().enumerate() {
                *i = g.axis_index(p, a) + 1;
            }
            rows.push(c * wide_len + wide.point_index(&idx));
        }
    }
    SparseHermitian::new(full.matrix().submatrix(&rows, &rows)).map_err(|defect| SpectralError::NotHermitian { defect })
}
