//! Discrete complex Laplacian `□_φ = ∂̄∂̄*_φ + ∂̄*_φ∂̄`: sparse assembly, low-lying
//! spectrum across truncation radii, and the Neumann and canonical solution
//! operators.

mod assemble;
mod canonical;
mod cg;
mod lanczos;
mod linalg;
mod sparse;

pub use assemble::{assemble_box, assemble_covariant_dbar, assemble_dbar, box_from_links, Difference, GaugeLinks};
pub use canonical::{canonical_solution, canonical_solution_with, CanonicalOptions, CanonicalSolution, FrameDbar};
pub use cg::{conjugate_gradient, CgOutcome};
pub use lanczos::{lowest_eigenpairs, rayleigh_quotient, EigenOptions, EigenResult};
pub use linalg::{dot, norm, LinearOperator};
pub use sparse::{CsrMatrix, SparseHermitian};

use crate::calculus::{make_grid, GridError, GridForm, WeightField};
use crate::weights::WeightExpr;
use num_complex::Complex64;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("degree {q} is outside the range for n = {n}")]
    Degree { n: usize, q: usize },
    #[error("weight has dimension {weight}, grid has {grid}")]
    Dimension { weight: usize, grid: usize },
    #[error("operator with {rows} rows exceeds the size limit {limit}")]
    TooLarge { rows: usize, limit: usize },
    #[error("assembled matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("iteration stagnated after {iterations} steps at relative residual {achieved:.3e}")]
    Stagnation { achieved: f64, iterations: usize },
    #[error("right-hand side is not ∂̄-closed: ‖∂̄f‖/‖f‖ = {ratio:.3e}")]
    NotClosed { ratio: f64 },
    #[error("need at least three increasing radii")]
    Radii,
    #[error("operator and form sizes differ ({operator} vs {form})")]
    Mismatch { operator: usize, form: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Lowest `k` eigenvalues of `a` by Lanczos; see [`lowest_eigenpairs`].
pub fn lowest_eigenvalues(a: &SparseHermitian, k: usize, tol: f64, max_iter: usize, seed: u64) -> EigenResult {
    let mut opts = EigenOptions::new(k);
    opts.tol = tol;
    opts.max_iter = max_iter;
    opts.seed = seed;
    lowest_eigenpairs(a, &opts)
}

/// Maps a form to the frame `v = e^{-φ/2} u` in which the box is assembled.
/// Scaled by `h^n` so that the plain Euclidean norm equals `‖u‖_φ`.
pub fn to_frame(u: &GridForm, wf: &WeightField) -> Vec<Complex64> {
    let len = u.grid.len();
    let s = u.grid.cell().sqrt();
    u.data.iter().enumerate().map(|(i, v)| v * (wf.weight[i % len].sqrt() * s)).collect()
}

/// Inverse of [`to_frame`].
pub fn from_frame(v: &[Complex64], grid: &crate::calculus::Grid, q: usize, wf: &WeightField) -> Result<GridForm, GridError> {
    let len = grid.len();
    let s = grid.cell().sqrt();
    let data = v.iter().enumerate().map(|(i, x)| x * ((0.5 * wf.phi[i % len]).exp() / s)).collect();
    GridForm::from_data(*grid, q, data)
}

/// Result of applying the discrete `N_{φ,q}`.
#[derive(Clone, Debug)]
pub struct NeumannSolution {
    pub u: GridForm,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// `u ≈ N_{φ,q} v`: conjugate gradients on the assembled box in the transformed
/// frame, Jacobi-preconditioned, then transformed back.
pub fn solve_neumann(a: &SparseHermitian, wf: &WeightField, v: &GridForm, tol: f64, max_iter: usize) -> Result<NeumannSolution, SpectralError> {
    let b = to_frame(v, wf);
    if b.len() != a.dim() {
        return Err(SpectralError::Mismatch { operator: a.dim(), form: b.len() });
    }
    let inv_diag: Vec<f64> = a.matrix().diagonal_values().iter().map(|d| if d.re > 0.0 { 1.0 / d.re } else { 1.0 }).collect();
    let out = conjugate_gradient(a, &b, Some(&inv_diag), tol, max_iter)?;
    let u = from_frame(&out.x, &v.grid, v.q, wf)?;
    Ok(NeumannSolution { u, iterations: out.iterations, relative_residual: out.relative_residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    Diverging,
    Plateau,
    Inconclusive,
}

impl fmt::Display for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trend::Diverging => "DIVERGING",
            Trend::Plateau => "PLATEAU",
            Trend::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Clone, Debug)]
pub struct RadiusRecord {
    pub radius: f64,
    pub m: usize,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct SpectrumReport {
    pub weight: String,
    pub q: usize,
    pub records: Vec<RadiusRecord>,
    pub classification: Trend,
}

impl SpectrumReport {
    pub fn csv_header(k: usize) -> String {
        let mut s = String::from("weight,q,R,m,k");
        for i in 1..=k {
            s.push_str(&format!(",lambda_{i}"));
        }
        for i in 1..=k {
            s.push_str(&format!(",residual_{i}"));
        }
        s.push_str(",classification");
        s
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.records
            .iter()
            .map(|r| {
                let mut s = format!("{},{},{},{},{}", self.weight, self.q, r.radius, r.m, r.eigenvalues.len());
                for v in &r.eigenvalues {
                    s.push_str(&format!(",{v:e}"));
                }
                for v in &r.residuals {
                    s.push_str(&format!(",{v:e}"));
                }
                s.push_str(&format!(",{}", self.classification));
                s
            })
            .collect()
    }
}

/// Thresholds of the trend classification.
#[derive(Clone, Copy, Debug)]
pub struct TrendConfig {
    pub growth: f64,
    pub plateau: f64,
}

impl Default for TrendConfig {
    fn default() -> Self {
        TrendConfig { growth: 1.3, plateau: 0.05 }
    }
}

/// DIVERGING if the `k`-th value grows by `growth` across the last two radii,
/// PLATEAU if each of the first `k` changes by less than `plateau` relative,
/// INCONCLUSIVE otherwise or when a solve did not converge.
pub fn classify_trend(records: &[RadiusRecord], cfg: &TrendConfig) -> Trend {
    if records.len() < 2 || records.iter().any(|r| !r.converged || r.eigenvalues.is_empty()) {
        return Trend::Inconclusive;
    }
    let a = &records[records.len() - 2].eigenvalues;
    let b = &records[records.len() - 1].eigenvalues;
    let k = a.len().min(b.len());
    if b[k - 1] >= cfg.growth * a[k - 1] && b[k - 1] > 0.0 {
        return Trend::Diverging;
    }
    if (0..k).all(|i| (b[i] - a[i]).abs() < cfg.plateau * a[i].abs().max(b[i].abs())) {
        return Trend::Plateau;
    }
    Trend::Inconclusive
}

/// Grid size giving spacing `2 / m_per_r` on a box of half-width `radius`.
pub fn grid_points(radius: f64, m_per_r: f64) -> usize {
    (radius * m_per_r).round() as usize + 1
}

/// Settings of [`compactness_diagnostic_with`].
#[derive(Clone, Copy, Debug)]
pub struct DiagnosticOptions {
    /// Grid points per unit radius; the spacing `2 / m_per_r` is shared by all radii.
    pub m_per_r: f64,
    pub k: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub trend: TrendConfig,
}

impl DiagnosticOptions {
    pub fn new(m_per_r: f64, k: usize, seed: u64) -> Self {
        DiagnosticOptions { m_per_r, k, tol: 1e-6, max_iter: 20_000, seed, trend: TrendConfig::default() }
    }
}

/// Lowest `k` eigenvalues of the box on nested grids of half-width `radii` at
/// a common spacing, classified with the default [`TrendConfig`].
pub fn compactness_diagnostic(w: &WeightExpr, q: usize, radii: &[f64], m_per_r: f64, k: usize, seed: u64) -> Result<SpectrumReport, SpectralError> {
    compactness_diagnostic_with(w, q, radii, &DiagnosticOptions::new(m_per_r, k, seed))
}

pub fn compactness_diagnostic_with(w: &WeightExpr, q: usize, radii: &[f64], opts: &DiagnosticOptions) -> Result<SpectrumReport, SpectralError> {
    if radii.len() < 3 || radii.windows(2).any(|p| p[1] <= p[0]) {
        return Err(SpectralError::Radii);
    }
    let mut records = Vec::with_capacity(radii.len());
    for &radius in radii {
        let m = grid_points(radius, opts.m_per_r);
        let grid = make_grid(w.dim(), radius, m)?;
        let a = assemble_box(w, &grid, q)?;
        let res = lowest_eigenvalues(&a, opts.k, opts.tol, opts.max_iter, opts.seed);
        records.push(RadiusRecord { radius, m, eigenvalues: res.values, residuals: res.residuals, converged: res.converged });
    }
    let classification = classify_trend(&records, &opts.trend);
    Ok(SpectrumReport { weight: w.to_string(), q, records, classification })
}
