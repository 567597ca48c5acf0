//! Quadrature checks of the weighted Kohn–Morrey formula
//!
//! ```text
//! ‖∂̄u‖²_φ + ‖∂̄*_φ u‖²_φ = Σ'_J Σ_j ‖∂u_J/∂z̄_j‖²_φ + Σ'_K Σ_{j,k} ∫ φ_{jk̄} u_{jK} ū_{kK} e^{-φ}
//! ```
//!
//! and of the bounds derived from it: the curvature term dominates
//! `∫ s_q |u|² e^{-φ}`, hence `‖u‖² ≤ C Q_φ(u,u)` and a tail estimate outside
//! large balls. All checks use compactly supported bump forms.

use crate::calculus::{bump_form, dbar_star, inner, norm_sq, q_form, tabulate_weight, wirtinger, Grid, GridError, GridForm, WeightField};
use crate::forms::Contraction;
use crate::levi::{hermitian_eigenvalues, s_q, LeviField};
use crate::weights::WeightExpr;
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Support of the test bumps as a fraction of the box half-width.
pub const BUMP_SUPPORT: f64 = 0.8;

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs_grad: f64,
    pub rhs_curv: f64,
    pub rel_err: f64,
    pub n: usize,
    pub q: usize,
    pub radius: f64,
    pub m: usize,
    pub seed: u64,
}

impl IdentityReport {
    pub const CSV_HEADER: &'static str = "seed,lhs,rhs_grad,rhs_curv,rel_err";

    pub fn csv_row(&self) -> String {
        format!("{},{:e},{:e},{:e},{:e}", self.seed, self.lhs, self.rhs_grad, self.rhs_curv, self.rel_err)
    }
}

pub fn relative_error(lhs: f64, rhs: f64) -> f64 {
    let denom = lhs.abs().max(rhs.abs());
    if denom == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / denom
    }
}

/// Independent per-trial seeds split from a master seed.
pub fn split_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.next_u64()).collect()
}

/// `Σ'_J Σ_j ‖∂u_J/∂z̄_j‖²_φ`.
pub fn gradient_term(u: &GridForm, wf: &WeightField) -> Result<f64, GridError> {
    let g = u.grid;
    let mut total = 0.0;
    for c in 0..u.components() {
        for j in 1..=g.n {
            let d = wirtinger(u.component(c), &g, j, true);
            total += d.par_iter().zip(&wf.weight).map(|(v, w)| v.norm_sqr() * w).sum::<f64>();
        }
    }
    Ok(total * g.cell())
}

/// Per-point `(curvature action, s_q |u|²)`, integrated against `e^{-φ} h^{2n}`.
fn curvature_integrals(u: &GridForm, levi: &LeviField, wf: &WeightField) -> (f64, f64) {
    let g = u.grid;
    let (n, q) = (g.n, u.q);
    if q == 0 {
        return (0.0, 0.0);
    }
    let contraction = Contraction::new(n, q).expect("degree checked by caller");
    let comps = u.components();
    let (curv, bound) = (0..g.len())
        .into_par_iter()
        .map_init(
            || vec![Complex64::new(0.0, 0.0); comps],
            |coeffs, p| {
                for (c, slot) in coeffs.iter_mut().enumerate() {
                    *slot = u.component(c)[p];
                }
                let mag: f64 = coeffs.iter().map(|v| v.norm_sqr()).sum();
                if mag == 0.0 {
                    return (0.0, 0.0);
                }
                let h = levi.matrix(&g.point(p));
                let act = contraction.action(&h, coeffs);
                let sq = s_q(&hermitian_eigenvalues(&h, n).expect("Levi matrix is Hermitian"), q);
                (act * wf.weight[p], sq * mag * wf.weight[p])
            },
        )
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    (curv * g.cell(), bound * g.cell())
}

/// Both sides of the Kohn–Morrey formula for a given form.
pub fn kohn_morrey_terms(u: &GridForm, w: &WeightExpr, wf: &WeightField) -> Result<(f64, f64, f64), GridError> {
    let lhs = q_form(u, u, wf)?.re;
    let rhs_grad = gradient_term(u, wf)?;
    let (rhs_curv, _) = curvature_integrals(u, &LeviField::new(w), wf);
    Ok((lhs, rhs_grad, rhs_curv))
}

/// Kohn–Morrey residual for the seeded bump form of degree `q`.
pub fn kohn_morrey_check(w: &WeightExpr, q: usize, grid: &Grid, seed: u64) -> Result<IdentityReport, GridError> {
    if q == 0 || q > grid.n {
        return Err(GridError::Degree { n: grid.n, q });
    }
    let wf = tabulate_weight(w, grid)?;
    let u = bump_form(grid, q, seed, BUMP_SUPPORT)?;
    let (lhs, rhs_grad, rhs_curv) = kohn_morrey_terms(&u, w, &wf)?;
    let rel_err = relative_error(lhs, rhs_grad + rhs_curv);
    Ok(IdentityReport { lhs, rhs_grad, rhs_curv, rel_err, n: grid.n, q, radius: grid.radius, m: grid.m, seed })
}

/// Empirical constant `Ĉ = max ‖u‖²_φ / Q_φ(u,u)` over seeded bump forms.
pub fn basic_estimate_probe(w: &WeightExpr, q: usize, grid: &Grid, trials: usize, seed: u64) -> Result<f64, GridError> {
    if q == 0 || q > grid.n {
        return Err(GridError::Degree { n: grid.n, q });
    }
    let wf = tabulate_weight(w, grid)?;
    let mut worst = 0.0f64;
    for s in split_seeds(seed, trials) {
        let u = bump_form(grid, q, s, BUMP_SUPPORT)?;
        let qf = q_form(&u, &u, &wf)?.re;
        let nrm = norm_sq(&u, &wf)?;
        worst = worst.max(if qf > 0.0 { nrm / qf } else { f64::INFINITY });
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct CurvatureBoundTrial {
    pub seed: u64,
    pub lhs: f64,
    pub rhs_curv: f64,
    /// `∫ s_q |u|² e^{-φ}`.
    pub s_q_integral: f64,
}

#[derive(Clone, Debug)]
pub struct CurvatureBoundReport {
    pub passed: bool,
    /// Smallest `(rhs_curv − ∫ s_q|u|²e^{-φ}) / scale` over trials.
    pub worst_margin: f64,
    /// Smallest `(lhs − ∫ s_q|u|²e^{-φ}) / scale` over trials.
    pub worst_lhs_margin: f64,
    pub trials: Vec<CurvatureBoundTrial>,
}

/// Checks the pointwise bound `curvature ≥ s_q |u|²` in integrated form, and
/// `Q_φ(u,u) ≥ ∫ s_q|u|²e^{-φ}` up to a discretization slack `slack · h² · scale`.
pub fn curvature_lower_bound_check(
    w: &WeightExpr,
    q: usize,
    grid: &Grid,
    trials: usize,
    seed: u64,
    slack: f64,
) -> Result<CurvatureBoundReport, GridError> {
    if q == 0 || q > grid.n {
        return Err(GridError::Degree { n: grid.n, q });
    }
    let wf = tabulate_weight(w, grid)?;
    let levi = LeviField::new(w);
    let mut report = CurvatureBoundReport { passed: true, worst_margin: f64::INFINITY, worst_lhs_margin: f64::INFINITY, trials: Vec::new() };
    for s in split_seeds(seed, trials) {
        let u = bump_form(grid, q, s, BUMP_SUPPORT)?;
        curvature_trial(&u, &levi, &wf, s, grid.h * grid.h * slack, &mut report)?;
    }
    Ok(report)
}

/// Adds one form to a curvature-bound report.
pub fn curvature_trial(
    u: &GridForm,
    levi: &LeviField,
    wf: &WeightField,
    seed: u64,
    lhs_slack: f64,
    report: &mut CurvatureBoundReport,
) -> Result<(), GridError> {
    let (rhs_curv, s_q_integral) = curvature_integrals(u, levi, wf);
    let lhs = q_form(u, u, wf)?.re;
    let scale = rhs_curv.abs().max(s_q_integral.abs());
    let (margin, lhs_margin) = if scale == 0.0 { (0.0, lhs.max(0.0)) } else { ((rhs_curv - s_q_integral) / scale, (lhs - s_q_integral) / scale) };
    report.worst_margin = report.worst_margin.min(margin);
    report.worst_lhs_margin = report.worst_lhs_margin.min(lhs_margin);
    if margin < -1e-10 || lhs_margin < -lhs_slack {
        report.passed = false;
    }
    report.trials.push(CurvatureBoundTrial { seed, lhs, rhs_curv, s_q_integral });
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailRow {
    pub fraction: f64,
    pub radius: f64,
    pub tail_mass: f64,
    /// `Q_φ(u,u) / inf_{|z| ≥ ρ} s_q`, infinite if the infimum is not positive.
    pub bound: f64,
    pub violated: bool,
}

#[derive(Clone, Debug)]
pub struct TailReport {
    pub q_norm_sq: f64,
    pub norm_sq: f64,
    pub rows: Vec<TailRow>,
}

impl TailReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| !r.violated)
    }
}

/// Tail mass `∫_{|z| ≥ ρR} |u|² e^{-φ}` against `‖u‖²_Q / inf_{|z| ≥ ρR} s_q`
/// for each fraction `ρ`; the infimum runs over grid points.
pub fn tail_mass_report(u: &GridForm, w: &WeightExpr, wf: &WeightField, fractions: &[f64], slack: f64) -> Result<TailReport, GridError> {
    let g = u.grid;
    if wf.grid != g {
        return Err(GridError::Mismatch);
    }
    if u.q == 0 {
        return Err(GridError::Degree { n: g.n, q: 0 });
    }
    let levi = LeviField::new(w);
    let q = u.q;
    // per point: (|z|, weighted mass, s_q)
    let samples: Vec<(f64, f64, f64)> = (0..g.len())
        .into_par_iter()
        .map(|p| {
            let z = g.point(p);
            let r = z.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let h = levi.matrix(&z);
            let sq = s_q(&hermitian_eigenvalues(&h, g.n).expect("Levi matrix is Hermitian"), q);
            (r, u.pointwise_norm_sq(p) * wf.weight[p] * g.cell(), sq)
        })
        .collect();
    let q_norm_sq = q_form(u, u, wf)?.re;
    let norm = norm_sq(u, wf)?;
    let rows = fractions
        .iter()
        .map(|&fraction| {
            let rho = fraction * g.radius;
            let (tail, inf) = samples
                .iter()
                .filter(|s| s.0 >= rho)
                .fold((0.0, f64::INFINITY), |(t, i), s| (t + s.1, f64::min(i, s.2)));
            let bound = if inf > 0.0 { q_norm_sq / inf } else { f64::INFINITY };
            TailRow { fraction, radius: rho, tail_mass: tail, bound, violated: tail > bound + slack }
        })
        .collect();
    Ok(TailReport { q_norm_sq, norm_sq: norm, rows })
}

/// `‖∂̄*_φ u‖²_φ`, exposed for reports that split the Dirichlet form.
pub fn dbar_star_norm_sq(u: &GridForm, wf: &WeightField) -> Result<f64, GridError> {
    let s = dbar_star(u, wf)?;
    Ok(inner(&s, &s, wf)?.re)
}
