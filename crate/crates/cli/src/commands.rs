//! Command drivers. Each returns a CSV body and a pass/fail verdict; the
//! caller adds the configuration header and picks the destination.

use crate::config::{RunConfig, SolveMode};
use dbar_core::calculus::{bump_form, dbar, make_grid, norm_sq, tabulate_weight, GridError};
use dbar_core::identity::{kohn_morrey_check, split_seeds, IdentityReport, BUMP_SUPPORT};
use dbar_core::levi::{criterion_scan, Classification, LeviError};
use dbar_core::spectral::{
    assemble_box, canonical_solution_with, compactness_diagnostic_with, grid_points, solve_neumann, CanonicalOptions, DiagnosticOptions,
    SpectralError, SpectrumReport,
};
use dbar_core::weights::{builtin_source, BUILTIN_WEIGHTS};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Levi(#[from] LeviError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub body: String,
    /// `None` on pass, otherwise the reason for the failed check.
    pub failure: Option<String>,
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    use crate::config::Command::*;
    match cfg.command {
        Analyze => analyze(cfg),
        Verify => verify(cfg),
        Spectrum => spectrum(cfg),
        Solve => solve(cfg),
    }
}

/// Sampled existence/compactness criterion. A `FAILS` classification is a failed check.
pub fn analyze(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let report = criterion_scan(&cfg.weight, cfg.q, &cfg.radii, cfg.directions, cfg.seed)?;
    let failure = (report.classification == Classification::Fails).then(|| {
        let w: Vec<String> = report.witness.iter().map(|z| format!("{}{:+}i", z.re, z.im)).collect();
        format!("criterion fails for q={} near z=({})", cfg.q, w.join(";"))
    });
    Ok(Outcome { body: report.to_csv(), failure })
}

/// Kohn–Morrey residuals over seeded bump forms; passes if every `rel_err ≤ tol`.
pub fn verify(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let grid = make_grid(cfg.n, cfg.radius, cfg.m)?;
    let reports: Vec<IdentityReport> =
        split_seeds(cfg.seed, cfg.trials).into_iter().map(|s| kohn_morrey_check(&cfg.weight, cfg.q, &grid, s)).collect::<Result<_, _>>()?;
    let mut body = String::from(IdentityReport::CSV_HEADER);
    body.push('\n');
    for r in &reports {
        body.push_str(&r.csv_row());
        body.push('\n');
    }
    let worst = reports.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    let failure = (worst > cfg.tol).then(|| format!("max rel_err {worst:e} exceeds tol {:e}", cfg.tol));
    Ok(Outcome { body, failure })
}

pub fn spectrum(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let mut opts = DiagnosticOptions::new(cfg.m_per_r, cfg.k, cfg.seed);
    opts.tol = cfg.tol;
    opts.max_iter = cfg.max_iter;
    let report = compactness_diagnostic_with(&cfg.weight, cfg.q, &cfg.radii, &opts)?;
    if let Some(path) = &cfg.matrix_out {
        let r = *cfg.radii.last().expect("radii validated");
        let grid = make_grid(cfg.n, r, grid_points(r, cfg.m_per_r))?;
        let a = assemble_box(&cfg.weight, &grid, cfg.q)?;
        let file = File::create(path).map_err(|source| RunError::Io { path: path.clone(), source })?;
        a.matrix().write_matrix_market(BufWriter::new(file), true).map_err(|source| RunError::Io { path: path.clone(), source })?;
    }
    let failure = report
        .records
        .iter()
        .find(|r| !r.converged)
        .map(|r| format!("eigensolver did not reach tol {:e} at R={} within {} applications", cfg.tol, r.radius, cfg.max_iter));
    Ok(Outcome { body: spectrum_csv(&report, cfg.k), failure })
}

fn spectrum_csv(report: &SpectrumReport, k: usize) -> String {
    let mut body = SpectrumReport::csv_header(k);
    body.push('\n');
    for row in report.csv_rows() {
        body.push_str(&row);
        body.push('\n');
    }
    body
}

/// Largest accepted `‖∂̄u − f‖/‖f‖` for the canonical solution.
pub const CANONICAL_RESIDUAL_LIMIT: f64 = 1e-2;

/// Neumann solve `□u = v` or canonical solution of `∂̄u = ∂̄g`, for seeded bumps.
pub fn solve(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let grid = make_grid(cfg.n, cfg.radius, cfg.m)?;
    let wf = tabulate_weight(&cfg.weight, &grid)?;
    let header = "mode,q,R,m,seed,iterations,residual,norm_rhs,norm_solution";
    let (u, iterations, residual, rhs_norm, failure) = match cfg.mode {
        SolveMode::Neumann => {
            let v = bump_form(&grid, cfg.q, cfg.seed, BUMP_SUPPORT)?;
            let a = assemble_box(&cfg.weight, &grid, cfg.q)?;
            match solve_neumann(&a, &wf, &v, cfg.tol, cfg.max_iter) {
                Ok(sol) => (sol.u, sol.iterations, sol.relative_residual, norm_sq(&v, &wf)?.sqrt(), None),
                Err(SpectralError::Stagnation { achieved, iterations }) => {
                    let body = format!("{header}\nneumann,{},{},{},{},{iterations},{achieved:e},,\n", cfg.q, cfg.radius, cfg.m, cfg.seed);
                    return Ok(Outcome { body, failure: Some(format!("conjugate gradients stagnated at {achieved:e}")) });
                }
                Err(e) => return Err(e.into()),
            }
        }
        SolveMode::Canonical => {
            let g = bump_form(&grid, cfg.q - 1, cfg.seed, BUMP_SUPPORT)?;
            let f = dbar(&g)?;
            let opts = CanonicalOptions { tol: cfg.tol, max_iter: cfg.max_iter, ..CanonicalOptions::default() };
            let sol = canonical_solution_with(&cfg.weight, &grid, &f, &opts)?;
            let failure = (sol.residual > CANONICAL_RESIDUAL_LIMIT)
                .then(|| format!("residual {:e} exceeds {CANONICAL_RESIDUAL_LIMIT:e}", sol.residual));
            (sol.u, sol.iterations, sol.residual, norm_sq(&f, &wf)?.sqrt(), failure)
        }
    };
    if let Some(path) = &cfg.form_out {
        let file = File::create(path).map_err(|source| RunError::Io { path: path.clone(), source })?;
        u.write_to(BufWriter::new(file))?;
    }
    let body = format!(
        "{header}\n{},{},{},{},{},{iterations},{residual:e},{rhs_norm:e},{:e}\n",
        cfg.mode,
        cfg.q,
        cfg.radius,
        cfg.m,
        cfg.seed,
        norm_sq(&u, &wf)?.sqrt()
    );
    Ok(Outcome { body, failure })
}

/// `name,n,source,description` for every built-in weight.
pub fn list_weights() -> String {
    let mut out = String::from("name,n,source,description\n");
    for b in BUILTIN_WEIGHTS {
        let n = b.fixed_dim.unwrap_or(2);
        let source = builtin_source(b.name, n).expect("built-in weights parse");
        let dims = b.fixed_dim.map_or("any".to_string(), |d| d.to_string());
        let _ = writeln!(out, "{},{dims},\"{source}\",\"{}\"", b.name, b.description.split_whitespace().collect::<Vec<_>>().join(" "));
    }
    out
}
