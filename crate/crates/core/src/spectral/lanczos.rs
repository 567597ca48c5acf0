//! Thick-restart Lanczos with full reorthogonalization and locking, for the
//! lowest eigenpairs of a Hermitian operator. Large operators with a known norm
//! bound are run through a Chebyshev filter that stretches the low end of the
//! spectrum; pairs are still accepted on their residuals for the original operator.

use super::linalg::{axpy, dot, norm, orthogonalize, random_vector, scale, seeded_rng, LinearOperator};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::cell::Cell;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Smallest dimension at which the Chebyshev filter is used.
const FILTER_MIN_DIM: usize = 20_000;

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub k: usize,
    /// Residual target relative to the operator norm estimate.
    pub tol: f64,
    /// Budget of operator applications.
    pub max_iter: usize,
    /// Largest Krylov basis kept in memory.
    pub krylov_dim: usize,
    pub seed: u64,
    /// Chebyshev filter degree for large operators, rounded up to even; below 2 disables it.
    pub filter_degree: usize,
}

impl EigenOptions {
    pub fn new(k: usize) -> Self {
        EigenOptions { k, tol: 1e-6, max_iter: 20_000, krylov_dim: (3 * k + 30).max(60), seed: 0, filter_degree: 12 }
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
    /// True residuals `‖Av − λv‖` of the unit vectors.
    pub residuals: Vec<f64>,
    /// Largest Ritz value magnitude seen, used as `‖A‖`.
    pub norm_estimate: f64,
    pub converged: bool,
    pub matvecs: usize,
}

fn combine(basis: &[Vec<Complex64>], coeffs: &DMatrix<Complex64>, col: usize) -> Vec<Complex64> {
    let mut x = vec![ZERO; basis[0].len()];
    for (i, v) in basis.iter().enumerate() {
        axpy(coeffs[(i, col)], v, &mut x);
    }
    x
}

/// Random unit vector orthogonal to both sets, or `None` if none is left.
fn fresh_vector(dim: usize, rng: &mut ChaCha8Rng, a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Option<Vec<Complex64>> {
    if a.len() + b.len() >= dim {
        return None;
    }
    let mut v = random_vector(dim, rng);
    let before = norm(&v);
    orthogonalize(&mut v, a);
    orthogonalize(&mut v, b);
    let nv = norm(&v);
    if nv <= 1e-10 * before {
        return None;
    }
    scale(1.0 / nv, &mut v);
    Some(v)
}

/// Lowest `k` eigenpairs of a Hermitian operator.
///
/// Converged Ritz pairs are locked and deflated. Once `k` pairs are locked, a
/// fresh random start orthogonal to them is run once more to catch missed
/// copies of degenerate eigenvalues.
pub fn lowest_eigenpairs(a: &dyn LinearOperator, opts: &EigenOptions) -> EigenResult {
    let dim = a.dim();
    let k = opts.k.min(dim);
    let mut rng = seeded_rng(opts.seed);
    let use_filter = opts.filter_degree >= 2 && dim >= FILTER_MIN_DIM && k > 0 && opts.krylov_dim + k < dim;
    let filtered = match a.norm_bound() {
        Some(bound) if use_filter => filtered_run(a, bound, k, opts, &mut rng),
        _ => None,
    };
    let mut run = filtered.unwrap_or_else(|| {
        let tol = opts.tol;
        thick_restart(a, 1, k, opts, opts.max_iter, &mut rng, &mut |_, theta, est, norm_est| (theta, est <= tol * norm_est))
    });

    sort_locked(&mut run.values, &mut run.vectors);
    let residuals: Vec<f64> = run
        .vectors
        .iter()
        .zip(&run.values)
        .map(|(x, &lam)| {
            let mut ax = vec![ZERO; dim];
            a.apply(x, &mut ax);
            axpy(Complex64::new(-lam, 0.0), x, &mut ax);
            norm(&ax)
        })
        .collect();
    let converged = run.converged && run.vectors.len() == k;
    EigenResult { values: run.values, vectors: run.vectors, residuals, norm_estimate: run.norm_estimate, converged, matvecs: run.matvecs }
}

struct Run {
    values: Vec<f64>,
    vectors: Vec<Vec<Complex64>>,
    norm_estimate: f64,
    converged: bool,
    matvecs: usize,
}

/// `(value, accepted)` for a unit Ritz vector, its Ritz value, the estimated
/// residual and the current norm estimate, all for the operator being iterated.
type Judge<'a> = dyn FnMut(&[Complex64], f64, f64, f64) -> (f64, bool) + 'a;

/// Lanczos on `op`, each application counting `cost` towards `budget`.
/// Locked pairs are ordered by their Ritz values for `op`; `judge` decides
/// acceptance and supplies the reported value.
fn thick_restart(op: &dyn LinearOperator, cost: usize, k: usize, opts: &EigenOptions, budget: usize, rng: &mut ChaCha8Rng, judge: &mut Judge) -> Run {
    let dim = op.dim();
    let mut locked_vals: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut locked: Vec<Vec<Complex64>> = Vec::new();
    let mut matvecs = 0usize;
    let mut norm_est = 0.0f64;
    let mut verifying = false;
    let mut converged = k == 0;

    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut h: Vec<Vec<Complex64>> = Vec::new(); // h[r][c], grown in place
    let mut next: Option<Vec<Complex64>> = None;
    let mut w = vec![ZERO; dim];

    while !converged && matvecs < budget {
        if next.is_none() {
            next = fresh_vector(dim, rng, &locked, &basis);
        }
        let mdim = opts.krylov_dim.max(2);
        let mut beta = 0.0;
        // expand
        while basis.len() < mdim && matvecs < budget {
            let Some(u) = next.take() else { break };
            let j = basis.len();
            basis.push(u);
            op.apply(&basis[j], &mut w);
            matvecs += cost;
            orthogonalize(&mut w, &locked);
            let col = orthogonalize(&mut w, &basis);
            // the basis pass reintroduces locked components, which Lanczos amplifies
            orthogonalize(&mut w, &locked);
            for row in h.iter_mut() {
                row.push(ZERO);
            }
            h.push(vec![ZERO; j + 1]);
            for (r, c) in col.iter().enumerate() {
                h[r][j] = *c;
                h[j][r] = c.conj();
            }
            h[j][j] = Complex64::new(col[j].re, 0.0);
            norm_est = norm_est.max(col[j].re.abs());
            beta = norm(&w);
            if beta > 1e-10 * norm_est.max(f64::MIN_POSITIVE) {
                scale(1.0 / beta, &mut w);
                next = Some(std::mem::replace(&mut w, vec![ZERO; dim]));
            } else {
                beta = 0.0;
                next = fresh_vector(dim, rng, &locked, &basis);
            }
        }
        let m = basis.len();
        if m == 0 {
            converged = locked.len() >= k;
            break;
        }
        let hm = DMatrix::from_fn(m, m, |r, c| h[r][c]);
        let eig = SymmetricEigen::new(hm);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let s = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
        for t in &theta {
            norm_est = norm_est.max(t.abs());
        }
        let thresh = opts.tol * norm_est;
        let resid: Vec<f64> = (0..m).map(|c| beta * s[(m - 1, c)].norm()).collect();

        if verifying {
            let kth = locked_vals.last().copied().unwrap_or(f64::NEG_INFINITY);
            if theta[0] >= kth - thresh {
                converged = true;
                break;
            }
            // something lower than the k-th locked value: keep iterating
            verifying = false;
        }

        // lock converged pairs in ascending order
        let wanted = k.saturating_sub(locked.len()).max(1);
        let mut n_lock = 0;
        while n_lock < m && n_lock < wanted {
            let x = combine(&basis, &s, n_lock);
            let (value, accepted) = judge(&x, theta[n_lock], resid[n_lock], norm_est);
            if !accepted {
                break;
            }
            locked_vals.push(theta[n_lock]);
            values.push(value);
            locked.push(x);
            n_lock += 1;
        }
        if n_lock > 0 && locked.len() >= k {
            sort_by_key(&mut locked_vals, &mut values, &mut locked);
            locked_vals.truncate(k);
            values.truncate(k);
            locked.truncate(k);
            verifying = true;
            basis.clear();
            h.clear();
            next = None;
            continue;
        }
        if next.is_none() && n_lock == 0 && m + locked.len() >= dim {
            // whole space spanned: every Ritz pair is exact
            for c in 0..k.min(m) {
                let x = combine(&basis, &s, c);
                values.push(judge(&x, theta[c], 0.0, norm_est).0);
                locked_vals.push(theta[c]);
                locked.push(x);
            }
            converged = true;
            break;
        }
        // thick restart with the lowest unconverged Ritz vectors
        let remaining = k.saturating_sub(locked.len());
        let keep = (2 * remaining + 8).max((m - n_lock) / 2).min(m - n_lock - 1).max(1).min(m - n_lock);
        let cols: Vec<usize> = (n_lock..n_lock + keep).collect();
        basis = cols.iter().map(|&c| combine(&basis, &s, c)).collect();
        h = (0..keep)
            .map(|r| (0..keep).map(|c| if r == c { Complex64::new(theta[cols[r]], 0.0) } else { ZERO }).collect())
            .collect();
    }
    values.truncate(k);
    locked.truncate(k);
    Run { values, vectors: locked, norm_estimate: norm_est, converged, matvecs }
}

/// Ritz values of a single unrestarted Lanczos run of `steps` steps, ascending,
/// and the final off-diagonal `β`.
fn ritz_values(a: &dyn LinearOperator, steps: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let dim = a.dim();
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut betas = Vec::new();
    let mut v = random_vector(dim, rng);
    scale(1.0 / norm(&v), &mut v);
    let mut w = vec![ZERO; dim];
    let mut beta = 0.0;
    for _ in 0..steps.min(dim) {
        a.apply(&v, &mut w);
        basis.push(std::mem::take(&mut v));
        let aj = orthogonalize(&mut w, &basis)[basis.len() - 1].re;
        alpha.push(aj);
        beta = norm(&w);
        if beta <= 1e-12 * aj.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        betas.push(beta);
        v = std::mem::replace(&mut w, vec![ZERO; dim]);
        scale(1.0 / beta, &mut v);
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c || c + 1 == r {
            betas[r.min(c)]
        } else {
            0.0
        }
    });
    let mut theta: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
    theta.sort_by(f64::total_cmp);
    (theta, beta)
}

/// `-T_d((A - c)/e)` for even `d`: maps `[c - e, c + e]` into `[-1, 1]` and
/// sends eigenvalues below `c - e` far below `-1`, preserving their order.
struct Chebyshev<'a> {
    a: &'a dyn LinearOperator,
    degree: usize,
    center: f64,
    half_width: f64,
}

impl LinearOperator for Chebyshev<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let (c, e) = (self.center, self.half_width);
        let mut prev = x.to_vec();
        let mut cur = vec![ZERO; x.len()];
        self.a.apply(x, &mut cur);
        cur.par_iter_mut().zip(x).for_each(|(u, xi)| *u = (*u - c * xi) / e);
        let mut tmp = vec![ZERO; x.len()];
        for _ in 2..=self.degree {
            self.a.apply(&cur, &mut tmp);
            // prev <- 2 L cur - prev, then swap roles
            prev.par_iter_mut().zip(&tmp).zip(&cur).for_each(|((p, t), u)| *p = 2.0 * (*t - c * u) / e - *p);
            std::mem::swap(&mut prev, &mut cur);
        }
        y.par_iter_mut().zip(&cur).for_each(|(yi, u)| *yi = -u);
    }
}

/// Lanczos on a Chebyshev-filtered operator. `None` if the spectrum estimate
/// leaves no room for a damped interval.
fn filtered_run(a: &dyn LinearOperator, bound: f64, k: usize, opts: &EigenOptions, rng: &mut ChaCha8Rng) -> Option<Run> {
    let steps = opts.krylov_dim.min(opts.max_iter);
    let (theta, _) = ritz_values(a, steps, rng);
    let m = theta.len();
    if m < k + 2 {
        return None;
    }
    let norm_a = theta[0].abs().max(theta[m - 1].abs());
    // Ritz values bound the eigenvalues of the same index from above, so at
    // least p + 1 eigenvalues lie at or below theta[p].
    let p = (2 * k + 8).min(m - 2);
    let lower = theta[p];
    let upper = bound.max(theta[m - 1]) * 1.01;
    if !(lower < upper) || lower <= theta[0] {
        return None;
    }
    let degree = opts.filter_degree.div_ceil(2) * 2;
    let filter = Chebyshev { a, degree, center: 0.5 * (upper + lower), half_width: 0.5 * (upper - lower) };
    let thresh = opts.tol * norm_a;
    let extra = Cell::new(steps);
    let mut judge = |x: &[Complex64], _: f64, _: f64, _: f64| {
        let mut ax = vec![ZERO; x.len()];
        a.apply(x, &mut ax);
        extra.set(extra.get() + 1);
        let lam = dot(x, &ax).re;
        axpy(Complex64::new(-lam, 0.0), x, &mut ax);
        (lam, norm(&ax) <= thresh)
    };
    let budget = opts.max_iter.saturating_sub(steps);
    let mut run = thick_restart(&filter, degree, k, opts, budget, rng, &mut judge);
    run.matvecs += extra.get();
    run.norm_estimate = norm_a;
    Some(run)
}

fn sort_by_key(keys: &mut Vec<f64>, vals: &mut Vec<f64>, vecs: &mut Vec<Vec<Complex64>>) {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    *keys = order.iter().map(|&i| keys[i]).collect();
    *vals = order.iter().map(|&i| vals[i]).collect();
    let mut taken: Vec<Option<Vec<Complex64>>> = vecs.drain(..).map(Some).collect();
    *vecs = order.iter().map(|&i| taken[i].take().unwrap()).collect();
}

fn sort_locked(vals: &mut Vec<f64>, vecs: &mut Vec<Vec<Complex64>>) {
    let mut keys = vals.clone();
    sort_by_key(&mut keys, vals, vecs);
}

/// Rayleigh quotient `xᴴAx / xᴴx`.
pub fn rayleigh_quotient(a: &dyn LinearOperator, x: &[Complex64]) -> f64 {
    let mut ax = vec![ZERO; x.len()];
    a.apply(x, &mut ax);
    dot(x, &ax).re / dot(x, x).re
}
