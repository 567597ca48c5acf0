//! Finite-difference discretization of the weighted `∂̄` complex on a box
//! `[-R, R]^{2n}` with zero extension outside.
//!
//! Real axes are ordered `(x_1, y_1, …, x_n, y_n)` and points are stored
//! row-major with `x_1` slowest. A form of degree `q` stores its `C(n,q)`
//! coefficient arrays one after another in multi-index order.

use crate::forms::{binomial, Contraction, MultiIndexTable};
use crate::weights::{complex_gradient, WeightExpr};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::{self, Read, Write};
use thiserror::Error;

/// Default cap on complex entries held by a single form.
pub const DEFAULT_SIZE_LIMIT: usize = 1 << 27;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs R > 0 and m >= 8 (got R = {radius}, m = {m})")]
    Parameters { radius: f64, m: usize },
    #[error("{entries} complex entries exceed the size limit {limit}")]
    TooLarge { entries: usize, limit: usize },
    #[error("degree {q} is outside 0..={n}")]
    Degree { n: usize, q: usize },
    #[error("weight has dimension {weight}, grid has {grid}")]
    Dimension { weight: usize, grid: usize },
    #[error("forms live on different grids or degrees")]
    Mismatch,
    #[error("form contains non-finite values")]
    NonFinite,
    #[error("malformed form file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub radius: f64,
    pub m: usize,
    pub h: f64,
}

pub fn make_grid(n: usize, radius: f64, m: usize) -> Result<Grid, GridError> {
    make_grid_with_limit(n, radius, m, DEFAULT_SIZE_LIMIT)
}

pub fn make_grid_with_limit(n: usize, radius: f64, m: usize, limit: usize) -> Result<Grid, GridError> {
    if !(radius > 0.0 && radius.is_finite()) || m < 8 || n == 0 {
        return Err(GridError::Parameters { radius, m });
    }
    let points = (m as u128).checked_pow(2 * n as u32).unwrap_or(u128::MAX);
    if points > limit as u128 {
        return Err(GridError::TooLarge { entries: points.min(usize::MAX as u128) as usize, limit });
    }
    Ok(Grid { n, radius, m, h: 2.0 * radius / (m as f64 - 1.0) })
}

impl Grid {
    pub fn axes(&self) -> usize {
        2 * self.n
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.axes() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.radius + i as f64 * self.h
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.m.pow((self.axes() - 1 - axis) as u32)
    }

    /// Index along `axis` of point `p`.
    #[inline]
    pub fn axis_index(&self, p: usize, axis: usize) -> usize {
        (p / self.stride(axis)) % self.m
    }

    pub fn real_coords(&self, p: usize) -> Vec<f64> {
        (0..self.axes()).map(|a| self.coord(self.axis_index(p, a))).collect()
    }

    pub fn point(&self, p: usize) -> Vec<Complex64> {
        let x = self.real_coords(p);
        (0..self.n).map(|j| Complex64::new(x[2 * j], x[2 * j + 1])).collect()
    }

    /// Quadrature cell volume `h^{2n}`.
    pub fn cell(&self) -> f64 {
        self.h.powi(self.axes() as i32)
    }

    pub fn point_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.m + i)
    }

    fn check_form_size(&self, components: usize) -> Result<(), GridError> {
        let entries = components.saturating_mul(self.len());
        if entries > DEFAULT_SIZE_LIMIT {
            return Err(GridError::TooLarge { entries, limit: DEFAULT_SIZE_LIMIT });
        }
        Ok(())
    }
}

/// Coefficients of a `(0,q)`-form on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridForm {
    pub grid: Grid,
    pub q: usize,
    pub data: Vec<Complex64>,
}

impl GridForm {
    pub fn zeros(grid: Grid, q: usize) -> Result<Self, GridError> {
        if q > grid.n {
            return Err(GridError::Degree { n: grid.n, q });
        }
        let comps = binomial(grid.n, q);
        grid.check_form_size(comps)?;
        Ok(Self { grid, q, data: vec![ZERO; comps * grid.len()] })
    }

    pub fn from_data(grid: Grid, q: usize, data: Vec<Complex64>) -> Result<Self, GridError> {
        if q > grid.n {
            return Err(GridError::Degree { n: grid.n, q });
        }
        if data.len() != binomial(grid.n, q) * grid.len() {
            return Err(GridError::Mismatch);
        }
        if data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(GridError::NonFinite);
        }
        Ok(Self { grid, q, data })
    }

    pub fn components(&self) -> usize {
        binomial(self.grid.n, self.q)
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.data[c * len..(c + 1) * len]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = self.grid.len();
        &mut self.data[c * len..(c + 1) * len]
    }

    fn same_shape(&self, other: &GridForm) -> Result<(), GridError> {
        if self.grid != other.grid || self.q != other.q {
            return Err(GridError::Mismatch);
        }
        Ok(())
    }

    /// Pointwise `Σ' |u_J|²` at point `p`.
    pub fn pointwise_norm_sq(&self, p: usize) -> f64 {
        (0..self.components()).map(|c| self.component(c)[p].norm_sqr()).sum()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), GridError> {
        w.write_all(&(self.grid.n as u64).to_le_bytes())?;
        w.write_all(&(self.q as u64).to_le_bytes())?;
        w.write_all(&self.grid.radius.to_le_bytes())?;
        w.write_all(&(self.grid.m as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 16);
        for v in &self.data {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, GridError> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 8], GridError> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        let q = u64::from_le_bytes(next(&mut r)?) as usize;
        let radius = f64::from_le_bytes(next(&mut r)?);
        let m = u64::from_le_bytes(next(&mut r)?) as usize;
        if n == 0 || n > 8 {
            return Err(GridError::Format(format!("dimension {n}")));
        }
        let grid = make_grid(n, radius, m)?;
        let mut form = GridForm::zeros(grid, q)?;
        let mut buf = vec![0u8; form.data.len() * 16];
        r.read_exact(&mut buf)?;
        for (v, chunk) in form.data.iter_mut().zip(buf.chunks_exact(16)) {
            *v = Complex64::new(
                f64::from_le_bytes(chunk[..8].try_into().unwrap()),
                f64::from_le_bytes(chunk[8..].try_into().unwrap()),
            );
        }
        if r.read(&mut [0u8; 1])? != 0 {
            return Err(GridError::Format("trailing bytes".into()));
        }
        if form.data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(GridError::NonFinite);
        }
        Ok(form)
    }
}

/// `φ`, `∂φ/∂z_k` and `e^{-φ}` tabulated on a grid.
#[derive(Clone, Debug)]
pub struct WeightField {
    pub grid: Grid,
    pub phi: Vec<f64>,
    /// `grad[k][p]` is `∂φ/∂z_{k+1}` at point `p`.
    pub grad: Vec<Vec<Complex64>>,
    pub weight: Vec<f64>,
}

pub fn tabulate_weight(w: &WeightExpr, g: &Grid) -> Result<WeightField, GridError> {
    if w.dim() != g.n {
        return Err(GridError::Dimension { weight: w.dim(), grid: g.n });
    }
    let phi_tape = w.compile();
    let grad_tapes: Vec<_> = complex_gradient(w).iter().map(WeightExpr::compile).collect();
    let len = g.len();
    let rows: Vec<(f64, Vec<Complex64>)> = (0..len)
        .into_par_iter()
        .map_init(Vec::new, |stack, p| {
            let z = g.point(p);
            let phi = phi_tape.eval_with(&z, stack).re;
            let grad = grad_tapes.iter().map(|t| t.eval_with(&z, stack)).collect();
            (phi, grad)
        })
        .collect();
    let mut phi = Vec::with_capacity(len);
    let mut grad = vec![Vec::with_capacity(len); g.n];
    for (v, gr) in rows {
        phi.push(v);
        for (k, x) in gr.into_iter().enumerate() {
            grad[k].push(x);
        }
    }
    let weight = phi.iter().map(|v| (-v).exp()).collect();
    Ok(WeightField { grid: *g, phi, grad, weight })
}

/// Central difference along `axis`, zero outside the box.
pub fn axis_diff(f: &[Complex64], g: &Grid, axis: usize) -> Vec<Complex64> {
    let stride = g.stride(axis);
    let m = g.m;
    let inv = 1.0 / (2.0 * g.h);
    (0..f.len())
        .into_par_iter()
        .map(|p| {
            let i = (p / stride) % m;
            let fwd = if i + 1 < m { f[p + stride] } else { ZERO };
            let bwd = if i > 0 { f[p - stride] } else { ZERO };
            (fwd - bwd) * inv
        })
        .collect()
}

/// `∂/∂z̄_j` (`conjugated = true`) or `∂/∂z_j` of a scalar field, `j` 1-based.
pub fn wirtinger(f: &[Complex64], g: &Grid, j: usize, conjugated: bool) -> Vec<Complex64> {
    let (sx, sy) = (g.stride(2 * (j - 1)), g.stride(2 * j - 1));
    let m = g.m;
    let inv = 1.0 / (4.0 * g.h);
    let iy = if conjugated { Complex64::new(0.0, 1.0) } else { Complex64::new(0.0, -1.0) };
    (0..f.len())
        .into_par_iter()
        .map(|p| {
            let ix = (p / sx) % m;
            let jy = (p / sy) % m;
            let dx = if ix + 1 < m { f[p + sx] } else { ZERO } - if ix > 0 { f[p - sx] } else { ZERO };
            let dy = if jy + 1 < m { f[p + sy] } else { ZERO } - if jy > 0 { f[p - sy] } else { ZERO };
            (dx + iy * dy) * inv
        })
        .collect()
}

/// `δ_k f = ∂f/∂z_k − (∂φ/∂z_k) f`.
pub fn delta(f: &[Complex64], wf: &WeightField, k: usize) -> Vec<Complex64> {
    let mut d = wirtinger(f, &wf.grid, k, false);
    d.par_iter_mut().zip(&wf.grad[k - 1]).zip(f).for_each(|((o, gk), v)| *o -= gk * v);
    d
}

pub fn dbar(u: &GridForm) -> Result<GridForm, GridError> {
    let g = u.grid;
    if u.q >= g.n {
        return Err(GridError::Degree { n: g.n, q: u.q + 1 });
    }
    let table = MultiIndexTable::new(g.n, u.q).map_err(|_| GridError::Degree { n: g.n, q: u.q })?;
    let wedge = table.wedge_map();
    let mut out = GridForm::zeros(g, u.q + 1)?;
    for r in 0..table.len() {
        for j in 1..=g.n {
            let Some((sign, l)) = wedge[r * g.n + j - 1] else { continue };
            let d = wirtinger(u.component(r), &g, j, true);
            out.component_mut(l).par_iter_mut().zip(&d).for_each(|(o, v)| *o += v * sign);
        }
    }
    Ok(out)
}

/// `∂̄*_φ u = −Σ'_K Σ_k δ_k u_{kK} dz̄_K`, discretized term by term.
pub fn dbar_star(u: &GridForm, wf: &WeightField) -> Result<GridForm, GridError> {
    let g = u.grid;
    if wf.grid != g {
        return Err(GridError::Mismatch);
    }
    if u.q == 0 {
        return Err(GridError::Degree { n: g.n, q: 0 });
    }
    let contraction = Contraction::new(g.n, u.q).map_err(|_| GridError::Degree { n: g.n, q: u.q })?;
    let mut out = GridForm::zeros(g, u.q - 1)?;
    for kr in 0..contraction.lower_len() {
        for k in 1..=g.n {
            let Some((sign, l)) = contraction.entries[kr * g.n + k - 1] else { continue };
            let d = delta(u.component(l), wf, k);
            out.component_mut(kr).par_iter_mut().zip(&d).for_each(|(o, v)| *o -= v * sign);
        }
    }
    Ok(out)
}

/// `(u, v)_φ = h^{2n} Σ_p e^{-φ(p)} Σ'_J u_J(p) conj(v_J(p))`.
pub fn inner(u: &GridForm, v: &GridForm, wf: &WeightField) -> Result<Complex64, GridError> {
    u.same_shape(v)?;
    if wf.grid != u.grid {
        return Err(GridError::Mismatch);
    }
    let len = u.grid.len();
    let total: Complex64 = (0..u.components())
        .map(|c| {
            let (a, b) = (u.component(c), v.component(c));
            (0..len).into_par_iter().map(|p| a[p] * b[p].conj() * wf.weight[p]).sum::<Complex64>()
        })
        .sum();
    Ok(total * u.grid.cell())
}

pub fn norm_sq(u: &GridForm, wf: &WeightField) -> Result<f64, GridError> {
    Ok(inner(u, u, wf)?.re)
}

/// `Q_φ(u, v) = (∂̄u, ∂̄v)_φ + (∂̄*_φ u, ∂̄*_φ v)_φ`; missing terms at `q = 0` or `q = n` are zero.
pub fn q_form(u: &GridForm, v: &GridForm, wf: &WeightField) -> Result<Complex64, GridError> {
    u.same_shape(v)?;
    let mut total = ZERO;
    if u.q < u.grid.n {
        total += inner(&dbar(u)?, &dbar(v)?, wf)?;
    }
    if u.q > 0 {
        total += inner(&dbar_star(u, wf)?, &dbar_star(v, wf)?, wf)?;
    }
    Ok(total)
}

/// `b(t) = (1 − t²)³` on `|t| < 1`.
pub fn bump_profile(t: f64) -> f64 {
    if t.abs() < 1.0 {
        let s = 1.0 - t * t;
        s * s * s
    } else {
        0.0
    }
}

/// Smooth compactly supported test form: the product bump with support
/// `support · R` per axis, times a seeded affine polynomial in `z, z̄` per component.
pub fn bump_form(grid: &Grid, q: usize, seed: u64, support: f64) -> Result<GridForm, GridError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut form = GridForm::zeros(*grid, q)?;
    let n = grid.n;
    let rho = support * grid.radius;
    let mut rand_c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let coeffs: Vec<Vec<Complex64>> = (0..form.components()).map(|_| (0..2 * n + 1).map(|_| rand_c()).collect()).collect();
    let len = grid.len();
    for (c, co) in coeffs.iter().enumerate() {
        form.component_mut(c).par_iter_mut().enumerate().for_each(|(p, out)| {
            let x = grid.real_coords(p);
            let b: f64 = x.iter().map(|&xa| bump_profile(xa / rho)).product();
            if b == 0.0 {
                return;
            }
            let mut poly = co[0];
            for j in 0..n {
                let z = Complex64::new(x[2 * j], x[2 * j + 1]) / rho;
                poly += co[1 + 2 * j] * z + co[2 + 2 * j] * z.conj();
            }
            *out = poly * b;
        });
        debug_assert_eq!(form.component(c).len(), len);
    }
    Ok(form)
}

/// Form whose component `c` at point `z` is `f(c, z)`.
pub fn sample_form(grid: &Grid, q: usize, f: impl Fn(usize, &[Complex64]) -> Complex64 + Sync) -> Result<GridForm, GridError> {
    let mut form = GridForm::zeros(*grid, q)?;
    for c in 0..form.components() {
        form.component_mut(c).par_iter_mut().enumerate().for_each(|(p, out)| *out = f(c, &grid.point(p)));
    }
    Ok(form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{builtin_weight, parse_weight};

    fn interior(g: &Grid, p: usize, margin: usize) -> bool {
        (0..g.axes()).all(|a| {
            let i = g.axis_index(p, a);
            i >= margin && i + margin < g.m
        })
    }

    #[test]
    fn grid_arithmetic() {
        let g = make_grid(1, 1.0, 8).unwrap();
        assert_eq!(g.len(), 64);
        let g3 = Grid { n: 1, radius: 1.0, m: 3, h: 1.0 };
        assert_eq!(g3.len(), 9);
        assert_eq!(g3.point(0), vec![Complex64::new(-1.0, -1.0)]);
        assert_eq!(g3.point(1), vec![Complex64::new(-1.0, 0.0)]);
        assert_eq!(g3.point(3), vec![Complex64::new(0.0, -1.0)]);
        assert!(make_grid(1, 1.0, 3).is_err());
        assert!(matches!(make_grid(3, 1.0, 64), Err(GridError::TooLarge { .. })));
        assert!(make_grid_with_limit(2, 1.0, 10, 9_999).is_err());
        let g = make_grid(2, 2.0, 9).unwrap();
        assert_eq!(g.h, 0.5);
        let p = g.point_index(&[1, 2, 3, 4]);
        assert_eq!(g.real_coords(p), vec![-1.5, -1.0, -0.5, 0.0]);
    }

    #[test]
    fn weight_field_basics() {
        let g = make_grid(1, 2.0, 9).unwrap();
        let zero = parse_weight("0", 1).unwrap();
        let wf = tabulate_weight(&zero, &g).unwrap();
        assert!(wf.weight.iter().all(|&w| w == 1.0));
        let gauss = builtin_weight("gaussian", 1).unwrap();
        let wf = tabulate_weight(&gauss, &g).unwrap();
        let origin = g.point_index(&[4, 4]);
        assert_eq!(wf.weight[origin], 1.0);
        assert_eq!(wf.grad[0][origin], ZERO);
        let p = g.point_index(&[6, 1]);
        let z = g.point(p)[0];
        assert!((wf.grad[0][p] - z.conj()).norm() < 1e-15);
        assert!(tabulate_weight(&builtin_weight("gaussian", 2).unwrap(), &g).is_err());
    }

    #[test]
    fn dbar_examples() {
        let g = make_grid(1, 2.0, 11).unwrap();
        let c = sample_form(&g, 0, |_, _| Complex64::new(2.0, 1.0)).unwrap();
        let d = dbar(&c).unwrap();
        for p in 0..g.len() {
            if interior(&g, p, 1) {
                assert!(d.data[p].norm() < 1e-13);
            }
        }
        let zb = sample_form(&g, 0, |_, z| z[0].conj()).unwrap();
        let d = dbar(&zb).unwrap();
        for p in 0..g.len() {
            if interior(&g, p, 1) {
                assert!((d.data[p] - 1.0).norm() < 1e-13);
            }
        }
        let g2 = make_grid(2, 2.0, 9).unwrap();
        // u = z̄₂ dz̄₁
        let u = sample_form(&g2, 1, |c, z| if c == 0 { z[1].conj() } else { ZERO }).unwrap();
        let d = dbar(&u).unwrap();
        assert_eq!(d.components(), 1);
        for p in 0..g2.len() {
            if interior(&g2, p, 1) {
                assert!((d.data[p] + 1.0).norm() < 1e-13, "{:?}", d.data[p]);
            }
        }
        assert!(dbar(&d).is_err());
    }

    #[test]
    fn dbar_star_examples() {
        let g = make_grid(1, 2.0, 11).unwrap();
        let flat = tabulate_weight(&parse_weight("0", 1).unwrap(), &g).unwrap();
        let u = sample_form(&g, 1, |_, z| z[0]).unwrap();
        let s = dbar_star(&u, &flat).unwrap();
        for p in 0..g.len() {
            if interior(&g, p, 1) {
                assert!((s.data[p] + 1.0).norm() < 1e-13);
            }
        }
        let zero = GridForm::zeros(g, 1).unwrap();
        assert!(dbar_star(&zero, &flat).unwrap().data.iter().all(|v| *v == ZERO));
        let wf = tabulate_weight(&builtin_weight("gaussian", 1).unwrap(), &g).unwrap();
        let one = sample_form(&g, 1, |_, _| Complex64::new(1.0, 0.0)).unwrap();
        let s = dbar_star(&one, &wf).unwrap();
        for p in 0..g.len() {
            if interior(&g, p, 1) {
                assert!((s.data[p] - g.point(p)[0].conj()).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn inner_products() {
        let g = make_grid(1, 2.0, 9).unwrap();
        let flat = tabulate_weight(&parse_weight("0", 1).unwrap(), &g).unwrap();
        let mut e = GridForm::zeros(g, 1).unwrap();
        e.data[17] = Complex64::new(1.0, 0.0);
        assert!((norm_sq(&e, &flat).unwrap() - g.cell()).abs() < 1e-15);
        let zero = GridForm::zeros(g, 1).unwrap();
        assert_eq!(inner(&e, &zero, &flat).unwrap(), ZERO);
        let wf = tabulate_weight(&builtin_weight("gaussian", 1).unwrap(), &g).unwrap();
        let a = bump_form(&g, 1, 1, 0.8).unwrap();
        let b = bump_form(&g, 1, 2, 0.8).unwrap();
        let ab = inner(&a, &b, &wf).unwrap();
        let ba = inner(&b, &a, &wf).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-14 * ab.norm());
        assert!(inner(&a, &GridForm::zeros(g, 0).unwrap(), &wf).is_err());
    }

    #[test]
    fn q_form_of_zero_and_positivity() {
        let g = make_grid(2, 3.0, 12).unwrap();
        let wf = tabulate_weight(&builtin_weight("example_a", 2).unwrap(), &g).unwrap();
        for q in 0..=2 {
            let z = GridForm::zeros(g, q).unwrap();
            assert_eq!(q_form(&z, &z, &wf).unwrap(), ZERO);
            let u = bump_form(&g, q, 9 + q as u64, 0.8).unwrap();
            let v = q_form(&u, &u, &wf).unwrap();
            assert!(v.re > 0.0 && v.im.abs() < 1e-12 * v.re);
        }
    }

    #[test]
    fn bump_is_supported_inside() {
        let g = make_grid(1, 5.0, 21).unwrap();
        let u = bump_form(&g, 1, 3, 0.5).unwrap();
        for p in 0..g.len() {
            if g.real_coords(p).iter().any(|x| x.abs() >= 2.5) {
                assert_eq!(u.data[p], ZERO);
            }
        }
        assert!(u.data.iter().any(|v| v.norm() > 0.1));
        assert_eq!(u, bump_form(&g, 1, 3, 0.5).unwrap());
        assert_eq!(bump_profile(0.0), 1.0);
        assert_eq!(bump_profile(1.0), 0.0);
    }

    #[test]
    fn binary_round_trip() {
        let g = make_grid(1, 2.5, 10).unwrap();
        let u = bump_form(&g, 1, 4, 0.8).unwrap();
        let mut buf = Vec::new();
        u.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 16 * g.len());
        assert_eq!(&buf[..8], &1u64.to_le_bytes());
        let back = GridForm::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, u);
        buf.push(0);
        assert!(GridForm::read_from(buf.as_slice()).is_err());
        assert!(GridForm::read_from(&buf[..40]).is_err());
    }
}
