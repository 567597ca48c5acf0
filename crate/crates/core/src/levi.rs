//! Levi-matrix eigenvalues and sampled growth of `s_q`, the sum of the `q`
//! smallest eigenvalues.
//!
//! `s_q` bounded below away from zero at infinity gives existence of the
//! `∂̄`-Neumann operator on `(0,q)`-forms; `s_q → ∞` gives compactness. A finite
//! sample of spheres can only suggest either, so [`criterion_scan`] reports a
//! heuristic classification together with the raw minima.

use crate::weights::{levi_matrix, CompiledLevi, WeightExpr};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LeviError {
    #[error("matrix is not Hermitian: max |H - H*| = {asymmetry:.3e} (scale {scale:.3e})")]
    NotHermitian { asymmetry: f64, scale: f64 },
    #[error("matrix of size {0} is outside the supported range 1..=16")]
    Size(usize),
    #[error("degree q = {q} is outside 1..={n}")]
    Degree { q: usize, n: usize },
    #[error("radii must be strictly increasing, positive and at least three")]
    Radii,
    #[error("at least 8 sampled directions are required, got {0}")]
    Directions(usize),
    #[error("point has dimension {got}, expected {expected}")]
    PointDimension { expected: usize, got: usize },
}

/// Eigen-decomposition of a Hermitian matrix; `vectors` is column-major.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Complex64>,
}

impl HermitianEigen {
    pub fn vector(&self, i: usize) -> &[Complex64] {
        let n = self.values.len();
        &self.vectors[i * n..(i + 1) * n]
    }
}

fn asymmetry(h: &[Complex64], n: usize) -> (f64, f64) {
    let mut asym = 0.0f64;
    let mut scale = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            asym = asym.max((h[a * n + b] - h[b * n + a].conj()).norm());
            scale = scale.max(h[a * n + b].norm());
        }
    }
    (asym, scale)
}

/// Eigenvalues (ascending) and eigenvectors of the Hermitian part of a row-major `n × n` matrix.
///
/// Cyclic complex Jacobi rotations. Inputs whose asymmetry exceeds `1e-8`
/// times the largest entry are rejected.
pub fn hermitian_eigen(h: &[Complex64], n: usize) -> Result<HermitianEigen, LeviError> {
    if n == 0 || n > 16 || h.len() != n * n {
        return Err(LeviError::Size(n));
    }
    let (asym, scale) = asymmetry(h, n);
    if asym > 1e-8 * scale {
        return Err(LeviError::NotHermitian { asymmetry: asym, scale });
    }
    let mut a: Vec<Complex64> = (0..n * n)
        .map(|i| {
            let (r, c) = (i / n, i % n);
            (h[r * n + c] + h[c * n + r].conj()) * 0.5
        })
        .collect();
    for d in 0..n {
        a[d * n + d].im = 0.0;
    }
    let mut v = vec![Complex64::new(0.0, 0.0); n * n];
    for d in 0..n {
        v[d * n + d] = Complex64::new(1.0, 0.0);
    }

    for _sweep in 0..64 {
        let off: f64 = (0..n).flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c))).map(|(r, c)| a[r * n + c].norm_sqr()).sum();
        let diag: f64 = (0..n).map(|d| a[d * n + d].re * a[d * n + d].re).sum();
        if off <= f64::EPSILON * f64::EPSILON * 1e-4 * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = apq / mag;
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 { 1.0 / (tau + (1.0 + tau * tau).sqrt()) } else { -1.0 / (-tau + (1.0 + tau * tau).sqrt()) };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = diag(1, conj(phase)) · [[c, s], [-s, c]] acting on columns p, q
                let g_pp = Complex64::new(c, 0.0);
                let g_pq = Complex64::new(s, 0.0);
                let g_qp = -phase.conj() * s;
                let g_qq = phase.conj() * c;
                for r in 0..n {
                    let x = a[r * n + p];
                    let y = a[r * n + q];
                    a[r * n + p] = x * g_pp + y * g_qp;
                    a[r * n + q] = x * g_pq + y * g_qq;
                }
                for col in 0..n {
                    let x = a[p * n + col];
                    let y = a[q * n + col];
                    a[p * n + col] = g_pp.conj() * x + g_qp.conj() * y;
                    a[q * n + col] = g_pq.conj() * x + g_qq.conj() * y;
                }
                // exact values for the annihilated pair
                a[p * n + q] = Complex64::new(0.0, 0.0);
                a[q * n + p] = Complex64::new(0.0, 0.0);
                a[p * n + p] = Complex64::new(app - t * mag, 0.0);
                a[q * n + q] = Complex64::new(aqq + t * mag, 0.0);
                for r in 0..n {
                    let x = v[r * n + p];
                    let y = v[r * n + q];
                    v[r * n + p] = x * g_pp + y * g_qp;
                    v[r * n + q] = x * g_pq + y * g_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep solver order
    order.sort_by(|&x, &y| a[x * n + x].re.total_cmp(&a[y * n + y].re));
    let values = order.iter().map(|&i| a[i * n + i].re).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &i in &order {
        vectors.extend((0..n).map(|r| v[r * n + i]));
    }
    Ok(HermitianEigen { values, vectors })
}

pub fn hermitian_eigenvalues(h: &[Complex64], n: usize) -> Result<Vec<f64>, LeviError> {
    hermitian_eigen(h, n).map(|e| e.values)
}

/// Sum of the `q` smallest entries of an ascending eigenvalue list.
pub fn s_q(eigenvalues: &[f64], q: usize) -> f64 {
    eigenvalues[..q].iter().sum()
}

/// Levi matrix and derived quantities at one point.
#[derive(Clone, Debug)]
pub struct LeviSample {
    pub point: Vec<Complex64>,
    pub levi: Vec<Complex64>,
    pub eigenvalues: Vec<f64>,
    /// `s[q-1]` is `s_q`.
    pub s: Vec<f64>,
}

impl LeviSample {
    pub fn s_q(&self, q: usize) -> f64 {
        self.s[q - 1]
    }

    pub fn trace(&self) -> f64 {
        let n = self.point.len();
        (0..n).map(|d| self.levi[d * n + d].re).sum()
    }
}

/// Compiled Levi matrix of a weight, for repeated sampling.
#[derive(Clone, Debug)]
pub struct LeviField {
    compiled: CompiledLevi,
}

impl LeviField {
    pub fn new(w: &WeightExpr) -> Self {
        Self { compiled: levi_matrix(w).compile() }
    }

    pub fn dim(&self) -> usize {
        self.compiled.dim()
    }

    pub fn matrix(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.compiled.eval(z)
    }

    pub fn sample(&self, z: &[Complex64]) -> Result<LeviSample, LeviError> {
        let n = self.dim();
        if z.len() != n {
            return Err(LeviError::PointDimension { expected: n, got: z.len() });
        }
        let levi = self.compiled.eval(z);
        let eigenvalues = hermitian_eigenvalues(&levi, n)?;
        let s = eigenvalues
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        Ok(LeviSample { point: z.to_vec(), levi, eigenvalues, s })
    }

    pub fn s_q_at(&self, z: &[Complex64], q: usize) -> Result<f64, LeviError> {
        let n = self.dim();
        if q == 0 || q > n {
            return Err(LeviError::Degree { q, n });
        }
        Ok(self.sample(z)?.s_q(q))
    }
}

pub fn levi_sample(w: &WeightExpr, z: &[Complex64]) -> Result<LeviSample, LeviError> {
    LeviField::new(w).sample(z)
}

pub fn s_q_at(w: &WeightExpr, z: &[Complex64], q: usize) -> Result<f64, LeviError> {
    LeviField::new(w).s_q_at(z, q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    LikelyExistence,
    LikelyCompact,
    Fails,
    Inconclusive,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::LikelyExistence => "LIKELY_EXISTENCE",
            Classification::LikelyCompact => "LIKELY_COMPACT",
            Classification::Fails => "FAILS",
            Classification::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// Thresholds for [`criterion_scan`]. These are heuristics.
#[derive(Clone, Copy, Debug)]
pub struct CriterionConfig {
    /// Minima below this at the largest radius count as a failing direction.
    pub existence_threshold: f64,
    /// Required growth of the minimum from the third-to-last to the last radius.
    pub growth_factor: f64,
    /// Minima shrinking faster than this ratio over the last three radii are inconclusive.
    pub decay_ratio: f64,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        Self { existence_threshold: 1e-3, growth_factor: 1.5, decay_ratio: 0.5 }
    }
}

#[derive(Clone, Debug)]
pub struct CriterionReport {
    pub q: usize,
    pub radii: Vec<f64>,
    pub per_radius_min_s_q: Vec<f64>,
    /// Unit direction attaining each minimum.
    pub per_radius_direction: Vec<Vec<Complex64>>,
    pub classification: Classification,
    /// Minimizing point at the largest radius.
    pub witness: Vec<Complex64>,
}

impl CriterionReport {
    pub fn witness_direction(&self) -> &[Complex64] {
        self.per_radius_direction.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn to_csv(&self) -> String {
        let n = self.witness.len();
        let mut out = String::from("radius,min_s_q");
        for j in 1..=n {
            out.push_str(&format!(",dir_re_{j}"));
        }
        for j in 1..=n {
            out.push_str(&format!(",dir_im_{j}"));
        }
        out.push('\n');
        for ((r, s), d) in self.radii.iter().zip(&self.per_radius_min_s_q).zip(&self.per_radius_direction) {
            out.push_str(&format!("{r},{s:e}"));
            for x in d {
                out.push_str(&format!(",{:e}", x.re));
            }
            for x in d {
                out.push_str(&format!(",{:e}", x.im));
            }
            out.push('\n');
        }
        out.push_str(&format!("classification,{}\n", self.classification));
        out
    }
}

const PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131,
];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    out
}

/// Unit directions in `C^n`: the `2n` real coordinate axes first, then `count`
/// Halton points with a seeded random shift, mapped to the sphere through the
/// inverse normal CDF.
pub fn sphere_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut dirs = Vec::with_capacity(2 * n + count);
    for j in 0..n {
        for unit in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
            let mut d = vec![Complex64::new(0.0, 0.0); n];
            d[j] = unit;
            dirs.push(d);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>()).collect();
    let normal = Normal::standard();
    let mut i = 1u64;
    while dirs.len() < 2 * n + count {
        let g: Vec<f64> = (0..2 * n)
            .map(|d| {
                let u = (radical_inverse(i, PRIMES[d]) + shift[d]).fract().clamp(1e-12, 1.0 - 1e-12);
                normal.inverse_cdf(u)
            })
            .collect();
        i += 1;
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-9 {
            continue;
        }
        dirs.push((0..n).map(|j| Complex64::new(g[2 * j] / norm, g[2 * j + 1] / norm)).collect());
    }
    dirs
}

pub fn criterion_scan(
    w: &WeightExpr,
    q: usize,
    radii: &[f64],
    directions_per_radius: usize,
    seed: u64,
) -> Result<CriterionReport, LeviError> {
    criterion_scan_with(w, q, radii, directions_per_radius, seed, &CriterionConfig::default())
}

pub fn criterion_scan_with(
    w: &WeightExpr,
    q: usize,
    radii: &[f64],
    directions_per_radius: usize,
    seed: u64,
    config: &CriterionConfig,
) -> Result<CriterionReport, LeviError> {
    let n = w.dim();
    if q == 0 || q > n {
        return Err(LeviError::Degree { q, n });
    }
    if radii.len() < 3 || radii[0] <= 0.0 || radii.windows(2).any(|p| p[0] >= p[1]) {
        return Err(LeviError::Radii);
    }
    if directions_per_radius < 8 {
        return Err(LeviError::Directions(directions_per_radius));
    }
    let field = LeviField::new(w);
    let dirs = sphere_directions(n, directions_per_radius, seed);
    let mut mins = Vec::with_capacity(radii.len());
    let mut arg_dirs = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut best = f64::INFINITY;
        let mut best_dir = &dirs[0];
        for d in &dirs {
            let z: Vec<Complex64> = d.iter().map(|x| x * r).collect();
            let s = field.s_q_at(&z, q)?;
            // strict: ties keep the earlier (axis) direction
            if s < best {
                best = s;
                best_dir = d;
            }
        }
        mins.push(best);
        arg_dirs.push(best_dir.clone());
    }
    let k = mins.len();
    let (a, b, c) = (mins[k - 3], mins[k - 2], mins[k - 1]);
    let classification = if c < config.existence_threshold {
        Classification::Fails
    } else if a < b && b < c && c >= config.growth_factor * a && a > config.existence_threshold {
        Classification::LikelyCompact
    } else if a.min(b) > config.existence_threshold && c >= config.decay_ratio * a {
        Classification::LikelyExistence
    } else {
        Classification::Inconclusive
    };
    let r_max = radii[k - 1];
    let witness = arg_dirs[k - 1].iter().map(|x| x * r_max).collect();
    Ok(CriterionReport { q, radii: radii.to_vec(), per_radius_min_s_q: mins, per_radius_direction: arg_dirs, classification, witness })
}
