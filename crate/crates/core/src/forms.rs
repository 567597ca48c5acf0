//! Multi-index algebra for `(0,q)`-forms `u = Σ' u_J dz̄_J`.
//!
//! Indices are 1-based and tuples strictly increasing. Tables enumerate all
//! `q`-tuples of `{1..n}` lexicographically; that order is used everywhere a
//! form's coefficients are laid out.

use num_complex::Complex64;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormsError {
    #[error("index tuple {0:?} is not strictly increasing")]
    NotIncreasing(Vec<usize>),
    #[error("degree {q} is outside 0..={n}")]
    Degree { n: usize, q: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// All strictly increasing `q`-tuples from `{1..n}`, in lexicographic order.
#[derive(Clone, Debug)]
pub struct MultiIndexTable {
    n: usize,
    q: usize,
    tuples: Vec<Vec<usize>>,
    rank: HashMap<Vec<usize>, usize>,
}

impl MultiIndexTable {
    pub fn new(n: usize, q: usize) -> Result<Self, FormsError> {
        if q > n {
            return Err(FormsError::Degree { n, q });
        }
        let mut tuples = Vec::with_capacity(binomial(n, q));
        let mut cur = Vec::with_capacity(q);
        fn rec(start: usize, n: usize, q: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == q {
                out.push(cur.clone());
                return;
            }
            for v in start..=n {
                cur.push(v);
                rec(v + 1, n, q, cur, out);
                cur.pop();
            }
        }
        rec(1, n, q, &mut cur, &mut tuples);
        let rank = tuples.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self { n, q, tuples, rank })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }

    pub fn tuple(&self, i: usize) -> &[usize] {
        &self.tuples[i]
    }

    pub fn rank(&self, tuple: &[usize]) -> Option<usize> {
        self.rank.get(tuple).copied()
    }

    /// For every `(j, J)` with `J` in this table, the image of `dz̄_j ∧ dz̄_J`
    /// as `(sign, rank in the (q+1)-table)`, or `None` when `j ∈ J`.
    /// Row-major over `(rank J, j − 1)`.
    pub fn wedge_map(&self) -> Vec<Option<(f64, usize)>> {
        let up = MultiIndexTable::new(self.n, self.q + 1).ok();
        let mut out = Vec::with_capacity(self.len() * self.n);
        for t in &self.tuples {
            for j in 1..=self.n {
                let entry = wedge_insert(j, t)
                    .ok()
                    .flatten()
                    .map(|(s, l)| (s as f64, up.as_ref().and_then(|u| u.rank(&l)).expect("wedge lands in next table")));
                out.push(entry);
            }
        }
        out
    }
}

fn check_increasing(t: &[usize]) -> Result<(), FormsError> {
    if t.windows(2).any(|w| w[0] >= w[1]) || t.first() == Some(&0) {
        return Err(FormsError::NotIncreasing(t.to_vec()));
    }
    Ok(())
}

/// Sign of the permutation relating `(k, M)` to `(j, J)`, or 0 when `j ∈ J`,
/// `k ∈ M`, or the index sets differ.
pub fn epsilon(j: usize, big_j: &[usize], k: usize, big_m: &[usize]) -> Result<i8, FormsError> {
    check_increasing(big_j)?;
    check_increasing(big_m)?;
    if big_j.contains(&j) || big_m.contains(&k) || big_j.len() != big_m.len() {
        return Ok(0);
    }
    let src: Vec<usize> = std::iter::once(j).chain(big_j.iter().copied()).collect();
    let dst: Vec<usize> = std::iter::once(k).chain(big_m.iter().copied()).collect();
    // dst[i] = src[perm[i]]
    let mut perm = Vec::with_capacity(dst.len());
    for d in &dst {
        match src.iter().position(|s| s == d) {
            Some(p) => perm.push(p),
            None => return Ok(0),
        }
    }
    let inversions = (0..perm.len())
        .flat_map(|a| (a + 1..perm.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| perm[a] > perm[b])
        .count();
    Ok(if inversions % 2 == 0 { 1 } else { -1 })
}

/// `dz̄_j ∧ dz̄_J = sign · dz̄_L` with `L` sorted; `None` if `j ∈ J`.
pub fn wedge_insert(j: usize, big_j: &[usize]) -> Result<Option<(i8, Vec<usize>)>, FormsError> {
    check_increasing(big_j)?;
    if big_j.contains(&j) {
        return Ok(None);
    }
    let p = big_j.iter().filter(|&&x| x < j).count();
    let mut l = Vec::with_capacity(big_j.len() + 1);
    l.extend_from_slice(&big_j[..p]);
    l.push(j);
    l.extend_from_slice(&big_j[p..]);
    Ok(Some((if p % 2 == 0 { 1 } else { -1 }, l)))
}

/// `Σ' |u_J|²`.
pub fn pointwise_norm_sq(values: &[Complex64]) -> f64 {
    values.iter().map(|v| v.norm_sqr()).sum()
}

/// Precomputed `u_{jK}` lookup: for each `K` of degree `q−1` and each `j`,
/// the sign and rank of `jK` in the degree-`q` table.
#[derive(Clone, Debug)]
pub struct Contraction {
    pub n: usize,
    pub q: usize,
    /// Row-major over `(rank K, j − 1)`.
    pub entries: Vec<Option<(f64, usize)>>,
}

impl Contraction {
    pub fn new(n: usize, q: usize) -> Result<Self, FormsError> {
        if q == 0 || q > n || n > 16 {
            return Err(FormsError::Degree { n, q });
        }
        let lower = MultiIndexTable::new(n, q - 1)?;
        Ok(Self { n, q, entries: lower.wedge_map() })
    }

    pub fn lower_len(&self) -> usize {
        self.entries.len() / self.n
    }

    /// `u_{jK}` with `j` 1-based.
    #[inline]
    pub fn component(&self, u: &[Complex64], k_rank: usize, j: usize) -> Complex64 {
        match self.entries[k_rank * self.n + j - 1] {
            Some((s, r)) => u[r] * s,
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// `Σ'_K Σ_{j,k} H_{jk} u_{jK} ū_{kK}` for a row-major `n × n` matrix `h`.
    pub fn action(&self, h: &[Complex64], u: &[Complex64]) -> f64 {
        let n = self.n;
        let mut w = [Complex64::new(0.0, 0.0); 16];
        let mut total = Complex64::new(0.0, 0.0);
        for kr in 0..self.lower_len() {
            for j in 1..=n {
                w[j - 1] = self.component(u, kr, j);
            }
            for a in 0..n {
                if w[a] == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for b in 0..n {
                    total += h[a * n + b] * w[a] * w[b].conj();
                }
            }
        }
        total.re
    }
}

/// Curvature term `Σ'_{|K|=q−1} Σ_{j,k} H_{jk} u_{jK} ū_{kK}` for row-major `H`.
pub fn curvature_action(
    h: &[Complex64],
    u: &[Complex64],
    table_q: &MultiIndexTable,
    table_qm1: &MultiIndexTable,
) -> Result<f64, FormsError> {
    let n = table_q.n();
    if h.len() != n * n {
        return Err(FormsError::Length { expected: n * n, got: h.len() });
    }
    if u.len() != table_q.len() {
        return Err(FormsError::Length { expected: table_q.len(), got: u.len() });
    }
    if table_qm1.n() != n || table_qm1.q() + 1 != table_q.q() {
        return Err(FormsError::Degree { n: table_qm1.n(), q: table_qm1.q() });
    }
    let mut total = Complex64::new(0.0, 0.0);
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    for k in table_qm1.tuples() {
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = match wedge_insert(j + 1, k)? {
                Some((s, l)) => u[table_q.rank(&l).expect("tuple in table")] * s as f64,
                None => Complex64::new(0.0, 0.0),
            };
        }
        for a in 0..n {
            for b in 0..n {
                total += h[a * n + b] * w[a] * w[b].conj();
            }
        }
    }
    Ok(total.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn table_is_lexicographic() {
        let t = MultiIndexTable::new(4, 2).unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(t.tuples()[0], vec![1, 2]);
        assert_eq!(t.tuples()[5], vec![3, 4]);
        for (i, tup) in t.tuples().iter().enumerate() {
            assert_eq!(t.rank(tup), Some(i));
        }
        assert!(t.tuples().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(MultiIndexTable::new(3, 0).unwrap().tuples(), &[Vec::<usize>::new()]);
        assert!(MultiIndexTable::new(2, 3).is_err());
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon(1, &[1], 1, &[2]).unwrap(), 0);
        assert_eq!(epsilon(1, &[2], 1, &[2]).unwrap(), 1);
        assert_eq!(epsilon(1, &[2], 2, &[1]).unwrap(), -1);
        assert_eq!(epsilon(1, &[2], 3, &[1]).unwrap(), 0);
        assert_eq!(epsilon(2, &[1, 3], 1, &[2, 3]).unwrap(), -1);
        assert!(epsilon(1, &[3, 2], 1, &[2]).is_err());
    }

    #[test]
    fn wedge_examples() {
        assert_eq!(wedge_insert(1, &[1]).unwrap(), None);
        assert_eq!(wedge_insert(1, &[2, 3]).unwrap(), Some((1, vec![1, 2, 3])));
        assert_eq!(wedge_insert(3, &[1, 2]).unwrap(), Some((1, vec![1, 2, 3])));
        assert_eq!(wedge_insert(2, &[1, 3]).unwrap(), Some((-1, vec![1, 2, 3])));
        // consistency with epsilon: dz̄_j ∧ dz̄_J = ε^{L}_{jJ} dz̄_L
        let (s, l) = wedge_insert(3, &[1, 2]).unwrap().unwrap();
        assert_eq!(epsilon(3, &[1, 2], l[0], &l[1..]).unwrap(), s);
    }

    #[test]
    fn norm_examples() {
        assert_eq!(pointwise_norm_sq(&[c(0.0), c(0.0)]), 0.0);
        assert_eq!(pointwise_norm_sq(&[c(1.0)]), 1.0);
        assert_eq!(pointwise_norm_sq(&[c(3.0), c(4.0)]), 25.0);
    }

    #[test]
    fn curvature_action_examples() {
        let t2 = MultiIndexTable::new(2, 2).unwrap();
        let t1 = MultiIndexTable::new(2, 1).unwrap();
        let t0 = MultiIndexTable::new(2, 0).unwrap();
        let h = [c(2.0), c(0.0), c(0.0), c(7.0)];
        let u = [Complex64::new(1.0, -2.0)];
        assert!((curvature_action(&h, &u, &t2, &t1).unwrap() - 9.0 * 5.0).abs() < 1e-12);
        let ident = [c(1.0), c(0.0), c(0.0), c(1.0)];
        let u = [Complex64::new(0.3, 1.0), Complex64::new(-2.0, 0.5)];
        let v = curvature_action(&ident, &u, &t1, &t0).unwrap();
        assert!((v - pointwise_norm_sq(&u)).abs() < 1e-12);
        assert_eq!(curvature_action(&ident, &[c(0.0), c(0.0)], &t1, &t0).unwrap(), 0.0);
        assert!(curvature_action(&ident, &u, &t2, &t1).is_err());
        let contraction = Contraction::new(2, 1).unwrap();
        assert!((contraction.action(&ident, &u) - v).abs() < 1e-12);
    }
}
