//! Real-valued weight functions on `C^n` as symbolic expressions in `z` and `z̄`.
//!
//! Weights are polynomial expressions built from the variables `z_j`, `zbar_j`,
//! decimal constants and the functions `modsq`, `conj`, `re`, `im`. Derivatives
//! are taken symbolically with the Wirtinger rules, treating `z_j` and `z̄_j` as
//! independent variables, so Levi matrices are exact up to evaluation rounding.

mod builtin;
mod diff;
mod node;
mod parse;
mod tape;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use builtin::{builtin_names, builtin_source, builtin_weight, BuiltinWeight, BUILTIN_WEIGHTS};
pub use node::Node;
pub use tape::Tape;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("variable index {index} at byte {pos} is outside 1..={dim}")]
    DimensionOutOfRange { index: usize, dim: usize, pos: usize },
    #[error("expression is not real-valued: imaginary part {imag:.3e} at {point:?}")]
    NotReal { imag: f64, point: Vec<Complex64> },
    #[error("point has dimension {got}, expected {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("evaluation overflowed the floating range")]
    Overflow,
    #[error("unknown built-in weight `{0}`")]
    UnknownBuiltin(String),
}

/// A symbolic expression over `C^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightExpr {
    root: Node,
    dim: usize,
}

impl WeightExpr {
    /// Wraps a node, checking that every variable index fits the dimension.
    pub fn new(root: Node, dim: usize) -> Result<Self, WeightError> {
        if let Some(index) = root.max_var_index() {
            if index >= dim {
                return Err(WeightError::DimensionOutOfRange { index: index + 1, dim, pos: 0 });
            }
        }
        Ok(Self { root, dim })
    }

    pub fn constant(value: f64, dim: usize) -> Self {
        Self { root: Node::Const(Complex64::new(value, 0.0)), dim }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.root.is_zero()
    }

    pub fn compile(&self) -> Tape {
        Tape::compile(&self.root, self.dim)
    }

    /// `a * self + other`, used by linearity checks and weight composition.
    pub fn scale_add(&self, a: Complex64, other: &WeightExpr) -> WeightExpr {
        let root = Node::sum(vec![Node::product(vec![Node::Const(a), self.root.clone()]), other.root.clone()]);
        WeightExpr { root, dim: self.dim.max(other.dim) }
    }

    /// The pointwise complex conjugate expression.
    pub fn conjugate(&self) -> WeightExpr {
        WeightExpr { root: Node::conj(self.root.clone()), dim: self.dim }
    }
}

impl std::fmt::Display for WeightExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.root)
    }
}

/// Parses an expression without checking that it is real-valued.
pub fn parse_expr(source: &str, n: usize) -> Result<WeightExpr, WeightError> {
    let root = parse::parse(source, n)?;
    Ok(WeightExpr { root, dim: n })
}

/// Parses a weight and rejects expressions that are not real-valued on sampled points.
pub fn parse_weight(source: &str, n: usize) -> Result<WeightExpr, WeightError> {
    let expr = parse_expr(source, n)?;
    let report = check_real(&expr, 64, 0x5eed);
    if !report.passed {
        return Err(WeightError::NotReal { imag: report.worst_imag, point: report.worst_point });
    }
    Ok(expr)
}

/// Symbolic Wirtinger derivative `∂e/∂z_j` (or `∂e/∂z̄_j` when `conjugated`), `j` 1-based.
pub fn wirtinger_diff(e: &WeightExpr, j: usize, conjugated: bool) -> WeightExpr {
    assert!(j >= 1 && j <= e.dim, "derivative index {j} outside 1..={}", e.dim);
    WeightExpr { root: diff::diff(&e.root, j - 1, conjugated), dim: e.dim }
}

/// Complex gradient `(∂e/∂z_1, …, ∂e/∂z_n)`.
pub fn complex_gradient(e: &WeightExpr) -> Vec<WeightExpr> {
    (1..=e.dim).map(|j| wirtinger_diff(e, j, false)).collect()
}

/// Symbolic Levi matrix; entry `(j, k)` is `∂²e/∂z_j∂z̄_k`, stored row-major.
#[derive(Clone, Debug)]
pub struct LeviMatrix {
    pub dim: usize,
    pub entries: Vec<WeightExpr>,
}

impl LeviMatrix {
    pub fn entry(&self, j: usize, k: usize) -> &WeightExpr {
        &self.entries[j * self.dim + k]
    }

    /// Compiled form of all entries, for repeated evaluation.
    pub fn compile(&self) -> CompiledLevi {
        CompiledLevi { dim: self.dim, tapes: self.entries.iter().map(WeightExpr::compile).collect() }
    }
}

pub fn levi_matrix(e: &WeightExpr) -> LeviMatrix {
    let n = e.dim;
    let mut entries = Vec::with_capacity(n * n);
    for j in 1..=n {
        let dj = wirtinger_diff(e, j, false);
        for k in 1..=n {
            entries.push(wirtinger_diff(&dj, k, true));
        }
    }
    LeviMatrix { dim: n, entries }
}

#[derive(Clone, Debug)]
pub struct CompiledLevi {
    dim: usize,
    tapes: Vec<Tape>,
}

impl CompiledLevi {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes the row-major `n × n` matrix at `z` into `out`.
    pub fn eval_into(&self, z: &[Complex64], stack: &mut Vec<Complex64>, out: &mut [Complex64]) {
        for (slot, tape) in out.iter_mut().zip(&self.tapes) {
            *slot = tape.eval_with(z, stack);
        }
    }

    pub fn eval(&self, z: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim * self.dim];
        let mut stack = Vec::new();
        self.eval_into(z, &mut stack, &mut out);
        out
    }
}

/// Evaluates `e` at `z`.
pub fn evaluate(e: &WeightExpr, z: &[Complex64]) -> Result<Complex64, WeightError> {
    if z.len() != e.dim {
        return Err(WeightError::PointDimension { expected: e.dim, got: z.len() });
    }
    let value = e.root.eval(z);
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(WeightError::Overflow);
    }
    Ok(value)
}

#[derive(Clone, Debug)]
pub struct RealityReport {
    pub passed: bool,
    pub samples: usize,
    /// Largest `|Im| / (1 + |Re|)` seen.
    pub worst_ratio: f64,
    pub worst_imag: f64,
    pub worst_point: Vec<Complex64>,
}

/// Samples `e` at seeded random points of the box `|Re z_j|, |Im z_j| ≤ 2`.
pub fn check_real(e: &WeightExpr, sample_count: usize, seed: u64) -> RealityReport {
    assert!(sample_count >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tape = e.compile();
    let mut stack = Vec::new();
    let mut report = RealityReport {
        passed: true,
        samples: sample_count,
        worst_ratio: 0.0,
        worst_imag: 0.0,
        worst_point: vec![Complex64::new(0.0, 0.0); e.dim],
    };
    let mut z = vec![Complex64::new(0.0, 0.0); e.dim];
    for _ in 0..sample_count {
        for zj in z.iter_mut() {
            *zj = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        }
        let v = tape.eval_with(&z, &mut stack);
        let ratio = v.im.abs() / (1.0 + v.re.abs());
        if ratio > report.worst_ratio || !ratio.is_finite() {
            report.worst_ratio = ratio;
            report.worst_imag = v.im;
            report.worst_point = z.clone();
        }
        if !(ratio <= 1e-10) {
            report.passed = false;
        }
    }
    report
}
