use super::Node;
use num_complex::Complex64;

#[derive(Clone, Debug)]
enum Op {
    Const(Complex64),
    Var(usize),
    VarConj(usize),
    Add(usize),
    Mul(usize),
    Pow(u32),
    Conj,
    Re,
    Im,
    ModSq,
}

/// Postfix program for fast repeated evaluation of an expression.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    dim: usize,
}

impl Tape {
    pub(super) fn compile(root: &Node, dim: usize) -> Tape {
        let mut ops = Vec::new();
        emit(root, &mut ops);
        Tape { ops, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.eval_with(z, &mut Vec::new())
    }

    /// Evaluates using a caller-owned stack to avoid allocation in hot loops.
    pub fn eval_with(&self, z: &[Complex64], stack: &mut Vec<Complex64>) -> Complex64 {
        stack.clear();
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(c),
                Op::Var(i) => stack.push(z[i]),
                Op::VarConj(i) => stack.push(z[i].conj()),
                Op::Add(k) => {
                    let at = stack.len() - k;
                    let s = stack[at..].iter().sum();
                    stack.truncate(at);
                    stack.push(s);
                }
                Op::Mul(k) => {
                    let at = stack.len() - k;
                    let s = stack[at..].iter().product();
                    stack.truncate(at);
                    stack.push(s);
                }
                Op::Pow(p) => {
                    let top = stack.last_mut().unwrap();
                    *top = top.powu(p);
                }
                Op::Conj => {
                    let top = stack.last_mut().unwrap();
                    *top = top.conj();
                }
                Op::Re => {
                    let top = stack.last_mut().unwrap();
                    *top = Complex64::new(top.re, 0.0);
                }
                Op::Im => {
                    let top = stack.last_mut().unwrap();
                    *top = Complex64::new(top.im, 0.0);
                }
                Op::ModSq => {
                    let top = stack.last_mut().unwrap();
                    *top = Complex64::new(top.norm_sqr(), 0.0);
                }
            }
        }
        stack.pop().unwrap_or_default()
    }
}

fn emit(node: &Node, ops: &mut Vec<Op>) {
    match node {
        Node::Const(c) => ops.push(Op::Const(*c)),
        Node::Var { index, conj: false } => ops.push(Op::Var(*index)),
        Node::Var { index, conj: true } => ops.push(Op::VarConj(*index)),
        Node::Sum(v) => {
            v.iter().for_each(|t| emit(t, ops));
            ops.push(Op::Add(v.len()));
        }
        Node::Product(v) => {
            v.iter().for_each(|t| emit(t, ops));
            ops.push(Op::Mul(v.len()));
        }
        Node::Pow(b, p) => {
            emit(b, ops);
            ops.push(Op::Pow(*p));
        }
        Node::Conj(e) => {
            emit(e, ops);
            ops.push(Op::Conj);
        }
        Node::Re(e) => {
            emit(e, ops);
            ops.push(Op::Re);
        }
        Node::Im(e) => {
            emit(e, ops);
            ops.push(Op::Im);
        }
        Node::ModSq(e) => {
            emit(e, ops);
            ops.push(Op::ModSq);
        }
    }
}
