use num_complex::Complex64;
use std::fmt;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Expression tree. Variable indices are 0-based here; the text form is 1-based.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(Complex64),
    Var { index: usize, conj: bool },
    Sum(Vec<Node>),
    Product(Vec<Node>),
    Pow(Box<Node>, u32),
    Conj(Box<Node>),
    Re(Box<Node>),
    Im(Box<Node>),
    ModSq(Box<Node>),
}

impl Node {
    pub fn zero() -> Node {
        Node::Const(ZERO)
    }

    pub fn one() -> Node {
        Node::Const(ONE)
    }

    pub fn real(v: f64) -> Node {
        Node::Const(Complex64::new(v, 0.0))
    }

    pub fn var(index: usize, conj: bool) -> Node {
        Node::Var { index, conj }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Node::Const(c) if *c == ZERO)
    }

    fn as_const(&self) -> Option<Complex64> {
        match self {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Sum with flattening, constant folding and zero elimination.
    pub fn sum(terms: Vec<Node>) -> Node {
        let mut acc = ZERO;
        let mut out = Vec::with_capacity(terms.len());
        for t in terms {
            match t {
                Node::Const(c) => acc += c,
                Node::Sum(inner) => {
                    for s in inner {
                        match s {
                            Node::Const(c) => acc += c,
                            other => out.push(other),
                        }
                    }
                }
                other => out.push(other),
            }
        }
        if acc != ZERO {
            out.push(Node::Const(acc));
        }
        match out.len() {
            0 => Node::zero(),
            1 => out.pop().unwrap(),
            _ => Node::Sum(out),
        }
    }

    /// Product with flattening, constant folding and zero/one elimination.
    pub fn product(factors: Vec<Node>) -> Node {
        let mut acc = ONE;
        let mut out = Vec::with_capacity(factors.len());
        for f in factors {
            match f {
                Node::Const(c) => acc *= c,
                Node::Product(inner) => {
                    for p in inner {
                        match p {
                            Node::Const(c) => acc *= c,
                            other => out.push(other),
                        }
                    }
                }
                other => out.push(other),
            }
        }
        if acc == ZERO {
            return Node::zero();
        }
        if acc != ONE {
            out.insert(0, Node::Const(acc));
        }
        match out.len() {
            0 => Node::one(),
            1 => out.pop().unwrap(),
            _ => Node::Product(out),
        }
    }

    pub fn pow(base: Node, exp: u32) -> Node {
        match (exp, &base) {
            (0, _) => Node::one(),
            (1, _) => base,
            (_, Node::Const(c)) => Node::Const(c.powu(exp)),
            _ => Node::Pow(Box::new(base), exp),
        }
    }

    pub fn conj(e: Node) -> Node {
        match e {
            Node::Const(c) => Node::Const(c.conj()),
            Node::Conj(inner) => *inner,
            Node::Var { index, conj } => Node::Var { index, conj: !conj },
            // real-valued primitives are their own conjugates
            e @ (Node::Re(_) | Node::Im(_) | Node::ModSq(_)) => e,
            e => Node::Conj(Box::new(e)),
        }
    }

    pub fn re(e: Node) -> Node {
        match e.as_const() {
            Some(c) => Node::real(c.re),
            None => Node::Re(Box::new(e)),
        }
    }

    pub fn im(e: Node) -> Node {
        match e.as_const() {
            Some(c) => Node::real(c.im),
            None => Node::Im(Box::new(e)),
        }
    }

    pub fn modsq(e: Node) -> Node {
        match e.as_const() {
            Some(c) => Node::real(c.norm_sqr()),
            None => Node::ModSq(Box::new(e)),
        }
    }

    pub fn max_var_index(&self) -> Option<usize> {
        match self {
            Node::Const(_) => None,
            Node::Var { index, .. } => Some(*index),
            Node::Sum(v) | Node::Product(v) => v.iter().filter_map(Node::max_var_index).max(),
            Node::Pow(b, _) => b.max_var_index(),
            Node::Conj(e) | Node::Re(e) | Node::Im(e) | Node::ModSq(e) => e.max_var_index(),
        }
    }

    /// Recursive evaluation; `Tape` is the fast path for repeated evaluation.
    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        match self {
            Node::Const(c) => *c,
            Node::Var { index, conj } => {
                if *conj {
                    z[*index].conj()
                } else {
                    z[*index]
                }
            }
            Node::Sum(v) => v.iter().map(|t| t.eval(z)).sum(),
            Node::Product(v) => v.iter().map(|t| t.eval(z)).product(),
            Node::Pow(b, p) => b.eval(z).powu(*p),
            Node::Conj(e) => e.eval(z).conj(),
            Node::Re(e) => Complex64::new(e.eval(z).re, 0.0),
            Node::Im(e) => Complex64::new(e.eval(z).im, 0.0),
            Node::ModSq(e) => Complex64::new(e.eval(z).norm_sqr(), 0.0),
        }
    }

    fn is_atomic(&self) -> bool {
        match self {
            Node::Const(c) => c.im == 0.0 && c.re >= 0.0,
            Node::Var { .. } | Node::Conj(_) | Node::Re(_) | Node::Im(_) | Node::ModSq(_) => true,
            _ => false,
        }
    }
}

fn fmt_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    // `{:?}` keeps enough digits to round-trip and never uses exponents below 1e16
    if v.fract() == 0.0 && v.abs() < 1e15 {
        write!(f, "{}", v as i64)
    } else {
        write!(f, "{v:?}")
    }
}

/// Writes a constant without unary minus; the imaginary unit is the literal `i`.
fn fmt_const(f: &mut fmt::Formatter<'_>, c: Complex64) -> fmt::Result {
    let real_part = |f: &mut fmt::Formatter<'_>, v: f64| -> fmt::Result {
        if v < 0.0 {
            f.write_str("(0 - ")?;
            fmt_number(f, -v)?;
            f.write_str(")")
        } else {
            fmt_number(f, v)
        }
    };
    if c.im == 0.0 {
        return real_part(f, c.re);
    }
    f.write_str("(")?;
    real_part(f, c.re)?;
    f.write_str(" + ")?;
    real_part(f, c.im)?;
    f.write_str("*i)")
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) => fmt_const(f, *c),
            Node::Var { index, conj } => write!(f, "{}{}", if *conj { "zbar" } else { "z" }, index + 1),
            Node::Sum(v) => {
                f.write_str("(")?;
                for (i, t) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(")")
            }
            Node::Product(v) => {
                for (i, t) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    write!(f, "{t}")?;
                }
                Ok(())
            }
            Node::Pow(b, p) => {
                if b.is_atomic() {
                    write!(f, "{b}^{p}")
                } else {
                    write!(f, "({b})^{p}")
                }
            }
            Node::Conj(e) => write!(f, "conj({e})"),
            Node::Re(e) => write!(f, "re({e})"),
            Node::Im(e) => write!(f, "im({e})"),
            Node::ModSq(e) => write!(f, "modsq({e})"),
        }
    }
}
