use super::Node;
use num_complex::Complex64;

/// Wirtinger derivative with respect to `z_j` (`conj = false`) or `z̄_j`.
pub(super) fn diff(e: &Node, j: usize, conj: bool) -> Node {
    match e {
        Node::Const(_) => Node::zero(),
        Node::Var { index, conj: c } => {
            if *index == j && *c == conj {
                Node::one()
            } else {
                Node::zero()
            }
        }
        Node::Sum(terms) => Node::sum(terms.iter().map(|t| diff(t, j, conj)).collect()),
        Node::Product(factors) => {
            let mut terms = Vec::with_capacity(factors.len());
            for (i, f) in factors.iter().enumerate() {
                let d = diff(f, j, conj);
                if d.is_zero() {
                    continue;
                }
                let mut prod = factors.clone();
                prod[i] = d;
                terms.push(Node::product(prod));
            }
            Node::sum(terms)
        }
        Node::Pow(b, p) => {
            let d = diff(b, j, conj);
            if d.is_zero() {
                return Node::zero();
            }
            Node::product(vec![Node::real(*p as f64), Node::pow((**b).clone(), p - 1), d])
        }
        // ∂(ē)/∂z = conj(∂e/∂z̄)
        Node::Conj(inner) => Node::conj(diff(inner, j, !conj)),
        Node::Re(inner) => {
            let a = diff(inner, j, conj);
            let b = Node::conj(diff(inner, j, !conj));
            Node::product(vec![Node::real(0.5), Node::sum(vec![a, b])])
        }
        // im(e) = (e − ē)/(2i)
        Node::Im(inner) => {
            let a = diff(inner, j, conj);
            let b = Node::conj(diff(inner, j, !conj));
            let minus_b = Node::product(vec![Node::real(-1.0), b]);
            Node::product(vec![Node::Const(Complex64::new(0.0, -0.5)), Node::sum(vec![a, minus_b])])
        }
        // modsq(e) = e·ē
        Node::ModSq(inner) => {
            let a = diff(inner, j, conj);
            let b = Node::conj(diff(inner, j, !conj));
            let ebar = Node::conj((**inner).clone());
            Node::sum(vec![
                if a.is_zero() { Node::zero() } else { Node::product(vec![a, ebar]) },
                if b.is_zero() { Node::zero() } else { Node::product(vec![(**inner).clone(), b]) },
            ])
        }
    }
}
