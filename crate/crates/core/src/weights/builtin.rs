use super::{parse_weight, WeightError, WeightExpr};

/// A named weight family.
#[derive(Clone, Copy, Debug)]
pub struct BuiltinWeight {
    pub name: &'static str,
    /// Dimensions the family is defined for; `None` means any `n ≥ 1`.
    pub fixed_dim: Option<usize>,
    pub description: &'static str,
}

pub const BUILTIN_WEIGHTS: &[BuiltinWeight] = &[
    BuiltinWeight {
        name: "example_a",
        fixed_dim: Some(2),
        description: "|z1|^2|z2|^2 + |z2|^4; s_1 vanishes along the z1 axis (q=1 criteria fail), \
                      s_2 = |z1|^2 + 5|z2|^2 grows (q=2 compact)",
    },
    BuiltinWeight {
        name: "decoupled_quartic",
        fixed_dim: None,
        description: "sum of |z_j|^4; Levi eigenvalues 4|z_j|^2; for n=2, N_1 not compact, N_2 compact",
    },
    BuiltinWeight {
        name: "gaussian",
        fixed_dim: None,
        description: "sum of |z_j|^2; every Levi eigenvalue is 1; N_q exists and is not compact",
    },
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN_WEIGHTS.iter().map(|b| b.name)
}

fn sum_over(n: usize, term: impl Fn(usize) -> String) -> String {
    (1..=n).map(term).collect::<Vec<_>>().join(" + ")
}

/// Source text of a built-in weight in dimension `n`.
pub fn builtin_source(name: &str, n: usize) -> Result<String, WeightError> {
    let entry = BUILTIN_WEIGHTS
        .iter()
        .find(|b| b.name == name)
        .ok_or_else(|| WeightError::UnknownBuiltin(name.to_string()))?;
    if n == 0 || entry.fixed_dim.is_some_and(|d| d != n) {
        return Err(WeightError::DimensionOutOfRange { index: entry.fixed_dim.unwrap_or(1), dim: n, pos: 0 });
    }
    Ok(match name {
        "example_a" => "modsq(z1)*modsq(z2) + modsq(z2)^2".to_string(),
        "decoupled_quartic" => sum_over(n, |j| format!("modsq(z{j})^2")),
        _ => sum_over(n, |j| format!("modsq(z{j})")),
    })
}

pub fn builtin_weight(name: &str, n: usize) -> Result<WeightExpr, WeightError> {
    parse_weight(&builtin_source(name, n)?, n)
}
