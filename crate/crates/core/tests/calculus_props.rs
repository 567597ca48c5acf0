use dbar_core::calculus::{
    bump_profile, dbar, dbar_star, delta, inner, make_grid, q_form, sample_form, tabulate_weight, wirtinger, Grid, GridForm,
};
use dbar_core::weights::{builtin_weight, levi_matrix, WeightExpr};
use dbar_core::Complex64;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Product bump of half-width `rho` per axis times a seeded affine polynomial, per component.
fn smooth_form(g: &Grid, q: usize, rho: f64, seed: u64) -> GridForm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.n;
    let comps = GridForm::zeros(*g, q).unwrap().components();
    let coeffs: Vec<Vec<Complex64>> =
        (0..comps).map(|_| (0..2 * n + 1).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()).collect();
    sample_form(g, q, |c, z| {
        let b: f64 = z.iter().map(|x| bump_profile(x.re / rho) * bump_profile(x.im / rho)).product();
        let co = &coeffs[c];
        let mut poly = co[0];
        for (j, x) in z.iter().enumerate() {
            poly += co[1 + 2 * j] * x / rho + co[2 + 2 * j] * x.conj() / rho;
        }
        poly * b
    })
    .unwrap()
}

fn weights(n: usize) -> Vec<WeightExpr> {
    ["gaussian", "decoupled_quartic", "example_a"].iter().filter_map(|name| builtin_weight(name, n).ok()).collect()
}

/// `|(∂̄u, v)_φ − (u, ∂̄*_φ v)_φ| / (‖∂̄u‖ ‖v‖)`.
fn adjoint_defect(w: &WeightExpr, g: &Grid, q: usize) -> f64 {
    let wf = tabulate_weight(w, g).unwrap();
    let u = smooth_form(g, q - 1, 0.6 * g.radius, 11);
    let v = smooth_form(g, q, 0.6 * g.radius, 12);
    let du = dbar(&u).unwrap();
    let lhs = inner(&du, &v, &wf).unwrap();
    let rhs = inner(&u, &dbar_star(&v, &wf).unwrap(), &wf).unwrap();
    let scale = (inner(&du, &du, &wf).unwrap().re * inner(&v, &v, &wf).unwrap().re).sqrt();
    (lhs - rhs).norm() / scale
}

#[test]
fn dbar_star_is_adjoint_to_second_order() {
    for (n, q, m) in [(1, 1, 32), (2, 1, 12), (2, 2, 12)] {
        for w in weights(n) {
            let coarse = adjoint_defect(&w, &make_grid(n, 3.0, m).unwrap(), q);
            let fine = adjoint_defect(&w, &make_grid(n, 3.0, 2 * m - 1).unwrap(), q);
            let order = (coarse / fine).log2();
            assert!(coarse < 0.2, "{w} n={n} q={q}: defect {coarse}");
            assert!((1.7..2.5).contains(&order), "{w} n={n} q={q}: {coarse} -> {fine}, order {order}");
        }
    }
}

/// Largest `|[δ_j, D̄_k]f − φ_{j k̄} f|` at least three cells from the boundary,
/// for `f = e^{-|z|²/2}` times a fixed polynomial.
fn commutator_defect(w: &WeightExpr, g: &Grid, j: usize, k: usize) -> f64 {
    let wf = tabulate_weight(w, g).unwrap();
    let f = sample_form(g, 0, |_, z| {
        let r2: f64 = z.iter().map(|x| x.norm_sqr()).sum();
        (Complex64::new(1.0, 0.5) + z[0] * 0.3 - z[z.len() - 1].conj() * 0.7) * (-0.5 * r2).exp()
    })
    .unwrap();
    let f = f.component(0);
    let a = delta(&wirtinger(f, g, k, true), &wf, j);
    let b = wirtinger(&delta(f, &wf, j), g, k, true);
    let levi = levi_matrix(w).compile();
    (0..g.len())
        .into_par_iter()
        .filter(|&p| (0..g.axes()).all(|ax| (3..g.m - 3).contains(&g.axis_index(p, ax))))
        .map(|p| {
            let l = levi.eval(&g.point(p))[(j - 1) * g.n + k - 1];
            (a[p] - b[p] - l * f[p]).norm()
        })
        .reduce(|| 0.0, f64::max)
}

#[test]
fn commutator_reproduces_levi_form() {
    for (n, radius, m) in [(1, 3.0, 32), (2, 2.0, 21)] {
        for w in weights(n) {
            for j in 1..=n {
                for k in 1..=n {
                    let coarse = commutator_defect(&w, &make_grid(n, radius, m).unwrap(), j, k);
                    let fine = commutator_defect(&w, &make_grid(n, radius, 2 * m - 1).unwrap(), j, k);
                    // linear φ_z makes the discrete product rule exact
                    if coarse.max(fine) <= 1e-12 {
                        continue;
                    }
                    let order = (coarse / fine).log2();
                    assert!((1.7..2.5).contains(&order), "{w} j={j} k={k}: {coarse} -> {fine}, order {order}");
                }
            }
        }
    }
}

#[test]
fn regridding_a_supported_form_changes_nothing() {
    // same spacing h = 0.25; the larger box adds 2 layers on each side
    let small = make_grid(2, 2.0, 17).unwrap();
    let large = make_grid(2, 2.5, 21).unwrap();
    assert_eq!(small.h, large.h);
    for w in weights(2) {
        for q in 0..=2 {
            let (ws, wl) = (tabulate_weight(&w, &small).unwrap(), tabulate_weight(&w, &large).unwrap());
            let (us, ul) = (smooth_form(&small, q, 1.6, 3), smooth_form(&large, q, 1.6, 3));
            let embed = |p: usize| {
                let idx: Vec<usize> = (0..small.axes()).map(|a| small.axis_index(p, a) + 2).collect();
                large.point_index(&idx)
            };
            for c in 0..us.components() {
                for p in 0..small.len() {
                    assert!((us.component(c)[p] - ul.component(c)[embed(p)]).norm() <= 1e-12);
                }
            }
            let (qs, ql) = (q_form(&us, &us, &ws).unwrap().re, q_form(&ul, &ul, &wl).unwrap().re);
            assert!((qs - ql).abs() <= 1e-12 * ql.abs().max(1e-300), "{w} q={q}: {qs} vs {ql}");
            if q < 2 {
                let (ds, dl) = (dbar(&us).unwrap(), dbar(&ul).unwrap());
                let embedded_norm: f64 = (0..ds.components()).map(|c| (0..small.len()).map(|p| ds.component(c)[p].norm_sqr()).sum::<f64>()).sum();
                let total: f64 = dl.data.iter().map(|v| v.norm_sqr()).sum();
                assert!((embedded_norm - total).abs() <= 1e-12 * total);
            }
        }
    }
}
