use dbar_core::calculus::{bump_form, dbar, inner, make_grid, norm_sq, q_form, tabulate_weight};
use dbar_core::identity::{
    basic_estimate_probe, curvature_lower_bound_check, dbar_star_norm_sq, kohn_morrey_check, kohn_morrey_terms, split_seeds,
    tail_mass_report, BUMP_SUPPORT,
};
use dbar_core::weights::{builtin_weight, parse_weight, WeightExpr};

fn weights(n: usize) -> Vec<WeightExpr> {
    ["gaussian", "decoupled_quartic", "example_a"].iter().filter_map(|name| builtin_weight(name, n).ok()).collect()
}

#[test]
fn kohn_morrey_residual_is_second_order_in_one_variable() {
    for w in weights(1) {
        for seed in split_seeds(3, 3) {
            let coarse = kohn_morrey_check(&w, 1, &make_grid(1, 4.0, 32).unwrap(), seed).unwrap();
            let fine = kohn_morrey_check(&w, 1, &make_grid(1, 4.0, 64).unwrap(), seed).unwrap();
            let ratio = coarse.rel_err / fine.rel_err;
            assert!(coarse.rel_err <= 5e-2, "{w}: {coarse:?}");
            assert!((3.0..=5.0).contains(&ratio), "{w} seed {seed}: {} -> {}, ratio {ratio}", coarse.rel_err, fine.rel_err);
        }
    }
}

#[test]
fn gaussian_residual_shrinks_fourfold() {
    let w = builtin_weight("gaussian", 1).unwrap();
    let coarse = kohn_morrey_check(&w, 1, &make_grid(1, 6.0, 64).unwrap(), 9).unwrap();
    let fine = kohn_morrey_check(&w, 1, &make_grid(1, 6.0, 128).unwrap(), 9).unwrap();
    assert!(coarse.rel_err <= 1e-2, "{coarse:?}");
    let ratio = coarse.rel_err / fine.rel_err;
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn curvature_term_is_nonnegative_for_plurisubharmonic_weights() {
    for n in 1..=2 {
        let g = make_grid(n, 3.0, if n == 1 { 40 } else { 12 }).unwrap();
        for w in weights(n) {
            let wf = tabulate_weight(&w, &g).unwrap();
            for q in 1..=n {
                for seed in split_seeds(17, 4) {
                    let u = bump_form(&g, q, seed, BUMP_SUPPORT).unwrap();
                    let (_, grad, curv) = kohn_morrey_terms(&u, &w, &wf).unwrap();
                    assert!(grad >= 0.0);
                    assert!(curv >= 0.0, "{w} q={q}: {curv}");
                }
            }
        }
    }
}

#[test]
fn curvature_term_turns_negative_without_plurisubharmonicity() {
    // Levi form ≡ −1
    let w = parse_weight("re(z1^2) - modsq(z1)", 1).unwrap();
    let g = make_grid(1, 3.0, 40).unwrap();
    let wf = tabulate_weight(&w, &g).unwrap();
    for seed in split_seeds(5, 4) {
        let u = bump_form(&g, 1, seed, BUMP_SUPPORT).unwrap();
        let (_, _, curv) = kohn_morrey_terms(&u, &w, &wf).unwrap();
        let nrm = norm_sq(&u, &wf).unwrap();
        assert!((curv + nrm).abs() <= 1e-10 * nrm, "{curv} vs -{nrm}");
    }
}

#[test]
fn q_norm_splits_into_its_two_parts() {
    let g = make_grid(2, 3.0, 12).unwrap();
    for w in weights(2) {
        let wf = tabulate_weight(&w, &g).unwrap();
        for q in 1..=2 {
            let u = bump_form(&g, q, 21, BUMP_SUPPORT).unwrap();
            let du = if q < 2 { norm_sq(&dbar(&u).unwrap(), &wf).unwrap() } else { 0.0 };
            let total = du + dbar_star_norm_sq(&u, &wf).unwrap();
            let qf = q_form(&u, &u, &wf).unwrap();
            assert!(qf.im.abs() <= 1e-12 * qf.re);
            assert!((qf.re - total).abs() <= 1e-12 * total, "{w} q={q}");
            let v = bump_form(&g, q, 22, BUMP_SUPPORT).unwrap();
            let (a, b) = (q_form(&u, &v, &wf).unwrap(), q_form(&v, &u, &wf).unwrap());
            assert!((a - b.conj()).norm() <= 1e-12 * (qf.re + q_form(&v, &v, &wf).unwrap().re));
            assert!(inner(&u, &u, &wf).unwrap().re > 0.0);
        }
    }
}

#[test]
fn gaussian_basic_estimate_has_unit_constant() {
    let w = builtin_weight("gaussian", 1).unwrap();
    let c = basic_estimate_probe(&w, 1, &make_grid(1, 6.0, 64).unwrap(), 8, 4).unwrap();
    assert!(c <= 1.05, "{c}");
}

#[test]
fn curvature_bound_holds_for_builtin_weights() {
    for (n, m) in [(1, 48), (2, 14)] {
        let g = make_grid(n, 3.0, m).unwrap();
        for w in weights(n) {
            for q in 1..=n {
                let rep = curvature_lower_bound_check(&w, q, &g, 4, 8, 10.0).unwrap();
                assert!(rep.passed, "{w} q={q}: {} {}", rep.worst_margin, rep.worst_lhs_margin);
                assert!(rep.worst_margin >= -1e-10);
            }
        }
    }
}

#[test]
fn quartic_tail_stays_below_the_bound() {
    let w = builtin_weight("decoupled_quartic", 1).unwrap();
    let g = make_grid(1, 4.0, 64).unwrap();
    let wf = tabulate_weight(&w, &g).unwrap();
    for seed in split_seeds(31, 6) {
        let u = bump_form(&g, 1, seed, BUMP_SUPPORT).unwrap();
        let rep = tail_mass_report(&u, &w, &wf, &[0.25, 0.5, 0.75], 1e-8).unwrap();
        assert!(rep.passed(), "{:?}", rep.rows);
        // tails shrink as the radius grows
        assert!(rep.rows.windows(2).all(|r| r[1].tail_mass <= r[0].tail_mass));
        assert!(rep.rows.iter().all(|r| r.bound.is_finite()));
    }
}
