//! Acceptance criteria, one line each. Runs as a plain binary so the
//! criteria execute sequentially and the table prints in order.

use dbar_core::calculus::{bump_form, dbar, make_grid, norm_sq, tabulate_weight};
use dbar_core::forms::{curvature_action, epsilon, pointwise_norm_sq, MultiIndexTable};
use dbar_core::identity::{kohn_morrey_check, tail_mass_report, BUMP_SUPPORT};
use dbar_core::levi::{hermitian_eigenvalues, s_q, s_q_at};
use dbar_core::spectral::{
    assemble_box, canonical_solution, compactness_diagnostic, dot, lowest_eigenvalues, norm, solve_neumann, Trend,
};
use dbar_core::weights::{builtin_weight, levi_matrix, WeightExpr};
use dbar_core::Complex64;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::Command;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_c(r: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    c(r.random_range(-scale..scale), r.random_range(-scale..scale))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || format!("took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64()))
}

fn example_a() -> WeightExpr {
    builtin_weight("example_a", 2).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let levi = levi_matrix(&example_a()).compile();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (z, w) = (random_c(&mut r, 2.0), random_c(&mut r, 2.0));
        let got = levi.eval(&[z, w]);
        let want = [c(w.norm_sqr(), 0.0), z.conj() * w, w.conj() * z, c(z.norm_sqr() + 4.0 * w.norm_sqr(), 0.0)];
        for (g, e) in got.iter().zip(&want) {
            let err = if *e == c(0.0, 0.0) { g.norm() } else { (g - e).norm() / e.norm() };
            worst = worst.max(err);
        }
    }
    ensure(worst <= 1e-10, || format!("entrywise rel err {worst:e}"))?;
    within(start.elapsed(), 1.0)?;
    Ok(format!("max entrywise rel err {worst:.1e}"))
}

/// `(μ₁, μ₂)` in the form that stays accurate as `w → 0`.
fn example_a_eigenvalues(z: Complex64, w: Complex64) -> (f64, f64) {
    let (a, b) = (z.norm_sqr(), w.norm_sqr());
    let root = (9.0 * b * b + 10.0 * a * b + a * a).sqrt();
    let mu2 = 0.5 * (5.0 * b + a + root);
    let mu1 = 16.0 * b * b / (2.0 * (5.0 * b + a + root));
    (mu1, mu2)
}

fn criterion_2() -> Outcome {
    let levi = levi_matrix(&example_a()).compile();
    let mut r = rng(2);
    let mut points = Vec::new();
    for _ in 0..80 {
        points.push((random_c(&mut r, 2.0), random_c(&mut r, 2.0)));
    }
    // w → 0 along rays, down to |w|/|z| = 1e-3
    for i in 1..=19 {
        let z = random_c(&mut r, 2.0);
        let dir = random_c(&mut r, 1.0);
        let w = dir / dir.norm() * z.norm() * 10f64.powf(-3.0 * i as f64 / 19.0);
        points.push((z, w));
    }
    points.push((random_c(&mut r, 2.0), c(0.0, 0.0)));
    let mut worst = 0.0f64;
    for &(z, w) in &points {
        let got = hermitian_eigenvalues(&levi.eval(&[z, w]), 2).map_err(|e| e.to_string())?;
        let (mu1, mu2) = example_a_eigenvalues(z, w);
        if w == c(0.0, 0.0) {
            ensure(got[0] == 0.0, || format!("μ₁(z,0) = {:e}", got[0]))?;
        } else {
            worst = worst.max((got[0] - mu1).abs() / mu1);
        }
        worst = worst.max((got[1] - mu2).abs() / mu2);
    }
    ensure(worst <= 1e-8, || format!("rel err {worst:e}"))?;
    Ok(format!("{} points, max rel err {worst:.1e}, μ₁(z,0) = 0", points.len()))
}

fn criterion_3() -> Outcome {
    let w = example_a();
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (z1, z2) = (random_c(&mut r, 2.0), random_c(&mut r, 2.0));
        let got = s_q_at(&w, &[z1, z2], 2).map_err(|e| e.to_string())?;
        let want = z1.norm_sqr() + 5.0 * z2.norm_sqr();
        worst = worst.max((got - want).abs() / want);
    }
    ensure(worst <= 1e-10, || format!("rel err {worst:e}"))?;
    Ok(format!("max rel err {worst:.1e}"))
}

/// Sign of the permutation taking `src` to `dst`, 0 if they are not permutations of each other.
fn permutation_sign(src: &[usize], dst: &[usize]) -> i8 {
    fn perms(items: &[usize]) -> Vec<(i8, Vec<usize>)> {
        if items.is_empty() {
            return vec![(1, vec![])];
        }
        let mut out = Vec::new();
        for (s, rest) in perms(&items[1..]) {
            for i in 0..=rest.len() {
                let mut p = rest.clone();
                p.insert(i, items[0]);
                out.push((if i % 2 == 0 { s } else { -s }, p));
            }
        }
        out
    }
    perms(src).into_iter().find(|(_, p)| p == dst).map_or(0, |(s, _)| s)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut count = 0usize;
    for n in 1..=5 {
        for len in 0..=3.min(n) {
            let tuples = MultiIndexTable::new(n, len).unwrap().tuples().to_vec();
            for big_j in &tuples {
                for big_m in &tuples {
                    for j in 1..=n {
                        for k in 1..=n {
                            let src: Vec<usize> = std::iter::once(j).chain(big_j.iter().copied()).collect();
                            let dst: Vec<usize> = std::iter::once(k).chain(big_m.iter().copied()).collect();
                            let want = if big_j.contains(&j) || big_m.contains(&k) { 0 } else { permutation_sign(&src, &dst) };
                            let got = epsilon(j, big_j, k, big_m).map_err(|e| e.to_string())?;
                            ensure(got == want, || format!("ε({j},{big_j:?};{k},{big_m:?}) = {got}, expected {want}"))?;
                            count += 1;
                        }
                    }
                }
            }
        }
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!("{count} cases in {:.2} s", start.elapsed().as_secs_f64()))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut cases = Vec::new();
    for n in 1..=2usize {
        for name in ["gaussian", "decoupled_quartic", "example_a"] {
            let Ok(w) = builtin_weight(name, n) else { continue };
            for q in 1..=n.min(2) {
                cases.push((n, name, w.clone(), q));
            }
        }
    }
    let mut worst_err = 0.0f64;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (n, name, w, q) in &cases {
        let coarse = kohn_morrey_check(w, *q, &make_grid(*n, 3.0, 24).map_err(|e| e.to_string())?, 7).map_err(|e| e.to_string())?;
        let fine = kohn_morrey_check(w, *q, &make_grid(*n, 3.0, 48).map_err(|e| e.to_string())?, 7).map_err(|e| e.to_string())?;
        let ratio = coarse.rel_err / fine.rel_err;
        ensure(coarse.rel_err <= 5e-2, || format!("{name} n={n} q={q}: rel_err(24) = {:e}", coarse.rel_err))?;
        ensure((3.0..=5.0).contains(&ratio), || format!("{name} n={n} q={q}: ratio {ratio:.2}"))?;
        worst_err = worst_err.max(coarse.rel_err);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    within(start.elapsed(), 300.0)?;
    Ok(format!("{} cases, rel_err(24) ≤ {worst_err:.2e}, ratios in [{lo:.2}, {hi:.2}], {:.0} s", cases.len(), start.elapsed().as_secs_f64()))
}

fn criterion_6() -> Outcome {
    let mut r = rng(6);
    let mut worst = f64::INFINITY;
    for trial in 0..10_000 {
        let n = 1 + trial % 4;
        let q = 1 + (trial / 4) % n;
        let scale = 10f64.powf(r.random_range(-2.0..2.0));
        let raw: Vec<Complex64> = (0..n * n).map(|_| random_c(&mut r, scale)).collect();
        let h: Vec<Complex64> = (0..n * n).map(|i| (raw[i] + raw[(i % n) * n + i / n].conj()) * 0.5).collect();
        let tq = MultiIndexTable::new(n, q).unwrap();
        let tqm1 = MultiIndexTable::new(n, q - 1).unwrap();
        let u: Vec<Complex64> = (0..tq.len()).map(|_| random_c(&mut r, 1.0)).collect();
        let act = curvature_action(&h, &u, &tq, &tqm1).map_err(|e| e.to_string())?;
        let sq = s_q(&hermitian_eigenvalues(&h, n).map_err(|e| e.to_string())?, q);
        let norm = pointwise_norm_sq(&u);
        let size = h.iter().map(|v| v.norm()).fold(0.0, f64::max) * norm;
        let margin = (act - sq * norm) / size;
        worst = worst.min(margin);
        ensure(margin >= -1e-10, || format!("trial {trial}: margin {margin:e}"))?;
    }
    Ok(format!("10000 trials, worst scaled margin {worst:.1e}"))
}

fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let mut count = 0;
    let mut worst_low = f64::INFINITY;
    for (n, radius, m) in [(1usize, 4.0, 32usize), (2, 3.0, 12)] {
        let g = make_grid(n, radius, m).map_err(|e| e.to_string())?;
        for name in ["gaussian", "decoupled_quartic", "example_a"] {
            let Ok(w) = builtin_weight(name, n) else { continue };
            for q in 0..=n {
                let a = assemble_box(&w, &g, q).map_err(|e| e.to_string())?;
                for _ in 0..4 {
                    let u: Vec<Complex64> = (0..a.dim()).map(|_| random_c(&mut r, 1.0)).collect();
                    let v: Vec<Complex64> = (0..a.dim()).map(|_| random_c(&mut r, 1.0)).collect();
                    let lhs = dot(&v, &a.matvec(&u));
                    let rhs = dot(&u, &a.matvec(&v)).conj();
                    let size = a.matrix().norm_inf() * norm(&u) * norm(&v);
                    ensure((lhs - rhs).norm() <= 1e-12 * size, || format!("{name} q={q}: (Au,v) - conj(Av,u) = {:e}", (lhs - rhs).norm()))?;
                }
                let low = lowest_eigenvalues(&a, 1, 1e-8, 20_000, 7);
                ensure(low.converged, || format!("{name} n={n} q={q}: eigensolver did not converge"))?;
                let scaled = low.values[0] / low.norm_estimate;
                ensure(scaled >= -1e-8, || format!("{name} n={n} q={q}: λ_min/‖A‖ = {scaled:e}"))?;
                worst_low = worst_low.min(scaled);
                count += 1;
            }
        }
    }
    Ok(format!("{count} operators, min λ_min/‖A‖ = {worst_low:.2e}"))
}

fn criterion_8() -> Outcome {
    let w = builtin_weight("gaussian", 1).unwrap();
    let big = assemble_box(&w, &make_grid(1, 6.0, 64).map_err(|e| e.to_string())?, 1).map_err(|e| e.to_string())?;
    let res = lowest_eigenvalues(&big, 1, 1e-8, 20_000, 8);
    ensure(res.converged, || "Lanczos did not converge at m=64".into())?;
    let lam = res.values[0];
    ensure((0.9..=1.2).contains(&lam), || format!("λ_min = {lam}"))?;

    let small = assemble_box(&w, &make_grid(1, 6.0, 24).map_err(|e| e.to_string())?, 1).map_err(|e| e.to_string())?;
    let d = small.dim();
    let mut exact: Vec<f64> = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &small.matrix().to_dense())).eigenvalues.iter().copied().collect();
    exact.sort_by(f64::total_cmp);
    let lan = lowest_eigenvalues(&small, 4, 1e-10, 20_000, 8);
    ensure(lan.converged, || "Lanczos did not converge at m=24".into())?;
    let gap = lan.values.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(gap <= 1e-8, || format!("Lanczos vs dense at m=24: {gap:e}"))?;
    Ok(format!("λ_min(m=64) = {lam:.5}, Lanczos vs dense (m=24, 4 values) {gap:.1e}"))
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let radii = [3.0, 4.0, 5.0];
    let cases = [("decoupled_quartic", 2, Trend::Diverging), ("decoupled_quartic", 1, Trend::Plateau), ("gaussian", 1, Trend::Plateau)];
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for (name, q, want) in cases {
        let w = builtin_weight(name, 2).unwrap();
        let rep = compactness_diagnostic(&w, q, &radii, 4.0, 4, 9).map_err(|e| e.to_string())?;
        let lows: Vec<String> = rep.records.iter().map(|r| format!("{:.4}", r.eigenvalues[r.eigenvalues.len() - 1])).collect();
        let line = format!("{name} q={q}: {} (λ_4 {})", rep.classification, lows.join(" → "));
        if rep.classification != want {
            failures.push(format!("{line}, expected {want}"));
        }
        lines.push(line);
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 900.0 {
        failures.push("over the 900 s limit".to_string());
    }
    if failures.is_empty() {
        Ok(format!("{}; {elapsed:.0} s", lines.join("; ")))
    } else {
        Err(format!("{}; {elapsed:.0} s", failures.join("; ")))
    }
}

fn criterion_10() -> Outcome {
    let w = builtin_weight("gaussian", 1).unwrap();
    let g = make_grid(1, 6.0, 48).map_err(|e| e.to_string())?;
    let wf = tabulate_weight(&w, &g).map_err(|e| e.to_string())?;
    let a = assemble_box(&w, &g, 1).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for seed in 0..4 {
        let v = bump_form(&g, 1, seed, BUMP_SUPPORT).map_err(|e| e.to_string())?;
        let sol = solve_neumann(&a, &wf, &v, 1e-8, 10_000).map_err(|e| e.to_string())?;
        // residual recomputed independently of the solver
        let x = dbar_core::spectral::to_frame(&sol.u, &wf);
        let b = dbar_core::spectral::to_frame(&v, &wf);
        let ax = a.matvec(&x);
        let res = norm(&ax.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>()) / norm(&b);
        ensure(res <= 1e-8, || format!("seed {seed}: Neumann residual {res:e}"))?;
        worst = worst.max(res);
    }
    let gw = make_grid(1, 4.0, 48).map_err(|e| e.to_string())?;
    let gwf = tabulate_weight(&w, &gw).map_err(|e| e.to_string())?;
    let f = dbar(&bump_form(&gw, 0, 10, BUMP_SUPPORT).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let can = canonical_solution(&w, &gw, &f).map_err(|e| e.to_string())?;
    let du = dbar(&can.u).map_err(|e| e.to_string())?;
    let diff = dbar_core::calculus::GridForm::from_data(gw, 1, du.data.iter().zip(&f.data).map(|(a, b)| a - b).collect()).map_err(|e| e.to_string())?;
    let rel = (norm_sq(&diff, &gwf).map_err(|e| e.to_string())? / norm_sq(&f, &gwf).map_err(|e| e.to_string())?).sqrt();
    ensure(rel <= 1e-2, || format!("canonical ‖∂̄u − f‖/‖f‖ = {rel:e}"))?;
    Ok(format!("Neumann residual ≤ {worst:.1e}, canonical ‖∂̄u − f‖/‖f‖ = {rel:.1e}"))
}

fn criterion_11() -> Outcome {
    let w = builtin_weight("decoupled_quartic", 1).unwrap();
    let g = make_grid(1, 4.0, 64).map_err(|e| e.to_string())?;
    let wf = tabulate_weight(&w, &g).map_err(|e| e.to_string())?;
    let mut rows = 0;
    for seed in 0..8 {
        let u = bump_form(&g, 1, seed, BUMP_SUPPORT).map_err(|e| e.to_string())?;
        let rep = tail_mass_report(&u, &w, &wf, &[0.25, 0.5, 0.75], 1e-8).map_err(|e| e.to_string())?;
        for row in &rep.rows {
            ensure(row.tail_mass <= row.bound + 1e-8, || format!("seed {seed}, ρ={}: tail {:e} > bound {:e}", row.radius, row.tail_mass, row.bound))?;
            rows += 1;
        }
    }
    Ok(format!("{rows} tail rows within bound"))
}

fn body(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dbarlab")).args(args).output().map_err(|e| e.to_string())?;
    let code = out.status.code();
    ensure(code == Some(0) || code == Some(2), || format!("{args:?} exited with {code:?}: {}", String::from_utf8_lossy(&out.stderr)))?;
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    Ok(text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n"))
}

fn criterion_12() -> Outcome {
    let runs: [&[&str]; 4] = [
        &["analyze", "--weight", "example_a", "--q", "1", "--seed", "12"],
        &["verify", "--weight", "decoupled_quartic", "--n", "1", "--m", "32", "--trials", "3", "--seed", "12"],
        &["spectrum", "--weight", "gaussian", "--n", "1", "--q", "1", "--radii", "3,4,5", "--m-per-r", "4", "--k", "3", "--seed", "12"],
        &["solve", "--weight", "gaussian", "--n", "1", "--m", "24", "--seed", "12"],
    ];
    for args in runs {
        let (a, b) = (body(args)?, body(args)?);
        ensure(!a.is_empty() && a == b, || format!("{} output differs between runs", args[0]))?;
    }
    Ok("analyze, verify, spectrum and solve bodies byte-identical".into())
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("Levi matrix of the mixed quartic", criterion_1),
        ("closed-form Levi eigenvalues", criterion_2),
        ("s_2 equals a quarter Laplacian", criterion_3),
        ("permutation sign oracle", criterion_4),
        ("Kohn-Morrey second-order convergence", criterion_5),
        ("curvature lower bound", criterion_6),
        ("box positive and self-adjoint", criterion_7),
        ("Gaussian spectral gap", criterion_8),
        ("compactness contrast", criterion_9),
        ("Neumann and canonical solves", criterion_10),
        ("tail bound", criterion_11),
        ("CLI determinism", criterion_12),
    ];
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    // optional criterion numbers to run; libtest-style flags are ignored
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = format!("criterion {:>2}", i + 1);
        if !filter.is_empty() && !filter.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("{id} PASS [{secs:7.1} s] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL [{secs:7.1} s] {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
