//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use kdvist_core::dyson::{kdv_residual, pole_free_certificate, q_grid, q_value, ParabolicDomain, QOptions, SolutionSample};
use kdvist_core::hankel::{
    build_galerkin, build_nystrom, lambda_rule, singular_values, xi, xi_abs, OscillatorySymbol, RuleKind,
};
use kdvist_core::refsolver::{compare, CompareOptions};
use kdvist_core::scattering::{build_table, reflection, reflection_with};
use kdvist_core::weyl::{m_function, WeylOptions, WeylSolver};
use kdvist_core::{catalog, mollify, Execution, MiuraProfile};
use num_bigint::BigInt;
use num_complex::Complex64 as C;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

/// `(passed, detail)`.
type Verdict = (bool, String);

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn upper_sqrt(z: C) -> C {
    let s = z.sqrt();
    if s.im < 0.0 {
        -s
    } else {
        s
    }
}

fn all_profiles() -> Vec<MiuraProfile> {
    [
        ("zero", vec![]),
        ("delta", vec![1.0]),
        ("delta", vec![2.0]),
        ("smooth_bump", vec![2.0, 0.5]),
        ("positive_box", vec![1.0, 1.0]),
        ("constant_r", vec![0.5]),
        ("rough_random", vec![7.0, 4.0, 0.5]),
    ]
    .iter()
    .map(|(n, p)| catalog(n, p).unwrap())
    .collect()
}

fn delta_symbol(x: f64, t: f64, h: f64) -> OscillatorySymbol {
    let p = catalog("delta", &[1.0]).unwrap();
    let r = lambda_rule(0.0, t, h, 96, RuleKind::Hermite).unwrap();
    let table = Arc::new(build_table(&p, h, &r.rule, 1e-12, Execution::Parallel).unwrap());
    OscillatorySymbol::real_x(x, t, table).unwrap()
}

fn worst_fd(samples: &[SolutionSample]) -> f64 {
    samples.iter().map(|s| s.fd_crosscheck_error).fold(0.0, f64::max)
}

fn m_function_delta() -> Verdict {
    let mut worst = 0.0f64;
    for cc in [0.5, 1.0, 2.0] {
        let p = catalog("delta", &[cc]).unwrap();
        for r in [0.1, 0.5, 1.0, 4.0, 16.0] {
            for j in 0..10 {
                let th = 2.0 * PI * (j as f64 + 0.5) / 10.0;
                let z = C::from_polar(r, th);
                let want = C::i() * upper_sqrt(z) - cc;
                let got = m_function(&p, z, 1e-12).unwrap().m;
                worst = worst.max((got - want).norm() / want.norm());
            }
        }
    }
    (worst < 1e-8, format!("max relative error {worst:.2e} over 3 x 50 points"))
}

fn reflection_delta() -> Verdict {
    let p = catalog("delta", &[1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = c(rng.random_range(-5.0..5.0), rng.random_range(0.01..3.0));
        let want = 1.0 / (2.0 * C::i() * k - 1.0);
        let got = reflection(&p, k, 1e-12).unwrap();
        worst = worst.max((got - want).norm() / want.norm());
    }
    (worst < 1e-8, format!("max relative error {worst:.2e} over 100 points"))
}

fn zero_reflection() -> Verdict {
    let p = catalog("zero", &[]).unwrap();
    let xs: Vec<f64> = (0..21).map(|i| -5.0 + 0.5 * i as f64).collect();
    let mut ok = true;
    for t in [0.1, 1.0] {
        for s in q_grid(&p, &xs, t, &QOptions::default()).unwrap() {
            let s = s.unwrap();
            ok &= s.q == 0.0 && s.logdet == 0.0;
        }
    }
    let sym = delta_symbol(0.0, 1.0, 1.0);
    let r = lambda_rule(0.0, 1.0, 1.0, 64, RuleKind::Hermite).unwrap();
    let table = Arc::new(build_table(&p, 1.0, &r.rule, 1e-12, Execution::Sequential).unwrap());
    let zsym = OscillatorySymbol::real_x(0.3, 1.0, table).unwrap();
    let det = build_nystrom(&zsym, 48, 3.0).unwrap().det_iplus();
    ok &= det == c(1.0, 0.0) && !sym.is_zero() && zsym.is_zero();
    (ok, format!("q and log det exactly 0 on 42 samples, det(I+H) = {det}"))
}

fn unimodular_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut r_max, mut sym_err, mut det_err, mut im_min) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    let mut det_abs = 0.0f64;
    for p in all_profiles() {
        let solver = WeylSolver::new(
            &p,
            WeylOptions {
                k_max: 8.0,
                ..WeylOptions::default()
            },
        )
        .unwrap();
        for _ in 0..100 {
            let k = c(rng.random_range(-6.0..6.0), rng.random_range(0.01..4.0));
            let r = reflection_with(&solver, k).unwrap();
            r_max = r_max.max(r.norm());
            let mirrored = reflection_with(&solver, -k.conj()).unwrap();
            sym_err = sym_err.max((mirrored - r.conj()).norm());
        }
        let rule = lambda_rule(0.0, 0.5, 1.0, 128, RuleKind::Hermite).unwrap();
        let table = build_table(&p, 1.0, &rule.rule, 1e-12, Execution::Parallel).unwrap();
        r_max = r_max.max(table.max_modulus());
        let left = p.support_left().clamp(-6.0, -1.0);
        for _ in 0..20 {
            let z = c(rng.random_range(-10.0..10.0), rng.random_range(0.01..5.0));
            // relative to the size of the products that cancel in ad - bc
            let tm = solver.propagate(z, left, 0.0).unwrap();
            let d = tm.det();
            det_abs = det_abs.max((d - 1.0).norm());
            det_err = det_err.max((d - 1.0).norm() / ((tm.a * tm.d).norm() + (tm.b * tm.c).norm()));
        }
        for _ in 0..100 {
            let z = c(rng.random_range(-10.0..10.0), rng.random_range(0.01..5.0));
            im_min = im_min.min(solver.m(z).unwrap().m.im);
        }
    }
    let ok = r_max <= 1.0 + 1e-9 && sym_err < 1e-10 && det_err < 1e-12 && im_min > 0.0;
    (
        ok,
        format!(
            "max |R| {r_max:.12}, symmetry {sym_err:.1e}, |det T - 1| {det_err:.1e} relative ({det_abs:.1e} absolute), min Im m {im_min:.2e}"
        ),
    )
}

fn strict_contraction() -> Verdict {
    let xs: Vec<f64> = (0..17).map(|i| -4.0 + 0.5 * i as f64).collect();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for p in all_profiles() {
        for t in [0.05, 0.1, 0.5, 1.0] {
            for s in q_grid(&p, &xs, t, &QOptions::default()).unwrap() {
                match s {
                    Ok(s) => worst = worst.max(s.spectral_radius),
                    Err(_) => failures += 1,
                }
            }
        }
    }
    (
        worst < 1.0 && failures == 0,
        format!("max spectral radius {worst:.6} over 7 profiles x 17 x 4 samples, {failures} failures"),
    )
}

fn singular_value_decay() -> Verdict {
    let h = 1.0;
    let s = singular_values(&build_nystrom(&delta_symbol(0.0, 1.0, h), 80, 3.0).unwrap());
    let floor = 1e-13 * s[0];
    let pts: Vec<(f64, f64)> = s
        .iter()
        .enumerate()
        .take_while(|(_, v)| **v > floor)
        .map(|(n, v)| (n as f64, v.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (
        pts.len() >= 5 && slope <= -h / 2.0 + 0.1,
        format!("slope {slope:.3} over {} values above the floor", pts.len()),
    )
}

fn discretization_consistency() -> Verdict {
    let mut worst = 0.0f64;
    for (x, t) in [(0.0, 1.0), (1.0, 0.5), (-1.0, 1.0)] {
        let sym = delta_symbol(x, t, 1.0);
        let dn = build_nystrom(&sym, 80, 3.0).unwrap().det_iplus();
        let dg = build_galerkin(&sym, 30).unwrap().det_iplus();
        worst = worst.max((dn - dg).norm() / dn.norm());
    }
    (worst < 1e-6, format!("max relative determinant gap {worst:.2e}"))
}

fn cross_solver(fd: &mut Vec<(&'static str, f64)>) -> Verdict {
    let p = catalog("smooth_bump", &[2.0, 0.5]).unwrap();
    let cmp = compare(&p, 0.05, (-5.0, 5.0), &QOptions::default(), &CompareOptions::default()).unwrap();
    fd.push(("cross-solver grid", cmp.worst_fd_crosscheck));
    let ladder: Vec<f64> = cmp
        .runs
        .iter()
        .take_while(|r| r.x_half == cmp.runs[0].x_half && r.n == cmp.runs[0].n)
        .map(|r| r.discrepancy)
        .collect();
    let decreasing = ladder.windows(2).all(|w| w[1] < w[0]);
    let budget = 10.0 * (cmp.ref_self_error + cmp.dyson_self_error);
    let ok = cmp.discrepancy < 1e-4
        && cmp.ref_self_error < 1e-5
        && cmp.dyson_self_error < 1e-5
        && decreasing
        && cmp.discrepancy <= budget;
    (
        ok,
        format!(
            "discrepancy {:.2e}, reference self-error {:.2e}, determinant self-error {:.2e}, ladder {:?}",
            cmp.discrepancy,
            cmp.ref_self_error,
            cmp.dyson_self_error,
            ladder.iter().map(|d| format!("{d:.1e}")).collect::<Vec<_>>()
        ),
    )
}

fn kdv_residual_check(fd: &mut Vec<(&'static str, f64)>) -> Verdict {
    let p = catalog("smooth_bump", &[2.0, 0.5]).unwrap();
    let pts = [
        (-3.0, 0.05),
        (-2.0, 0.05),
        (-1.0, 0.1),
        (0.0, 0.1),
        (1.0, 0.2),
        (-2.5, 0.2),
        (-1.5, 0.5),
        (0.5, 0.5),
        (-4.0, 1.0),
        (2.0, 1.0),
    ];
    let opts = QOptions::default();
    let mut worst = 0.0f64;
    let mut worst_fd = 0.0f64;
    for (x, t) in pts {
        worst = worst.max(kdv_residual(&p, x, t, &[0.1, 0.05, 0.025], &opts).unwrap().residual);
        worst_fd = worst_fd.max(q_value(&p, x, t, &opts).unwrap().fd_crosscheck_error);
    }
    fd.push(("residual points", worst_fd));
    (worst < 1e-4, format!("max residual {worst:.2e} at 10 points"))
}

fn natural_solution(fd: &mut Vec<(&'static str, f64)>) -> Verdict {
    let p = catalog("delta", &[1.0]).unwrap();
    let xs: Vec<f64> = (0..61).map(|i| -3.0 + 0.1 * i as f64).collect();
    let opts = QOptions::default();
    let grid = |q: &MiuraProfile| -> Vec<SolutionSample> {
        q_grid(q, &xs, 0.2, &opts).unwrap().into_iter().map(|s| s.unwrap()).collect()
    };
    let base = grid(&p);
    let mut worst_fd = worst_fd(&base);
    let mut sups = Vec::new();
    for n in [4, 8, 16] {
        let g = grid(&mollify(&p, n).unwrap());
        worst_fd = worst_fd.max(self::worst_fd(&g));
        sups.push(g.iter().zip(&base).map(|(a, b)| (a.q - b.q).abs()).fold(0.0, f64::max));
    }
    fd.push(("mollified grids", worst_fd));
    (
        sups.windows(2).all(|w| w[1] < w[0]),
        format!("sup errors {:?} for n = 4, 8, 16", sups.iter().map(|s| format!("{s:.3e}")).collect::<Vec<_>>()),
    )
}

fn pole_free() -> Verdict {
    let (t, delta) = (0.5, 1.0);
    let dom = ParabolicDomain::new(delta, t).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut zs = Vec::new();
    while zs.len() < 50 {
        let re = rng.random_range(1.0..8.0);
        if let Some(w) = dom.half_width(re) {
            zs.push(c(re, rng.random_range(-w..w)));
        }
    }
    let p = catalog("delta", &[1.0]).unwrap();
    let rep = pole_free_certificate(&p, t, delta, &zs).unwrap();
    let worst = rep.samples.iter().map(|s| s.bound).fold(0.0, f64::max);
    (rep.all_certified, format!("max norm bound {worst:.6} over 50 samples, h = {:.4}", rep.h))
}

fn derivative_crosscheck(fd: &[(&'static str, f64)]) -> Verdict {
    let worst = fd.iter().map(|f| f.1).fold(0.0, f64::max);
    let detail = fd.iter().map(|(n, v)| format!("{n} {v:.1e}")).collect::<Vec<_>>().join(", ");
    (fd.len() == 3 && worst < 1e-6, detail)
}

/// `exp(e)` for an exact rational exponent, as `(exp(e_hi), e - e_hi)`.
fn exact_exponent(lambda: f64, h: f64, z: C, t: f64) -> (f64, f64) {
    let r = |v: f64| BigRational::from_float(v).unwrap();
    let (l, h, zr, zi, t) = (r(lambda), r(h), r(z.re), r(z.im), r(t));
    let n = |v: i64| BigRational::from_integer(BigInt::from(v));
    let e = n(8) * &h * &h * &h * &t - n(24) * &h * &t * &l * &l - n(2) * &l * &zi - n(2) * &h * &zr;
    let hi = e.to_f64().unwrap();
    let lo = (e - r(hi)).to_f64().unwrap();
    (hi, lo)
}

fn xi_identity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut worst, mut worst_direct) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (lambda, h) = (rng.random_range(-3.0..3.0), rng.random_range(0.1..2.0));
        let z = c(rng.random_range(-5.0..5.0), rng.random_range(-2.0..2.0));
        let t = rng.random_range(0.05..1.0);
        let (hi, lo) = exact_exponent(lambda, h, z, t);
        let rel = |v: f64| (v / hi.exp() / (1.0 + lo) - 1.0).abs();
        worst = worst.max(rel(xi_abs(lambda, h, z, t)));
        worst_direct = worst_direct.max(rel(xi(c(lambda, h), z, t).unwrap().norm()));
    }
    let anchor = xi_abs(0.0, 1.0, c(0.0, 0.0), 1.0);
    let anchor_err = (anchor - 8f64.exp()).abs() / 8f64.exp();
    (
        worst < 1e-13 && worst_direct < 1e-13 && anchor_err < 1e-13,
        format!(
            "max relative error {worst:.2e} (closed form), {worst_direct:.2e} (complex modulus) over 1000 samples, anchor {anchor} (error {anchor_err:.1e})"
        ),
    )
}

fn main() {
    let mut fd: Vec<(&'static str, f64)> = Vec::new();
    let mut failed = 0;
    let mut run = |id: u32, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let (ok, detail) = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        if !ok {
            failed += 1;
        }
        println!(
            "{} {id:>2} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    };
    run(1, "delta m-function", &mut m_function_delta);
    run(2, "delta reflection coefficient", &mut reflection_delta);
    run(3, "zero reflection", &mut zero_reflection);
    run(4, "unimodular bound suite", &mut unimodular_suite);
    run(5, "strict contraction", &mut strict_contraction);
    run(6, "singular value decay", &mut singular_value_decay);
    run(7, "Nystrom vs Galerkin", &mut discretization_consistency);
    run(8, "cross-solver validation", &mut || cross_solver(&mut fd));
    run(9, "KdV residual", &mut || kdv_residual_check(&mut fd));
    run(10, "natural-solution convergence", &mut || natural_solution(&mut fd));
    run(11, "pole-free certificate", &mut pole_free);
    run(12, "derivative cross-check", &mut || derivative_crosscheck(&fd));
    run(13, "xi identity", &mut xi_identity);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
