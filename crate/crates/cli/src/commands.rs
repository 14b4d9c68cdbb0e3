use crate::config::{uniform, RunConfig, ValidateMode};
use crate::output::{finite, Cell, Table};
use crate::CliError;
use kdvist_core::dyson::{pole_free_certificate, q_grid, ParabolicDomain, SolutionSample};
use kdvist_core::hankel::{
    build_galerkin, build_nystrom, lambda_rule, singular_values, OscillatorySymbol, RuleKind,
};
use kdvist_core::quad::trapezoid;
use kdvist_core::refsolver::compare;
use kdvist_core::scattering::{build_table, reflection_with, ReflectionTable};
use kdvist_core::weyl::{WeylOptions, WeylSolver};
use kdvist_core::{mollify, Execution, MiuraProfile};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::io::BufReader;
use std::sync::Arc;

/// Result of a command: the table to write, an optional gnuplot file and
/// the failure that decides the exit status once everything is written.
pub struct Outcome {
    pub table: Table,
    pub gnuplot: Option<String>,
    pub table_dump: Option<String>,
    pub failure: Option<String>,
}

impl Outcome {
    fn ok(table: Table) -> Self {
        Outcome {
            table,
            gnuplot: None,
            table_dump: None,
            failure: None,
        }
    }
}

pub fn reflection(cfg: &RunConfig, profile: &MiuraProfile) -> Result<Outcome, CliError> {
    let r = &cfg.reflection;
    let rule = trapezoid(r.nodes, -r.lambda_max, r.lambda_max);
    let table = build_table(profile, r.h, &rule, cfg.numerics.table_tol, Execution::Parallel)?;
    let mut out = Table::new("reflection", profile.id(), &["lambda", "h", "re_R", "im_R", "abs_R"]);
    for (lambda, v) in table.nodes.iter().zip(&table.values) {
        out.push(vec![Cell::Num(*lambda), Cell::Num(r.h), Cell::Num(v.re), Cell::Num(v.im), Cell::Num(v.norm())]);
    }
    out.summary.insert("max_abs_R".into(), json!(table.max_modulus()));
    let mut outcome = Outcome::ok(out);
    if cfg.output.table.is_some() {
        let mut buf = Vec::new();
        table.dump(&mut buf)?;
        outcome.table_dump = Some(String::from_utf8(buf).expect("table dump is ASCII"));
    }
    Ok(outcome)
}

pub fn solve(cfg: &RunConfig, profile: &MiuraProfile) -> Result<Outcome, CliError> {
    let xs = cfg.grid.xs();
    let opts = cfg.numerics.q_options();
    let mut out = Table::new(
        "solve",
        profile.id(),
        &["x", "t", "q", "logdet", "norm_bound", "fd_crosscheck_error", "nodes_used", "error"],
    );
    let mut plot = String::new();
    let mut failed = 0usize;
    for (block, &t) in cfg.grid.t.iter().enumerate() {
        let samples: Vec<Result<SolutionSample, String>> = match q_grid(profile, &xs, t, &opts) {
            Ok(v) => v.into_iter().map(|s| s.map_err(|e| e.to_string())).collect(),
            Err(e) => vec![Err(e.to_string()); xs.len()],
        };
        if block > 0 {
            plot.push_str("\n\n");
        }
        plot.push_str(&format!("# t = {}\n# x q\n", crate::output::num(t)));
        for (&x, s) in xs.iter().zip(samples) {
            match s {
                Ok(s) => {
                    out.push(vec![
                        Cell::Num(x),
                        Cell::Num(t),
                        finite(s.q),
                        finite(s.logdet),
                        finite(s.norm_bound),
                        finite(s.fd_crosscheck_error),
                        Cell::Text(format!("{}/{}", s.n_used.lambda, s.n_used.s)),
                        Cell::Empty,
                    ]);
                    plot.push_str(&format!("{} {}\n", crate::output::num(x), crate::output::num(s.q)));
                }
                Err(e) => {
                    failed += 1;
                    let mut row = vec![Cell::Num(x), Cell::Num(t)];
                    row.extend(std::iter::repeat_n(Cell::Empty, 5));
                    row.push(Cell::Text(e.clone()));
                    out.push(row);
                    plot.push_str(&format!("# {} failed: {e}\n", crate::output::num(x)));
                }
            }
        }
    }
    out.summary.insert("failed_points".into(), json!(failed));
    Ok(Outcome {
        table: out,
        gnuplot: Some(plot),
        table_dump: None,
        failure: (failed > 0).then(|| format!("{failed} point(s) failed")),
    })
}

struct Check {
    name: &'static str,
    value: Option<f64>,
    limit: f64,
    /// Distance to the limit on the passing side.
    margin: Option<f64>,
    pass: bool,
    note: String,
}

impl Check {
    fn upper(name: &'static str, value: f64, limit: f64, note: impl Into<String>) -> Self {
        Check {
            name,
            value: Some(value),
            limit,
            margin: Some(limit - value),
            pass: value <= limit,
            note: note.into(),
        }
    }

    fn strict_upper(name: &'static str, value: f64, limit: f64, note: impl Into<String>) -> Self {
        Check {
            pass: value < limit,
            ..Check::upper(name, value, limit, note)
        }
    }

    fn failed(name: &'static str, limit: f64, err: impl ToString) -> Self {
        Check {
            name,
            value: None,
            limit,
            margin: None,
            pass: false,
            note: err.to_string(),
        }
    }
}

fn upper_half_plane(rng: &mut ChaCha8Rng, re: f64, im: f64) -> C {
    C::new(rng.random_range(-re..re), rng.random_range(0.01..im))
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn symbol(profile: &MiuraProfile, x: f64, t: f64, h: f64, tol: f64) -> Result<OscillatorySymbol, CliError> {
    let r = lambda_rule(0.0, t, h, 96, RuleKind::Hermite)?;
    let table = Arc::new(build_table(profile, h, &r.rule, tol, Execution::Parallel)?);
    Ok(OscillatorySymbol::real_x(x, t, table)?)
}

fn pointwise_checks(cfg: &RunConfig, profile: &MiuraProfile, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let c = &cfg.certify;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let solver = WeylSolver::new(
        profile,
        WeylOptions {
            k_max: 8.0,
            ..WeylOptions::default()
        },
    )?;

    let r = &cfg.reflection;
    let contour = build_table(
        profile,
        r.h,
        &trapezoid(r.nodes, -r.lambda_max, r.lambda_max),
        cfg.numerics.table_tol,
        Execution::Parallel,
    )?;
    let (mut r_max, mut sym) = (contour.max_modulus(), contour.symmetry_residual().unwrap_or(0.0));
    for _ in 0..c.samples {
        let k = upper_half_plane(&mut rng, 6.0, 4.0);
        let v = reflection_with(&solver, k)?;
        r_max = r_max.max(v.norm());
        sym = sym.max((reflection_with(&solver, -k.conj())? - v.conj()).norm());
    }
    let mut note = format!("{} random k and {} contour nodes", c.samples, contour.len());
    if let Some(path) = &c.table {
        let file = std::fs::File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let ext = ReflectionTable::load(BufReader::new(file))?;
        r_max = r_max.max(ext.max_modulus());
        note.push_str(&format!(", table file {}", path.display()));
    }
    checks.push(Check::upper("unit_bound", r_max, 1.0 + 1e-9, note));
    checks.push(Check::upper("reflection_symmetry", sym, 1e-10, "|R(-conj k) - conj R(k)|"));

    let left = profile.support_left().clamp(-6.0, -1.0);
    let mut det = 0.0f64;
    for _ in 0..c.samples.min(20) {
        let z = upper_half_plane(&mut rng, 10.0, 5.0);
        let t = solver.propagate(z, left, 0.0)?;
        det = det.max((t.det() - 1.0).norm() / ((t.a * t.d).norm() + (t.b * t.c).norm()));
    }
    checks.push(Check::upper(
        "transfer_determinant",
        det,
        1e-12,
        format!("|det T - 1| / (|ad| + |bc|) on [{left}, 0]"),
    ));

    let mut im_min = f64::INFINITY;
    for _ in 0..c.samples {
        im_min = im_min.min(solver.m(upper_half_plane(&mut rng, 10.0, 5.0))?.m.im);
    }
    checks.push(Check {
        name: "herglotz",
        value: Some(im_min),
        limit: 0.0,
        margin: Some(im_min),
        pass: im_min > 0.0,
        note: "min Im m(z) over random z in the upper half-plane".into(),
    });
    Ok(())
}

fn spectral_radius_check(cfg: &RunConfig, profile: &MiuraProfile) -> Check {
    let xs = cfg.grid.xs();
    let opts = cfg.numerics.q_options();
    let mut worst = 0.0f64;
    for &t in &cfg.certify.t {
        let samples = match q_grid(profile, &xs, t, &opts) {
            Ok(s) => s,
            Err(e) => return Check::failed("spectral_radius", 1.0, format!("t = {t}: {e}")),
        };
        for (x, s) in xs.iter().zip(samples) {
            match s {
                Ok(s) => worst = worst.max(s.spectral_radius),
                Err(e) => return Check::failed("spectral_radius", 1.0, format!("(x, t) = ({x}, {t}): {e}")),
            }
        }
    }
    Check::strict_upper(
        "spectral_radius",
        worst,
        1.0,
        format!("{} x {} samples", xs.len(), cfg.certify.t.len()),
    )
}

fn decay_check(cfg: &RunConfig, profile: &MiuraProfile) -> Result<Check, CliError> {
    let h = cfg.certify.h;
    let limit = -h / 2.0 + 0.1;
    let sym = symbol(profile, 0.0, 1.0, h, cfg.numerics.table_tol)?;
    let s = singular_values(&build_nystrom(&sym, 80, 3.0)?);
    let floor = 1e-13 * s.first().copied().unwrap_or(0.0);
    let pts: Vec<(f64, f64)> = s
        .iter()
        .enumerate()
        .take_while(|(_, v)| **v > floor && **v > 0.0)
        .map(|(n, v)| (n as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return Ok(Check {
            name: "singular_value_decay",
            value: None,
            limit,
            margin: None,
            pass: true,
            note: format!("vacuous: {} singular value(s) above the floor", pts.len()),
        });
    }
    Ok(Check::upper(
        "singular_value_decay",
        least_squares_slope(&pts),
        limit,
        format!("slope of log s_n over {} values, x = 0, t = 1, h = {h}", pts.len()),
    ))
}

fn consistency_check(cfg: &RunConfig, profile: &MiuraProfile) -> Result<Check, CliError> {
    let mut worst = 0.0f64;
    for (x, t) in [(0.0, 1.0), (1.0, 0.5), (-1.0, 1.0)] {
        let sym = symbol(profile, x, t, cfg.certify.h, cfg.numerics.table_tol)?;
        let dn = build_nystrom(&sym, 80, 3.0)?.det_iplus();
        let dg = build_galerkin(&sym, 30)?.det_iplus();
        worst = worst.max((dn - dg).norm() / dn.norm());
    }
    Ok(Check::upper(
        "determinant_consistency",
        worst,
        1e-6,
        "Nystrom vs Galerkin det(I + H), relative",
    ))
}

fn pole_free_check(cfg: &RunConfig, profile: &MiuraProfile) -> Result<Check, CliError> {
    let c = &cfg.certify;
    let dom = ParabolicDomain::new(c.domain_delta, c.domain_t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed.wrapping_add(1));
    let v = dom.vertex();
    let mut zs = Vec::with_capacity(c.domain_samples);
    while zs.len() < c.domain_samples {
        let re = rng.random_range(v..v + 8.0);
        if let Some(w) = dom.half_width(re) {
            zs.push(C::new(re, rng.random_range(-w..=w) * (1.0 - 1e-12)));
        }
    }
    let rep = pole_free_certificate(profile, c.domain_t, c.domain_delta, &zs)?;
    let worst = rep.samples.iter().map(|s| s.bound).fold(0.0, f64::max);
    Ok(Check::strict_upper(
        "pole_free",
        worst,
        1.0,
        format!(
            "norm bound at {} samples of D(delta = {}, t = {}), h = {}",
            zs.len(),
            c.domain_delta,
            c.domain_t,
            rep.h
        ),
    ))
}

pub fn certify(cfg: &RunConfig, profile: &MiuraProfile) -> Result<Outcome, CliError> {
    let mut checks = Vec::new();
    if let Err(e) = pointwise_checks(cfg, profile, &mut checks) {
        if let CliError::Config(_) = e {
            return Err(e);
        }
        checks.push(Check::failed("pointwise", 0.0, e));
    }
    checks.push(spectral_radius_check(cfg, profile));
    checks.push(decay_check(cfg, profile).unwrap_or_else(|e| Check::failed("singular_value_decay", 0.0, e)));
    checks.push(consistency_check(cfg, profile).unwrap_or_else(|e| Check::failed("determinant_consistency", 1e-6, e)));
    checks.push(pole_free_check(cfg, profile).unwrap_or_else(|e| Check::failed("pole_free", 1.0, e)));

    let mut out = Table::new("certify", profile.id(), &["invariant", "value", "limit", "margin", "status", "note"]);
    let mut failed = Vec::new();
    for c in &checks {
        if !c.pass {
            failed.push(c.name);
        }
        out.push(vec![
            Cell::Text(c.name.into()),
            c.value.map_or(Cell::Empty, finite),
            Cell::Num(c.limit),
            c.margin.map_or(Cell::Empty, finite),
            Cell::Text(if c.pass { "PASS" } else { "FAIL" }.into()),
            Cell::Text(c.note.clone()),
        ]);
    }
    out.summary.insert("failed".into(), json!(failed));
    Ok(Outcome {
        failure: (!failed.is_empty()).then(|| format!("failed invariants: {}", failed.join(", "))),
        ..Outcome::ok(out)
    })
}

pub fn validate(cfg: &RunConfig, profile: &MiuraProfile) -> Result<Outcome, CliError> {
    let v = &cfg.validate;
    let mode = match v.mode {
        ValidateMode::Auto if profile.has_smooth_q() => ValidateMode::Compare,
        ValidateMode::Auto => ValidateMode::Mollify,
        m => m,
    };
    match mode {
        ValidateMode::Compare => validate_compare(cfg, profile),
        _ => validate_mollify(cfg, profile),
    }
}

fn validate_compare(cfg: &RunConfig, profile: &MiuraProfile) -> Result<Outcome, CliError> {
    let v = &cfg.validate;
    let t = v.t.unwrap_or(0.05);
    let [a, b] = v.window.unwrap_or([-5.0, 5.0]);
    let cmp = compare(profile, t, (a, b), &cfg.numerics.q_options(), &v.compare_options())?;
    let mut out = Table::new(
        "validate",
        profile.id(),
        &["x_half", "grid_points", "dt", "self_change", "discrepancy"],
    );
    for r in &cmp.runs {
        out.push(vec![
            Cell::Num(r.x_half),
            Cell::Int(r.n as u64),
            Cell::Num(r.dt),
            finite(r.change),
            finite(r.discrepancy),
        ]);
    }
    if cmp.runs.is_empty() {
        // nothing to refine (zero data): report the discrepancy itself
        out.push(vec![Cell::Empty, Cell::Empty, Cell::Empty, Cell::Num(0.0), finite(cmp.discrepancy)]);
    }
    let ladder: Vec<f64> = cmp
        .runs
        .iter()
        .take_while(|r| r.x_half == cmp.runs[0].x_half && r.n == cmp.runs[0].n)
        .map(|r| r.discrepancy)
        .collect();
    let decreasing = ladder.windows(2).all(|w| w[1] < w[0]);
    for (k, val) in [
        ("discrepancy", json!(cmp.discrepancy)),
        ("reference_self_error", json!(cmp.ref_self_error)),
        ("determinant_self_error", json!(cmp.dyson_self_error)),
        ("worst_fd_crosscheck", json!(cmp.worst_fd_crosscheck)),
        ("t", json!(t)),
        ("window", json!([a, b])),
    ] {
        out.summary.insert(k.into(), val);
    }
    eprintln!(
        "discrepancy {:.3e} (reference self-error {:.3e}, determinant self-error {:.3e})",
        cmp.discrepancy, cmp.ref_self_error, cmp.dyson_self_error
    );
    let failure = if !decreasing {
        Some("discrepancy does not decrease under step refinement".to_string())
    } else if cmp.discrepancy >= v.max_discrepancy {
        Some(format!("discrepancy {:e} exceeds {:e}", cmp.discrepancy, v.max_discrepancy))
    } else {
        None
    };
    Ok(Outcome {
        failure,
        ..Outcome::ok(out)
    })
}

fn grid_values(profile: &MiuraProfile, xs: &[f64], t: f64, cfg: &RunConfig) -> Result<Vec<SolutionSample>, CliError> {
    Ok(q_grid(profile, xs, t, &cfg.numerics.q_options())?
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?)
}

fn validate_mollify(cfg: &RunConfig, profile: &MiuraProfile) -> Result<Outcome, CliError> {
    let v = &cfg.validate;
    let t = v.t.unwrap_or(0.2);
    let [a, b] = v.window.unwrap_or([-3.0, 3.0]);
    let xs = uniform(a, b, v.points.unwrap_or(61));
    let base = grid_values(profile, &xs, t, cfg)?;
    let mut out = Table::new("validate", profile.id(), &["n", "sup_discrepancy", "fd_crosscheck_error"]);
    let mut sups = Vec::new();
    for &n in &v.n {
        let g = grid_values(&mollify(profile, n)?, &xs, t, cfg)?;
        let sup = g.iter().zip(&base).map(|(p, q)| (p.q - q.q).abs()).fold(0.0, f64::max);
        let fd = g.iter().map(|s| s.fd_crosscheck_error).fold(0.0, f64::max);
        out.push(vec![Cell::Int(n as u64), finite(sup), finite(fd)]);
        sups.push(sup);
    }
    out.summary.insert("t".into(), json!(t));
    out.summary.insert("window".into(), json!([a, b]));
    let decreasing = sups.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0));
    Ok(Outcome {
        failure: (!decreasing).then(|| "sup discrepancy is not decreasing in n".to_string()),
        ..Outcome::ok(out)
    })
}
