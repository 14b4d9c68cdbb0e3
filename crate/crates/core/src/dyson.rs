//! KdV solution `q(x,t) = -2 d^2/dx^2 log det(I + H(x,t))`.
//!
//! The second derivative comes from the trace identity
//! `d^2 log det(I + K) = tr(A K'') - tr((A K')^2)`, `A = (I + K)^{-1}`,
//! with `K'` and `K''` assembled from the same kernel with the integrand
//! multiplied by `2ik` and `(2ik)^2`. A five-point difference of the
//! log-determinant is kept as a cross-check.

use crate::error::{Error, Result};
use crate::hankel::{
    half_line_rule, lambda_rule, norm_bound, nystrom_matrices, optimize_h, pipeline_h, LambdaRule, OscillatorySymbol,
    RuleKind, truncate_for_decay, KERNEL_IMAG_TOL,
};
use crate::par::{self, Execution};
use crate::profiles::MiuraProfile;
use crate::quad::Rule;
use crate::scattering::{ReflectionTable, TableCache};
use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

type C = Complex64;

/// Contour height selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HPolicy {
    /// `pipeline_h` at the leftmost requested point.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QOptions {
    pub h: HPolicy,
    /// Fixed Gauss–Hermite size on the contour; `None` doubles from 64.
    pub lambda_nodes: Option<usize>,
    pub lambda_nodes_max: usize,
    /// Fixed half-line size; `None` doubles from 48.
    pub s_nodes: Option<usize>,
    pub s_nodes_max: usize,
    /// Accepted change in `q` (relative to `max(1, |q|)`) under doubling.
    pub convergence_tol: f64,
    /// Tolerance handed to the reflection-coefficient solver.
    pub table_tol: f64,
    pub fd_step: f64,
    /// Smallest accepted `t`; cost grows like `t^{-1/2}` below it.
    pub t_min: f64,
    /// Also evaluate the probes with a trapezoid contour rule and require
    /// agreement to `1e-9`.
    pub trapezoid_check: bool,
    pub exec: Execution,
}

impl Default for QOptions {
    fn default() -> Self {
        QOptions {
            h: HPolicy::Auto,
            lambda_nodes: None,
            lambda_nodes_max: 4096,
            s_nodes: None,
            s_nodes_max: 768,
            convergence_tol: 1e-10,
            table_tol: 1e-12,
            fd_step: 1e-3,
            t_min: 1e-4,
            trapezoid_check: false,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodesUsed {
    /// Contour nodes inside the window.
    pub lambda: usize,
    pub s: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSample {
    pub x: f64,
    pub t: f64,
    pub q: f64,
    pub logdet: f64,
    /// `norm_bound(x, t, h)` at the contour height used.
    pub norm_bound: f64,
    pub spectral_radius: f64,
    pub fd_crosscheck_error: f64,
    /// Imaginary part dropped from the real-`x` kernel, relative.
    pub imag_residual: f64,
    pub h: f64,
    pub n_used: NodesUsed,
    /// Largest change seen in the last node doubling.
    pub convergence_estimate: f64,
}

/// Sample at complex `x`, inside the region where the norm bound holds.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSample {
    pub z: C,
    pub t: f64,
    pub q: C,
    pub logdet: C,
    /// Smallest `norm_bound(z, t, h)` over `h`; below 1 by construction.
    pub certified_bound: f64,
    pub spectral_radius: f64,
    pub h: f64,
    pub n_used: NodesUsed,
    pub convergence_estimate: f64,
}

/// `log det(I + M)` for symmetric `M`.
pub fn logdet_iplus(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut acc = 0.0;
    for &mu in eig.eigenvalues.iter() {
        if mu <= -1.0 {
            return Err(Error::SpectralRadius(-mu));
        }
        acc += mu.ln_1p();
    }
    Ok(acc)
}

struct Eval {
    q: f64,
    logdet: f64,
    rho: f64,
    imag: f64,
}

struct ComplexEval {
    q: C,
    logdet: C,
    rho: f64,
}

/// Everything shared by evaluations at one `t`: contour height, contour
/// rule, reflection table and half-line rule.
#[derive(Debug, Clone)]
pub struct SolutionContext {
    pub t: f64,
    pub h: f64,
    pub tau: f64,
    pub lambda_rule: LambdaRule,
    pub table: Arc<ReflectionTable>,
    pub s_rule: Rule,
    pub convergence_estimate: f64,
    /// Largest probe disagreement with the trapezoid contour rule, when run.
    pub trapezoid_error: Option<f64>,
    fd_step: f64,
    exec: Execution,
}

impl SolutionContext {
    /// Builds the context for real `x`, converging node counts at `probes`.
    pub fn new(profile: &MiuraProfile, t: f64, probes: &[f64], opts: &QOptions) -> Result<Self> {
        let zs: Vec<C> = probes.iter().map(|&x| C::new(x, 0.0)).collect();
        Self::build(profile, t, &zs, 0.0, opts)
    }

    fn build(profile: &MiuraProfile, t: f64, probes: &[C], im_z: f64, opts: &QOptions) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("t = {t} must be positive")));
        }
        if t < opts.t_min {
            return Err(Error::InvalidArgument(format!(
                "t = {t} is below t_min = {}; raise the limit explicitly",
                opts.t_min
            )));
        }
        if probes.is_empty() {
            return Err(Error::InvalidArgument("no evaluation points".into()));
        }
        let leftmost = probes.iter().copied().fold(probes[0], |a, z| if z.re < a.re { z } else { a });
        let h = match opts.h {
            HPolicy::Auto => pipeline_h(leftmost, t)?,
            HPolicy::Fixed(h) if h > 0.0 => h,
            HPolicy::Fixed(h) => return Err(Error::InvalidArgument(format!("h = {h} must be positive"))),
        };
        let tau = 3.0 / h;
        let table_for = |n: usize, kind: RuleKind| -> Result<(LambdaRule, Arc<ReflectionTable>)> {
            let lr = lambda_rule(im_z, t, h, n, kind)?;
            let table = TableCache::global().get_or_build(profile, h, &lr.rule, opts.table_tol, opts.exec)?;
            Ok((lr, table))
        };
        let mut n = opts.lambda_nodes.unwrap_or(64);
        let (lr, table) = table_for(n, RuleKind::Hermite)?;
        let mut ctx = SolutionContext {
            t,
            h,
            tau,
            lambda_rule: lr,
            table,
            s_rule: truncate_for_decay(half_line_rule(opts.s_nodes.unwrap_or(48), tau)?, h),
            convergence_estimate: 0.0,
            trapezoid_error: None,
            fd_step: opts.fd_step,
            exec: opts.exec,
        };
        let probe_q = |ctx: &SolutionContext| -> Result<Vec<C>> {
            probes.iter().map(|&z| ctx.evaluate_any(z, t)).collect()
        };
        let worst = |a: &[C], b: &[C]| -> f64 {
            a.iter()
                .zip(b)
                .map(|(u, v)| (u - v).norm() / v.norm().max(1.0))
                .fold(0.0, f64::max)
        };

        if profile.is_zero() {
            return Ok(ctx);
        }
        if opts.lambda_nodes.is_none() {
            let mut prev = probe_q(&ctx)?;
            loop {
                if 2 * n > opts.lambda_nodes_max {
                    return Err(Error::NotConverged {
                        what: "contour quadrature",
                        change: ctx.convergence_estimate,
                        target: opts.convergence_tol,
                    });
                }
                n *= 2;
                (ctx.lambda_rule, ctx.table) = table_for(n, RuleKind::Hermite)?;
                let next = probe_q(&ctx)?;
                let change = worst(&prev, &next);
                ctx.convergence_estimate = change;
                prev = next;
                if change < opts.convergence_tol {
                    break;
                }
            }
        }
        if opts.s_nodes.is_none() {
            let mut ns = opts.s_nodes.unwrap_or(48);
            let mut prev = probe_q(&ctx)?;
            loop {
                if 2 * ns > opts.s_nodes_max {
                    return Err(Error::NotConverged {
                        what: "half-line quadrature",
                        change: ctx.convergence_estimate,
                        target: opts.convergence_tol,
                    });
                }
                ns *= 2;
                ctx.s_rule = truncate_for_decay(half_line_rule(ns, tau)?, h);
                let next = probe_q(&ctx)?;
                let change = worst(&prev, &next);
                prev = next;
                if change < opts.convergence_tol {
                    ctx.convergence_estimate = ctx.convergence_estimate.max(change);
                    break;
                }
            }
        }
        if opts.trapezoid_check {
            let base = probe_q(&ctx)?;
            let mut alt = ctx.clone();
            // the trapezoid rule needs many more nodes than Gauss–Hermite
            (alt.lambda_rule, alt.table) = table_for(8 * ctx.table.len().max(64), RuleKind::Trapezoid)?;
            let err = worst(&probe_q(&alt)?, &base);
            ctx.trapezoid_error = Some(err);
            if err > 1e-9 {
                return Err(Error::NotConverged {
                    what: "trapezoid contour cross-check",
                    change: err,
                    target: 1e-9,
                });
            }
        }
        Ok(ctx)
    }

    pub fn n_used(&self) -> NodesUsed {
        NodesUsed {
            lambda: self.table.len(),
            s: self.s_rule.len(),
        }
    }

    fn symbol(&self, x: C, t: f64) -> Result<OscillatorySymbol> {
        OscillatorySymbol::new(x, t, self.table.clone())
    }

    fn evaluate_any(&self, z: C, t: f64) -> Result<C> {
        if z.im == 0.0 {
            Ok(C::new(self.evaluate(z.re, t)?.q, 0.0))
        } else {
            Ok(self.evaluate_complex(z, t)?.q)
        }
    }

    fn evaluate(&self, x: f64, t: f64) -> Result<Eval> {
        let sym = self.symbol(C::new(x, 0.0), t)?;
        if sym.is_zero() {
            return Ok(Eval {
                q: 0.0,
                logdet: 0.0,
                rho: 0.0,
                imag: 0.0,
            });
        }
        let (mats, imag) = nystrom_matrices(&sym, &self.s_rule, &[0, 1, 2], self.exec);
        if imag > 10.0 * KERNEL_IMAG_TOL {
            return Err(Error::NotConverged {
                what: "kernel reality",
                change: imag,
                target: 10.0 * KERNEL_IMAG_TOL,
            });
        }
        let k0 = mats[0].map(|c| c.re);
        let k1 = mats[1].map(|c| c.re);
        let k2 = mats[2].map(|c| c.re);
        let n = k0.nrows();
        let eig = SymmetricEigen::new(k0);
        let rho = eig.eigenvalues.iter().fold(0.0f64, |a, m| a.max(m.abs()));
        if rho >= 1.0 {
            return Err(Error::SpectralRadius(rho));
        }
        let logdet: f64 = eig.eigenvalues.iter().map(|m| m.ln_1p()).sum();
        let v = &eig.eigenvectors;
        let mut scaled = v.clone();
        for (j, mu) in eig.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(1.0 / (1.0 + mu));
        }
        let a = &scaled * v.transpose();
        let ak1 = &a * &k1;
        let tr_ak2 = a.component_mul(&k2).sum();
        let mut tr_sq = 0.0;
        for i in 0..n {
            for j in 0..n {
                tr_sq += ak1[(i, j)] * ak1[(j, i)];
            }
        }
        let q = -2.0 * (tr_ak2 - tr_sq);
        Ok(Eval {
            q: q + 0.0,
            logdet,
            rho,
            imag,
        })
    }

    fn logdet(&self, x: f64, t: f64) -> Result<f64> {
        let sym = self.symbol(C::new(x, 0.0), t)?;
        if sym.is_zero() {
            return Ok(0.0);
        }
        let (mut mats, _) = nystrom_matrices(&sym, &self.s_rule, &[0], self.exec);
        let k = mats.remove(0).map(|c| c.re);
        let n = k.nrows();
        match Cholesky::new(DMatrix::identity(n, n) + &k) {
            Some(ch) => Ok(2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()),
            None => logdet_iplus(&k),
        }
    }

    fn evaluate_complex(&self, z: C, t: f64) -> Result<ComplexEval> {
        let sym = self.symbol(z, t)?;
        if sym.is_zero() {
            return Ok(ComplexEval {
                q: C::new(0.0, 0.0),
                logdet: C::new(0.0, 0.0),
                rho: 0.0,
            });
        }
        let (mats, _) = nystrom_matrices(&sym, &self.s_rule, &[0, 1, 2], self.exec);
        let n = mats[0].nrows();
        let eigs = nalgebra::Schur::new(mats[0].clone())
            .eigenvalues()
            .ok_or_else(|| Error::Solver("complex eigenvalues did not converge".into()))?;
        let rho = eigs.iter().fold(0.0f64, |a, m| a.max(m.norm()));
        if rho >= 1.0 {
            return Err(Error::SpectralRadius(rho));
        }
        let logdet: C = eigs.iter().map(|m| (1.0 + m).ln()).sum();
        let a = (DMatrix::<C>::identity(n, n) + &mats[0])
            .lu()
            .try_inverse()
            .ok_or(Error::SpectralRadius(rho))?;
        let ak1 = &a * &mats[1];
        let tr_ak2: C = (0..n).map(|i| a.row(i).transpose().dot(&mats[2].column(i))).sum();
        let tr_sq: C = (0..n).map(|i| ak1.row(i).transpose().dot(&ak1.column(i))).sum();
        Ok(ComplexEval {
            q: -2.0 * (tr_ak2 - tr_sq),
            logdet,
            rho,
        })
    }

    /// Analytic `q` at `(x, t)`; `t` may differ slightly from the context's.
    pub fn q_at(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.evaluate(x, t)?.q)
    }

    /// Full sample at the context's `t`, including the difference check.
    pub fn sample(&self, x: f64) -> Result<SolutionSample> {
        let t = self.t;
        let e = self.evaluate(x, t)?;
        let d = self.fd_step;
        let fd = if e.logdet == 0.0 && e.q == 0.0 {
            0.0
        } else {
            let l = |s: f64| self.logdet(x + s * d, t);
            let second = (-l(2.0)? + 16.0 * l(1.0)? - 30.0 * e.logdet + 16.0 * l(-1.0)? - l(-2.0)?) / (12.0 * d * d);
            -2.0 * second
        };
        Ok(SolutionSample {
            x,
            t,
            q: e.q,
            logdet: e.logdet,
            norm_bound: norm_bound(C::new(x, 0.0), t, self.h),
            spectral_radius: e.rho,
            fd_crosscheck_error: (e.q - fd).abs(),
            imag_residual: e.imag,
            h: self.h,
            n_used: self.n_used(),
            convergence_estimate: self.convergence_estimate,
        })
    }
}

fn probe_points(xs: &[f64]) -> Vec<f64> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = vec![lo];
    if hi > lo {
        p.push(0.5 * (lo + hi));
        p.push(hi);
    }
    p
}

fn check_points(xs: &[f64]) -> Result<()> {
    if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("x = {x} is not finite")));
    }
    Ok(())
}

/// `q(x, t)` with its diagnostics.
pub fn q_value(profile: &MiuraProfile, x: f64, t: f64, opts: &QOptions) -> Result<SolutionSample> {
    check_points(&[x])?;
    SolutionContext::new(profile, t, &[x], opts)?.sample(x)
}

/// `q` on a list of points sharing one context. Points are evaluated
/// concurrently; per-point failures are returned in place.
pub fn q_grid(profile: &MiuraProfile, xs: &[f64], t: f64, opts: &QOptions) -> Result<Vec<Result<SolutionSample>>> {
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    check_points(xs)?;
    let ctx = SolutionContext::new(profile, t, &probe_points(xs), opts)?;
    Ok(grid_with(&ctx, xs, opts.exec))
}

/// Evaluates `xs` with an existing context.
pub fn grid_with(ctx: &SolutionContext, xs: &[f64], exec: Execution) -> Vec<Result<SolutionSample>> {
    // matrices are assembled sequentially inside each point so the
    // outer fan-out owns the threads
    let mut inner = ctx.clone();
    inner.exec = Execution::Sequential;
    par::map(exec, xs, |&x| inner.sample(x))
}

/// `q` at complex `x`, refused where no `h` gives `norm_bound < 1`.
pub fn q_value_complex(profile: &MiuraProfile, z: C, t: f64, opts: &QOptions) -> Result<ComplexSample> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t = {t} must be positive")));
    }
    let bound = norm_bound(z, t, optimize_h(z, t)?);
    if !(bound < 1.0) {
        return Err(Error::Uncertified { z, bound });
    }
    let ctx = SolutionContext::build(profile, t, &[z], z.im, opts)?;
    let e = ctx.evaluate_complex(z, t)?;
    Ok(ComplexSample {
        z,
        t,
        q: e.q,
        logdet: e.logdet,
        certified_bound: bound,
        spectral_radius: e.rho,
        h: ctx.h,
        n_used: ctx.n_used(),
        convergence_estimate: ctx.convergence_estimate,
    })
}

/// `D(delta, t) = { z : Im^2 z / 12 < delta Re z - delta^2 + (sqrt(delta t) / 4) log(t / delta^3) }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicDomain {
    pub delta: f64,
    pub t: f64,
}

impl ParabolicDomain {
    pub fn new(delta: f64, t: f64) -> Result<Self> {
        if !(delta > 0.0) || !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("need delta > 0 and t > 0 (delta = {delta}, t = {t})")));
        }
        Ok(ParabolicDomain { delta, t })
    }

    /// Contour height paired with the domain, `sqrt(delta / (4t))`.
    pub fn h(&self) -> f64 {
        (self.delta / (4.0 * self.t)).sqrt()
    }

    fn right_side(&self, z: C) -> f64 {
        let (d, t) = (self.delta, self.t);
        d * z.re - d * d + 0.25 * (d * t).sqrt() * (t / (d * d * d)).ln()
    }

    pub fn contains(&self, z: C) -> bool {
        z.im * z.im / 12.0 < self.right_side(z)
    }

    /// Real part of the vertex: members have `Re z` strictly above it.
    pub fn vertex(&self) -> f64 {
        let (d, t) = (self.delta, self.t);
        d - 0.25 * (t / d).sqrt() * (t / (d * d * d)).ln()
    }

    /// Largest `Im z` of a member with the given real part, if any.
    pub fn half_width(&self, re: f64) -> Option<f64> {
        let r = self.right_side(C::new(re, 0.0));
        (r > 0.0).then(|| (12.0 * r).sqrt())
    }

    fn certified_right_side(&self, z: C) -> f64 {
        let (d, t) = (self.delta, self.t);
        let s = (d * t).sqrt();
        d * z.re - d * d + 0.5 * s * (3.0 * std::f64::consts::PI).ln() + 0.25 * s * (d * d * d / t).ln()
    }

    /// Exactly the set where `norm_bound(z, t, h()) < 1`.
    pub fn contains_certified(&self, z: C) -> bool {
        z.im * z.im / 12.0 < self.certified_right_side(z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleFreeSample {
    pub re: f64,
    pub im: f64,
    pub bound: f64,
    /// `1 - bound`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleFreeReport {
    pub profile_id: String,
    pub t: f64,
    pub delta: f64,
    pub h: f64,
    pub samples: Vec<PoleFreeSample>,
    pub all_certified: bool,
}

/// Checks `norm_bound(z, t, sqrt(delta / 4t)) < 1` at each sample of the
/// parabolic domain. The bound only uses `|R| <= 1`, so it holds for every
/// admissible profile.
pub fn pole_free_certificate(profile: &MiuraProfile, t: f64, delta: f64, zs: &[C]) -> Result<PoleFreeReport> {
    let dom = ParabolicDomain::new(delta, t)?;
    if let Some(z) = zs.iter().find(|z| !dom.contains(**z)) {
        return Err(Error::OutsideDomain(*z));
    }
    let h = dom.h();
    let samples: Vec<PoleFreeSample> = zs
        .iter()
        .map(|&z| {
            let bound = norm_bound(z, t, h);
            PoleFreeSample {
                re: z.re,
                im: z.im,
                bound,
                margin: 1.0 - bound,
            }
        })
        .collect();
    Ok(PoleFreeReport {
        profile_id: profile.id().to_string(),
        t,
        delta,
        h,
        all_certified: samples.iter().all(|s| s.bound < 1.0),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub x: f64,
    pub t: f64,
    /// `(dx, dt, residual)` for every step tried.
    pub sequence: Vec<(f64, f64, f64)>,
    pub best_step: f64,
    pub residual: f64,
}

/// Time step paired with a spatial step: `q_t` behaves like `q_xxx`.
pub fn time_step_for(dx: f64) -> f64 {
    dx * dx * dx
}

/// `|q_t - 6 q q_x + q_xxx|` from fourth-order central differences of the
/// analytic `q`, for each spatial step in `steps`; the smallest value is
/// reported as the residual.
pub fn kdv_residual(profile: &MiuraProfile, x: f64, t: f64, steps: &[f64], opts: &QOptions) -> Result<ResidualReport> {
    if steps.is_empty() || steps.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument("need at least one positive step".into()));
    }
    let reach = 3.0 * steps.iter().copied().fold(0.0, f64::max);
    if steps.iter().any(|&s| t - 2.0 * time_step_for(s) <= 0.0) {
        return Err(Error::InvalidArgument(format!("time stencil leaves t > 0 at t = {t}")));
    }
    let ctx = SolutionContext::new(profile, t, &[x - reach, x, x + reach], opts)?;
    let mut sequence = Vec::with_capacity(steps.len());
    for &dx in steps {
        let dt = time_step_for(dx);
        let offsets: Vec<(f64, f64)> = (-3..=3)
            .map(|j| (x + j as f64 * dx, t))
            .chain([-2, -1, 1, 2].into_iter().map(|j| (x, t + j as f64 * dt)))
            .collect();
        let vals: Vec<Result<f64>> = par::map(opts.exec, &offsets, |&(xx, tt)| ctx.q_at(xx, tt));
        let v: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
        let (qx, qt) = (&v[..7], &v[7..]);
        let q = qx[3];
        let dq = (qx[1] - 8.0 * qx[2] + 8.0 * qx[4] - qx[5]) / (12.0 * dx);
        let d3q = (-qx[6] + 8.0 * qx[5] - 13.0 * qx[4] + 13.0 * qx[2] - 8.0 * qx[1] + qx[0]) / (8.0 * dx * dx * dx);
        let dtq = (qt[0] - 8.0 * qt[1] + 8.0 * qt[2] - qt[3]) / (12.0 * dt);
        sequence.push((dx, dt, (dtq - 6.0 * q * dq + d3q).abs()));
    }
    let best = sequence
        .iter()
        .copied()
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .expect("steps is non-empty");
    Ok(ResidualReport {
        x,
        t,
        best_step: best.0,
        residual: best.2,
        sequence,
    })
}
