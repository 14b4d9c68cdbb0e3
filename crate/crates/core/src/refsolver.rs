//! Classical KdV reference solver: Fourier pseudo-spectral in space on a
//! periodic box, ETDRK4 (Cox–Matthews with contour-averaged coefficients)
//! in time.
//!
//! Only meaningful for smooth, compactly supported data.

use crate::dyson::{grid_with, QOptions, SolutionContext};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::profiles::MiuraProfile;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

type C = Complex64;

/// Contour points for the ETDRK4 coefficients.
const CONTOUR_POINTS: usize = 32;

/// Bound on the boundary amplitude and on the relative spectral tail.
pub const CERTIFICATE_TOL: f64 = 1e-10;

/// Grid `x_j = -X + 2X j / N`, `j = 0..N`.
pub fn grid(x_half: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| -x_half + 2.0 * x_half * j as f64 / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub x_half: f64,
    pub n: usize,
    /// Step actually used (the requested one, shortened to land on `times`).
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Largest relative change of `int u` over the run.
    pub mass_drift: f64,
    /// Largest relative change of `int u^2` over the run.
    pub momentum_drift: f64,
    /// Largest modulus in the upper quarter of the resolved band, relative
    /// to the peak mode, over all stored states.
    pub spectral_tail: f64,
    /// Largest `|u|` within 5% of the box edges over all stored states.
    pub boundary_amplitude: f64,
}

impl GridSolution {
    pub fn x(&self) -> Vec<f64> {
        grid(self.x_half, self.n)
    }

    /// Trigonometric interpolant of state `index` at `x`.
    pub fn interpolate(&self, index: usize, xs: &[f64]) -> Vec<f64> {
        let coeffs = forward(&self.states[index]);
        let n = self.n;
        xs.iter()
            .map(|&x| {
                let theta = PI * (x + self.x_half) / self.x_half;
                let mut acc = coeffs[0].re;
                for (j, c) in coeffs.iter().enumerate().take(n / 2).skip(1) {
                    acc += 2.0 * (c * C::from_polar(1.0, theta * j as f64)).re;
                }
                // the Nyquist mode is zeroed by dealiasing
                acc / n as f64
            })
            .collect()
    }

    /// Fails unless the boundary and resolution certificates hold.
    pub fn certify(&self) -> Result<()> {
        if self.boundary_amplitude > CERTIFICATE_TOL {
            return Err(Error::Solver(format!(
                "boundary contamination: |u| = {:e} near the box edge",
                self.boundary_amplitude
            )));
        }
        if self.spectral_tail > CERTIFICATE_TOL {
            return Err(Error::Solver(format!(
                "under-resolved: spectral tail {:e} of the peak mode",
                self.spectral_tail
            )));
        }
        Ok(())
    }
}

fn forward(u: &[f64]) -> Vec<C> {
    let mut buf: Vec<C> = u.iter().map(|&v| C::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

struct Stepper {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `3ik` with the two-thirds mask applied.
    g: Vec<C>,
    e: Vec<C>,
    e2: Vec<C>,
    qc: Vec<C>,
    f1: Vec<C>,
    f2: Vec<C>,
    f3: Vec<C>,
    /// Absorption rate on the grid, empty without a sponge.
    sigma: Vec<f64>,
}

/// Absorbing layer `-sigma(x) u` in the outer `width` of each side of the
/// box, ramping smoothly from 0 to `strength`.
///
/// Dispersive radiation leaves a compact window for good; on a periodic box
/// it would wrap around and come back. The layer removes it before that.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sponge {
    pub width: f64,
    pub strength: f64,
}

impl Sponge {
    pub fn rate(&self, x: f64, x_half: f64) -> f64 {
        let d = (x.abs() - (x_half - self.width)) / self.width;
        if d <= 0.0 {
            0.0
        } else {
            let s = d.min(1.0);
            // C^2 ramp
            self.strength * s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
        }
    }
}

fn wavenumber(j: usize, n: usize, x_half: f64) -> f64 {
    let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
    PI * m / x_half
}

impl Stepper {
    fn new(n: usize, x_half: f64, dt: f64, sponge: Option<Sponge>) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let cut = n / 3;
        let roots: Vec<C> = (0..CONTOUR_POINTS)
            .map(|j| C::from_polar(1.0, 2.0 * PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64))
            .collect();
        let mut s = Stepper {
            n,
            fwd,
            inv,
            g: vec![C::new(0.0, 0.0); n],
            e: vec![C::new(0.0, 0.0); n],
            e2: vec![C::new(0.0, 0.0); n],
            qc: vec![C::new(0.0, 0.0); n],
            f1: vec![C::new(0.0, 0.0); n],
            f2: vec![C::new(0.0, 0.0); n],
            f3: vec![C::new(0.0, 0.0); n],
            sigma: match sponge {
                Some(sp) => grid(x_half, n).iter().map(|&x| sp.rate(x, x_half)).collect(),
                None => Vec::new(),
            },
        };
        for j in 0..n {
            let k = wavenumber(j, n, x_half);
            let index = if j <= n / 2 { j } else { n - j };
            s.g[j] = if index < cut && j != n / 2 { C::new(0.0, 3.0 * k) } else { C::new(0.0, 0.0) };
            // u_t = -u_xxx + 3 (u^2)_x, so the linear symbol is i k^3
            let l = C::new(0.0, k * k * k);
            s.e[j] = (l * dt).exp();
            s.e2[j] = (l * dt * 0.5).exp();
            let (mut q, mut a, mut b, mut c) = (C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0));
            for r in &roots {
                let z = l * dt + r;
                let ez = z.exp();
                let z3 = z * z * z;
                q += ((z * 0.5).exp() - 1.0) / z;
                a += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                b += (2.0 + z + ez * (z - 2.0)) / z3;
                c += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
            }
            let m = CONTOUR_POINTS as f64;
            s.qc[j] = q * dt / m;
            s.f1[j] = a * dt / m;
            s.f2[j] = b * dt / m;
            s.f3[j] = c * dt / m;
        }
        s
    }

    /// `3 ik FFT((IFFT v)^2)`, dealiased, minus `FFT(sigma u)`.
    fn nonlinear(&self, v: &[C], out: &mut [C], scratch: &mut Vec<C>) {
        let n = self.n;
        scratch.clear();
        scratch.extend_from_slice(v);
        self.inv.process(scratch);
        let scale = 1.0 / n as f64;
        if self.sigma.is_empty() {
            for z in scratch.iter_mut() {
                let u = z.re * scale;
                *z = C::new(u * u, 0.0);
            }
            self.fwd.process(scratch);
            for j in 0..n {
                out[j] = self.g[j] * scratch[j];
            }
            return;
        }
        // both real transforms in one: u^2 + i sigma u
        for (z, s) in scratch.iter_mut().zip(&self.sigma) {
            let u = z.re * scale;
            *z = C::new(u * u, s * u);
        }
        self.fwd.process(scratch);
        for j in 0..n {
            let w = scratch[j];
            let m = scratch[(n - j) % n].conj();
            let square = 0.5 * (w + m);
            let damp = (w - m) * C::new(0.0, -0.5);
            out[j] = self.g[j] * square - damp;
        }
    }

    fn step(&self, v: &mut [C], work: &mut Work) {
        let n = self.n;
        let Work { nv, na, nb, nc, a, b, c, scratch } = work;
        self.nonlinear(v, nv, scratch);
        for j in 0..n {
            a[j] = self.e2[j] * v[j] + self.qc[j] * nv[j];
        }
        self.nonlinear(a, na, scratch);
        for j in 0..n {
            b[j] = self.e2[j] * v[j] + self.qc[j] * na[j];
        }
        self.nonlinear(b, nb, scratch);
        for j in 0..n {
            c[j] = self.e2[j] * a[j] + self.qc[j] * (2.0 * nb[j] - nv[j]);
        }
        self.nonlinear(c, nc, scratch);
        for j in 0..n {
            v[j] = self.e[j] * v[j] + nv[j] * self.f1[j] + 2.0 * (na[j] + nb[j]) * self.f2[j] + nc[j] * self.f3[j];
        }
    }
}

struct Work {
    nv: Vec<C>,
    na: Vec<C>,
    nb: Vec<C>,
    nc: Vec<C>,
    a: Vec<C>,
    b: Vec<C>,
    c: Vec<C>,
    scratch: Vec<C>,
}

impl Work {
    fn new(n: usize) -> Self {
        let z = vec![C::new(0.0, 0.0); n];
        Work {
            nv: z.clone(),
            na: z.clone(),
            nb: z.clone(),
            nc: z.clone(),
            a: z.clone(),
            b: z.clone(),
            c: z,
            scratch: Vec::with_capacity(n),
        }
    }
}

fn spectral_tail(v: &[C]) -> f64 {
    let n = v.len();
    let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let (lo, hi) = (n / 4, n / 3);
    let tail = (lo..hi)
        .flat_map(|j| [v[j].norm(), v[n - j].norm()])
        .fold(0.0, f64::max);
    tail / peak
}

fn boundary_amplitude(u: &[f64]) -> f64 {
    let edge = (u.len() / 20).max(1);
    u[..edge].iter().chain(&u[u.len() - edge..]).map(|v| v.abs()).fold(0.0, f64::max)
}

/// Integrates `u_t - 6 u u_x + u_xxx = 0` from `q0` (sampled on
/// [`grid`]`(x_half, q0.len())`) and stores the state at each of `times`.
pub fn solve_classical(q0: &[f64], times: &[f64], x_half: f64, dt: f64) -> Result<GridSolution> {
    solve_with_sponge(q0, times, x_half, dt, None)
}

/// [`solve_classical`] with an optional absorbing layer. With a layer the
/// mass is no longer conserved once radiation reaches it.
pub fn solve_with_sponge(
    q0: &[f64],
    times: &[f64],
    x_half: f64,
    dt: f64,
    sponge: Option<Sponge>,
) -> Result<GridSolution> {
    let n = q0.len();
    if n < 16 || !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("grid size {n} must be a power of two >= 16")));
    }
    if !(x_half > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("need X > 0 and dt > 0 (X = {x_half}, dt = {dt})")));
    }
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) || !(times[0] >= 0.0) {
        return Err(Error::InvalidArgument("output times must be increasing and non-negative".into()));
    }
    if q0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial data is not finite".into()));
    }
    // one uniform step that lands on every output time
    let horizon = *times.last().expect("non-empty");
    let total_steps = (horizon / dt).ceil().max(1.0) as usize;
    let step = if horizon > 0.0 { horizon / total_steps as f64 } else { dt };
    let marks: Vec<usize> = times.iter().map(|t| (t / step).round() as usize).collect();
    for (t, m) in times.iter().zip(&marks) {
        if ((*m as f64) * step - t).abs() > 1e-9 * step.max(*t) {
            return Err(Error::InvalidArgument(format!(
                "output time {t} is not a multiple of the step {step}"
            )));
        }
    }
    if let Some(sp) = sponge {
        if !(sp.width > 0.0 && sp.width < x_half) || !(sp.strength >= 0.0) {
            return Err(Error::InvalidArgument(format!("sponge {sp:?} does not fit the box")));
        }
        // the layer is integrated explicitly
        if sp.strength * step > 2.5 {
            return Err(Error::Solver(format!(
                "sponge strength {} is stiff for dt = {step}",
                sp.strength
            )));
        }
    }
    let stepper = Stepper::new(n, x_half, step, sponge);
    let mut work = Work::new(n);
    let mut v = forward(q0);
    let mass0 = v[0].re;
    let energy = |u: &[f64]| u.iter().map(|x| x * x).sum::<f64>();
    let energy0 = energy(q0);
    let abs_mass = q0.iter().map(|x| x.abs()).sum::<f64>();
    let mut out = GridSolution {
        x_half,
        n,
        dt: step,
        times: times.to_vec(),
        states: Vec::with_capacity(times.len()),
        mass_drift: 0.0,
        momentum_drift: 0.0,
        spectral_tail: 0.0,
        boundary_amplitude: 0.0,
    };
    let mut done = 0;
    let inv = FftPlanner::new().plan_fft_inverse(n);
    for &mark in &marks {
        while done < mark {
            stepper.step(&mut v, &mut work);
            done += 1;
        }
        let mut buf = v.clone();
        inv.process(&mut buf);
        let u: Vec<f64> = buf.iter().map(|z| z.re / n as f64).collect();
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Solver(format!("state blew up before t = {}", mark as f64 * step)));
        }
        if abs_mass > 0.0 {
            out.mass_drift = out.mass_drift.max((v[0].re - mass0).abs() / abs_mass);
            out.momentum_drift = out.momentum_drift.max((energy(&u) - energy0).abs() / energy0);
        }
        out.spectral_tail = out.spectral_tail.max(spectral_tail(&v));
        out.boundary_amplitude = out.boundary_amplitude.max(boundary_amplitude(&u));
        out.states.push(u);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    /// Points across the window.
    pub points: usize,
    /// Accepted self-convergence change of the reference.
    pub target: f64,
    /// Largest wavenumber kept after dealiasing; sets `N` from `X`.
    pub k_resolved: f64,
    /// Coarsest step of the ladder.
    pub dt_start: f64,
    /// Number of step halvings.
    pub dt_levels: usize,
    pub sponge_strength: f64,
    pub exec: Execution,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            points: 201,
            target: 1e-5,
            k_resolved: 150.0,
            dt_start: 4e-6,
            dt_levels: 3,
            sponge_strength: 2.5e5,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRun {
    pub x_half: f64,
    pub n: usize,
    pub dt: f64,
    /// `sup |u - u_fine|` against the finest step on the base box.
    pub change: f64,
    /// `sup |q_dyson - u|`.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub profile_id: String,
    pub t: f64,
    pub xs: Vec<f64>,
    pub q_dyson: Vec<f64>,
    /// Finest reference run.
    pub u_ref: Vec<f64>,
    /// `sup |q_dyson - u_ref|` over the window.
    pub discrepancy: f64,
    /// Last step-halving change plus the box and grid doubling changes.
    pub ref_self_error: f64,
    pub dyson_self_error: f64,
    pub worst_fd_crosscheck: f64,
    /// Step ladder, then box doubling and grid doubling at the finest step.
    pub runs: Vec<RefinementRun>,
}

/// Half-width of the periodic box for data supported in `[-radius, radius]`.
pub fn box_half_width(radius: f64, t: f64) -> f64 {
    (4.0 * (radius + 8.0 * t.sqrt())).ceil()
}

/// Samples `q = r' + r^2` of a smooth profile on the solver grid.
pub fn sample_initial(profile: &MiuraProfile, x_half: f64, n: usize) -> Result<Vec<f64>> {
    grid(x_half, n)
        .into_iter()
        .map(|x| {
            profile
                .q_regular(x)
                .ok_or_else(|| Error::InvalidArgument(format!("profile `{}` has no pointwise q", profile.id())))
        })
        .collect()
}

fn support_radius(profile: &MiuraProfile) -> Result<f64> {
    let left = profile.support_left();
    if !profile.has_smooth_q() || !left.is_finite() || profile.tail_potential() != Some(0.0) {
        return Err(Error::InvalidArgument(format!(
            "profile `{}` does not have smooth compactly supported q",
            profile.id()
        )));
    }
    Ok(left.abs().max(1.0))
}

/// Sup-norm distance between the determinant solution and the reference
/// solver over `window`.
///
/// The reference runs on a periodic box with absorbing edge layers:
/// KdV radiation from data with a slowly decaying spectrum travels at
/// speed `3k^2` and would otherwise wrap around into the window. Its error
/// is estimated from a ladder of step halvings plus one box doubling and
/// one grid doubling at the finest step, all independent runs.
pub fn compare(
    profile: &MiuraProfile,
    t: f64,
    window: (f64, f64),
    q_opts: &QOptions,
    opts: &CompareOptions,
) -> Result<Comparison> {
    if !(t > 0.0) || !(window.1 > window.0) || opts.points < 2 {
        return Err(Error::InvalidArgument("need t > 0, a non-empty window and two points".into()));
    }
    let xs: Vec<f64> = (0..opts.points)
        .map(|i| window.0 + (window.1 - window.0) * i as f64 / (opts.points - 1) as f64)
        .collect();
    if profile.is_zero() {
        let zeros = vec![0.0; xs.len()];
        return Ok(Comparison {
            profile_id: profile.id().to_string(),
            t,
            xs,
            q_dyson: zeros.clone(),
            u_ref: zeros,
            discrepancy: 0.0,
            ref_self_error: 0.0,
            dyson_self_error: 0.0,
            worst_fd_crosscheck: 0.0,
            runs: Vec::new(),
        });
    }
    let radius = support_radius(profile)?.max(window.0.abs()).max(window.1.abs());
    let x_half = box_half_width(radius, t);
    let n_for = |x: f64| ((opts.k_resolved * 3.0 * x / PI).ceil() as usize).next_power_of_two().max(64);
    let n = n_for(x_half);

    let dt_fine = opts.dt_start / (1u64 << opts.dt_levels) as f64;
    let mut ladder: Vec<(f64, usize, f64)> = (0..=opts.dt_levels)
        .map(|i| (x_half, n, opts.dt_start / (1u64 << i) as f64))
        .collect();
    ladder.push((2.0 * x_half, 2 * n, dt_fine));
    ladder.push((x_half, 2 * n, dt_fine));
    let runs: Vec<Result<Vec<f64>>> = par::map(opts.exec, &ladder, |&(xh, nn, dt)| {
        let q0 = sample_initial(profile, xh, nn)?;
        let sponge = Sponge {
            width: 0.25 * xh,
            strength: opts.sponge_strength,
        };
        Ok(solve_with_sponge(&q0, &[t], xh, dt, Some(sponge))?.interpolate(0, &xs))
    });
    let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;

    let ctx = SolutionContext::new(profile, t, &[window.0, 0.5 * (window.0 + window.1), window.1], q_opts)?;
    let samples: Vec<_> = grid_with(&ctx, &xs, opts.exec).into_iter().collect::<Result<_>>()?;
    let q_dyson: Vec<f64> = samples.iter().map(|s| s.q).collect();
    let worst_fd = samples.iter().map(|s| s.fd_crosscheck_error).fold(0.0, f64::max);

    let levels = opts.dt_levels + 1;
    let finest = &runs[levels - 1];
    let step_change = if levels > 1 { sup_diff(finest, &runs[levels - 2]) } else { f64::INFINITY };
    let box_change = sup_diff(&runs[levels], finest);
    let grid_change = sup_diff(&runs[levels + 1], finest);
    let ref_self_error = step_change + box_change + grid_change;
    let report: Vec<RefinementRun> = ladder
        .iter()
        .zip(&runs)
        .map(|(&(xh, nn, dt), u)| RefinementRun {
            x_half: xh,
            n: nn,
            dt,
            change: sup_diff(u, finest),
            discrepancy: sup_diff(u, &q_dyson),
        })
        .collect();
    if !(ref_self_error < opts.target) {
        return Err(Error::NotConverged {
            what: "reference solver",
            change: ref_self_error,
            target: opts.target,
        });
    }
    Ok(Comparison {
        profile_id: profile.id().to_string(),
        t,
        discrepancy: sup_diff(&q_dyson, finest),
        xs,
        u_ref: finest.clone(),
        q_dyson,
        ref_self_error,
        dyson_self_error: ctx.convergence_estimate,
        worst_fd_crosscheck: worst_fd,
        runs: report,
    })
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs several independent reference solves concurrently.
pub fn solve_many(
    runs: &[(Vec<f64>, Vec<f64>, f64, f64)],
    exec: Execution,
) -> Vec<Result<GridSolution>> {
    par::map(exec, runs, |(q0, times, x_half, dt)| solve_classical(q0, times, *x_half, *dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::catalog;

    fn soliton(x: f64, t: f64) -> f64 {
        -2.0 / (x - 4.0 * t).cosh().powi(2)
    }

    #[test]
    fn zero_data_stays_zero() {
        let sol = solve_classical(&vec![0.0; 64], &[0.1, 0.2], 10.0, 0.01).unwrap();
        assert!(sol.states.iter().flatten().all(|&u| u == 0.0));
        assert_eq!(sol.mass_drift, 0.0);
        sol.certify().unwrap();
    }

    #[test]
    fn soliton_is_reproduced() {
        let (x_half, n) = (20.0, 512);
        let q0: Vec<f64> = grid(x_half, n).iter().map(|&x| soliton(x, 0.0)).collect();
        let sol = solve_classical(&q0, &[0.25, 0.5], x_half, 2.5e-4).unwrap();
        let err = sol
            .x()
            .iter()
            .zip(&sol.states[1])
            .map(|(&x, &u)| (u - soliton(x, 0.5)).abs())
            .fold(0.0, f64::max);
        eprintln!("soliton error {err:e}, edge {:e}, tail {:e}", sol.boundary_amplitude, sol.spectral_tail);
        assert!(err < 1e-6, "{err}");
        assert!(sol.mass_drift < 1e-8 && sol.momentum_drift < 1e-8, "{} {}", sol.mass_drift, sol.momentum_drift);
        sol.certify().unwrap();
    }

    #[test]
    fn temporal_order_is_at_least_three_and_a_half() {
        let (x_half, n) = (20.0, 512);
        let xs = grid(x_half, n);
        let q0: Vec<f64> = xs.iter().map(|&x| soliton(x, 0.0)).collect();
        let errs: Vec<f64> = [0.01, 0.005, 0.0025]
            .iter()
            .map(|&dt| {
                let sol = solve_classical(&q0, &[0.5], x_half, dt).unwrap();
                xs.iter().zip(&sol.states[0]).map(|(&x, &u)| (u - soliton(x, 0.5)).abs()).fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            eprintln!("order {order} from {errs:?}");
            assert!(order >= 3.5, "order {order} from {errs:?}");
        }
    }

    #[test]
    fn interpolation_reproduces_grid_values_and_band_limited_data() {
        let (x_half, n) = (10.0, 128);
        let q0: Vec<f64> = grid(x_half, n).iter().map(|&x| (PI * 3.0 * x / x_half).cos()).collect();
        let sol = solve_classical(&q0, &[0.0], x_half, 0.01).unwrap();
        let probe = [0.123, -4.56, 9.9];
        let got = sol.interpolate(0, &probe);
        for (x, g) in probe.iter().zip(got) {
            assert!((g - (PI * 3.0 * x / x_half).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_contamination_is_reported() {
        let (x_half, n) = (10.0, 256);
        let q0: Vec<f64> = grid(x_half, n).iter().map(|&x| soliton(x + 9.5, 0.0)).collect();
        let sol = solve_classical(&q0, &[0.1], x_half, 1e-3).unwrap();
        assert!(matches!(sol.certify(), Err(Error::Solver(_))));
    }

    #[test]
    fn zero_profile_comparison_is_exact() {
        let p = catalog("zero", &[]).unwrap();
        let c = compare(&p, 0.05, (-5.0, 5.0), &QOptions::default(), &CompareOptions::default()).unwrap();
        assert_eq!(c.discrepancy, 0.0);
    }

    #[test]
    fn singular_profiles_are_refused() {
        let p = catalog("delta", &[1.0]).unwrap();
        assert!(compare(&p, 0.05, (-5.0, 5.0), &QOptions::default(), &CompareOptions::default()).is_err());
    }
}
