//! Weyl–Titchmarsh m-function of `-d^2/dx^2 + q` on the negative half-line.
//!
//! Solutions are propagated in the quasi-derivative variables
//! `Y = (y, y' - Q y)`, which stay continuous across jumps of `r` and obey
//! `Y' = A Y` with `A = [[Q, 1], [-z - Q^2, -Q]]`. On pieces where `q` is
//! constant the transfer matrix is closed form; smooth pieces use a
//! fourth-order Magnus step on an adaptively refined mesh.

use crate::error::{Error, Result};
use crate::profiles::{cos_sinc, r_squared_integral, upper_sqrt, MiuraProfile, NormalizedQ, PieceKind};
use crate::quad;
use num_complex::Complex64;
use std::f64::consts::PI;

type C = Complex64;
type Mat = [[C; 2]; 2];

/// Tuning knobs for m-function evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylOptions {
    /// Relative accuracy target for the mesh and the disk radius.
    pub tol: f64,
    /// Largest `|k|` the smooth-piece meshes must resolve.
    pub k_max: f64,
    /// Largest truncation length tried in disk mode.
    pub l_max: f64,
}

impl Default for WeylOptions {
    fn default() -> Self {
        WeylOptions {
            tol: 1e-12,
            k_max: 40.0,
            l_max: 1e4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Initialized from the exact decaying solution on a constant-`q` tail.
    ExactTail,
    /// Limit-point disk shrinking with the truncation length.
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MValue {
    pub z: C,
    pub m: C,
    pub mode: Mode,
    /// Radius of the last Weyl disk, in disk mode.
    pub disk_radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylDisk {
    pub center: C,
    pub radius: f64,
    pub length: f64,
}

impl WeylDisk {
    pub fn contains(&self, m: C, slack: f64) -> bool {
        (m - self.center).norm() <= self.radius * (1.0 + slack) + slack
    }
}

#[derive(Debug, Clone, Copy)]
enum Cell {
    /// `q = v` on the cell, `Q` affine from `q_left` to `q_right`.
    Exact { len: f64, v: f64, q_left: f64, q_right: f64 },
    /// `Q` sampled at the two Gauss points.
    Magnus { len: f64, q1: f64, q2: f64 },
}

/// Transfer matrix with its entries scaled by `exp(-log_scale)`.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    m: Mat,
    log_scale: f64,
}

fn identity() -> Mat {
    let one = C::new(1.0, 0.0);
    let zero = C::new(0.0, 0.0);
    [[one, zero], [zero, one]]
}

fn mul(a: &Mat, b: &Mat) -> Mat {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

fn max_abs(m: &Mat) -> f64 {
    m.iter()
        .flat_map(|row| row.iter())
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

fn det(m: &Mat) -> C {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

impl Scaled {
    fn identity() -> Self {
        Scaled {
            m: identity(),
            log_scale: 0.0,
        }
    }

    /// `self <- step * self`.
    fn push(&mut self, step: &Mat) {
        self.m = mul(step, &self.m);
        let s = max_abs(&self.m);
        if s > 0.0 && s.is_finite() {
            for row in self.m.iter_mut() {
                for c in row.iter_mut() {
                    *c /= s;
                }
            }
            self.log_scale += s.ln();
        }
    }

    /// Departure of `det` from 1, relative to the cancellation in the
    /// determinant of the scaled matrix.
    fn det_defect(&self) -> f64 {
        let unit = (-2.0 * self.log_scale).exp();
        let d = det(&self.m);
        let size = (self.m[0][0] * self.m[1][1]).norm() + (self.m[0][1] * self.m[1][0]).norm();
        let floor = 1e-13 * size;
        ((d - unit).norm() - floor).max(0.0) / unit
    }
}

/// `exp(Omega)` for traceless `Omega`.
fn exp_traceless(o: &Mat) -> Mat {
    let theta2 = o[0][0] * o[0][0] + o[0][1] * o[1][0];
    let (c, s) = cosh_sinhc(theta2);
    [
        [c + s * o[0][0], s * o[0][1]],
        [s * o[1][0], c + s * o[1][1]],
    ]
}

/// `(cosh(t), sinh(t)/t)` as even functions of `t`, given `t^2`.
fn cosh_sinhc(t2: C) -> (C, C) {
    let t = t2.sqrt();
    if t.norm() < 1e-4 {
        let s = 1.0 + t2 / 6.0 + t2 * t2 / 120.0;
        let c = 1.0 + t2 / 2.0 + t2 * t2 / 24.0;
        (c, s)
    } else {
        (t.cosh(), t.sinh() / t)
    }
}

fn a_matrix(q: f64, z: C) -> Mat {
    [
        [C::new(q, 0.0), C::new(1.0, 0.0)],
        [-z - q * q, C::new(-q, 0.0)],
    ]
}

/// Largest `|Re|` allowed in one exponential before splitting.
const SPLIT_EXPONENT: f64 = 30.0;

impl Cell {
    fn len(&self) -> f64 {
        match *self {
            Cell::Exact { len, .. } | Cell::Magnus { len, .. } => len,
        }
    }

    /// Applies the cell's transfer matrix to `acc`, splitting long exact
    /// cells so no single exponential overflows.
    fn apply(&self, z: C, acc: &mut Scaled) {
        match *self {
            Cell::Exact { len, v, q_left, q_right } => {
                let w2 = z - v;
                let growth = w2.sqrt().im.abs() * len;
                let pieces = ((growth / SPLIT_EXPONENT).ceil() as usize).max(1);
                let sub = len / pieces as f64;
                let (c, s) = cos_sinc(w2, sub);
                for j in 0..pieces {
                    let ql = q_left + (q_right - q_left) * j as f64 / pieces as f64;
                    let qr = q_left + (q_right - q_left) * (j + 1) as f64 / pieces as f64;
                    // G(Q_r) E G(Q_l)^{-1}, G(Q) = [[1, 0], [-Q, 1]]
                    let e10 = -w2 * s;
                    let t00 = c + s * ql;
                    let t01 = s;
                    let t10 = e10 + c * ql - qr * t00;
                    let t11 = c - qr * s;
                    acc.push(&[[t00, t01], [t10, t11]]);
                }
            }
            Cell::Magnus { len, q1, q2 } => {
                let a1 = a_matrix(q1, z);
                let a2 = a_matrix(q2, z);
                let comm = {
                    let p = mul(&a2, &a1);
                    let q = mul(&a1, &a2);
                    [[p[0][0] - q[0][0], p[0][1] - q[0][1]], [p[1][0] - q[1][0], p[1][1] - q[1][1]]]
                };
                let c1 = 0.5 * len;
                let c2 = 3f64.sqrt() * len * len / 12.0;
                let mut o = [[C::new(0.0, 0.0); 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        o[i][j] = c1 * (a1[i][j] + a2[i][j]) + c2 * comm[i][j];
                    }
                }
                // keep the trace exactly zero
                let tr = 0.5 * (o[0][0] + o[1][1]);
                o[0][0] -= tr;
                o[1][1] -= tr;
                let growth = (o[0][0] * o[0][0] + o[0][1] * o[1][0]).sqrt().re.abs();
                if growth > SPLIT_EXPONENT {
                    // halve through repeated squaring of exp(Omega / 2^p)
                    let p = (growth / SPLIT_EXPONENT).log2().ceil() as u32;
                    let f = 0.5f64.powi(p as i32);
                    let small = [[o[0][0] * f, o[0][1] * f], [o[1][0] * f, o[1][1] * f]];
                    let e = exp_traceless(&small);
                    for _ in 0..(1u64 << p) {
                        acc.push(&e);
                    }
                } else {
                    acc.push(&exp_traceless(&o));
                }
            }
        }
    }
}

/// Transfer matrix `[[a, b], [c, d]]` of the quasi-derivative system over
/// `[x_left, x_right]`, mapping `Y(x_left)` to `Y(x_right)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylPropagator {
    pub a: C,
    pub b: C,
    pub c: C,
    pub d: C,
    pub x_left: f64,
    pub x_right: f64,
    pub z: C,
}

impl WeylPropagator {
    pub fn det(&self) -> C {
        self.a * self.d - self.b * self.c
    }
}

/// Initial data at the left end of the propagated region.
#[derive(Debug, Clone, Copy)]
enum Tail {
    /// `q = v` on `(-inf, edge]` and `Q(edge-) = q_edge`.
    Exact { v: f64, q_edge: f64 },
    /// Leftmost piece is smooth and unbounded; its index.
    Smooth,
}

/// Prepared propagation plan for one profile.
#[derive(Debug, Clone)]
pub struct WeylSolver {
    profile: MiuraProfile,
    opts: WeylOptions,
    tail: Tail,
    /// Cells covering `[support_left, 0]`, left to right.
    cells: Vec<Cell>,
}

impl WeylSolver {
    pub fn new(profile: &MiuraProfile, opts: WeylOptions) -> Result<Self> {
        if !(opts.tol > 0.0) || !(opts.k_max > 0.0) || !(opts.l_max > 0.0) {
            return Err(Error::InvalidArgument("Weyl options must be positive".into()));
        }
        let nq = profile.normalized_q()?;
        let pieces = profile.pieces();
        let tail = match pieces[0].kind {
            PieceKind::Riccati { potential, .. } => Tail::Exact {
                v: potential,
                q_edge: nq.right_value(0),
            },
            PieceKind::Smooth { .. } => Tail::Smooth,
        };
        let mut cells = Vec::new();
        for (i, p) in pieces.iter().enumerate().skip(1) {
            cells.extend(piece_cells(profile, nq, i, p.left, p.right, &opts)?);
        }
        Ok(WeylSolver {
            profile: profile.clone(),
            opts,
            tail,
            cells,
        })
    }

    pub fn profile(&self) -> &MiuraProfile {
        &self.profile
    }

    pub fn options(&self) -> &WeylOptions {
        &self.opts
    }

    /// Number of propagation cells between the tail and 0.
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// `m(z)` for `z` off the half-line `[0, inf)`.
    pub fn m(&self, z: C) -> Result<MValue> {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite z = {z}")));
        }
        if z.im == 0.0 && z.re >= 0.0 {
            return Err(Error::OnCut(z));
        }
        if z.im < 0.0 {
            let up = self.m(z.conj())?;
            return Ok(MValue {
                z,
                m: up.m.conj(),
                ..up
            });
        }
        match self.tail {
            Tail::Exact { v, q_edge, .. } => {
                let s = upper_sqrt(z - v);
                Ok(MValue {
                    z,
                    m: self.shoot_from_tail(z, s, q_edge),
                    mode: Mode::ExactTail,
                    disk_radius: None,
                })
            }
            Tail::Smooth => self.m_by_disk(z),
        }
    }

    /// `m(k^2)` with `k` in the closed upper half-plane, `k != 0`. Real `k`
    /// gives the boundary value approached from `Im k > 0`.
    pub fn m_at_k(&self, k: C) -> Result<C> {
        if k.im > 0.0 {
            return Ok(self.m(k * k)?.m);
        }
        if k.im < 0.0 || k == C::new(0.0, 0.0) {
            return Err(Error::InvalidArgument(format!("k = {k} is not in the closed upper half-plane")));
        }
        if k.re < 0.0 {
            return Ok(self.m_at_k(-k)?.conj());
        }
        let z = k * k;
        match self.tail {
            Tail::Exact { v, q_edge, .. } => {
                let d = z.re - v;
                let s = if d > 0.0 {
                    C::new(d.sqrt(), 0.0)
                } else {
                    C::new(0.0, (-d).sqrt())
                };
                Ok(self.shoot_from_tail(z, s, q_edge))
            }
            Tail::Smooth => Err(Error::OnCut(z)),
        }
    }

    fn shoot_from_tail(&self, z: C, s: C, q_edge: f64) -> C {
        let i = C::i();
        // psi = exp(-i s x) on the tail: D psi = (-i s - Q) psi
        let mut y = [C::new(1.0, 0.0), -i * s - q_edge];
        for cell in &self.cells {
            let mut t = Scaled::identity();
            cell.apply(z, &mut t);
            let ny = [
                t.m[0][0] * y[0] + t.m[0][1] * y[1],
                t.m[1][0] * y[0] + t.m[1][1] * y[1],
            ];
            let s = ny[0].norm().max(ny[1].norm());
            y = [ny[0] / s, ny[1] / s];
        }
        -y[1] / y[0]
    }

    /// Transfer matrix over `[x_left, x_right]`, `x_left < x_right <= 0`.
    pub fn propagate(&self, z: C, x_left: f64, x_right: f64) -> Result<WeylPropagator> {
        if !(x_left < x_right) || x_right > 0.0 || !x_left.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bad propagation interval [{x_left}, {x_right}]"
            )));
        }
        let nq = self.profile.normalized_q()?;
        let mut acc = Scaled::identity();
        for (i, p) in self.profile.pieces().iter().enumerate() {
            let a = p.left.max(x_left);
            let b = p.right.min(x_right);
            if a < b {
                for c in piece_cells(&self.profile, nq, i, a, b, &self.opts)? {
                    c.apply(z, &mut acc);
                }
            }
        }
        let defect = acc.det_defect();
        if defect > 1e-8 {
            return Err(Error::DegenerateTransfer(defect));
        }
        let scale = acc.log_scale.exp();
        if !scale.is_finite() {
            return Err(Error::Overflow(acc.log_scale));
        }
        let t = acc.m;
        Ok(WeylPropagator {
            a: t[0][0] * scale,
            b: t[0][1] * scale,
            c: t[1][0] * scale,
            d: t[1][1] * scale,
            x_left,
            x_right,
            z,
        })
    }

    /// Scaled transfer matrix over `[-l, 0]`.
    fn transfer(&self, z: C, l: f64) -> Result<Scaled> {
        let mut acc = Scaled::identity();
        let nq = self.profile.normalized_q()?;
        let pieces = self.profile.pieces();
        let edge = pieces[0].right;
        if -l < edge {
            match pieces[0].kind {
                PieceKind::Riccati { potential, .. } => {
                    let q_right = nq.right_value(0);
                    let len = edge + l;
                    Cell::Exact {
                        len,
                        v: potential,
                        q_left: q_right - potential * len,
                        q_right,
                    }
                    .apply(z, &mut acc);
                }
                PieceKind::Smooth { .. } => {
                    for c in piece_cells(&self.profile, nq, 0, -l, edge, &self.opts)? {
                        c.apply(z, &mut acc);
                    }
                }
            }
            for c in &self.cells {
                c.apply(z, &mut acc);
            }
        } else {
            // -l falls inside the covered region: walk cells from the right
            let mut x = 0.0;
            let mut chosen = Vec::new();
            for c in self.cells.iter().rev() {
                if x - c.len() < -l - 1e-12 {
                    break;
                }
                x -= c.len();
                chosen.push(*c);
            }
            for c in chosen.iter().rev() {
                c.apply(z, &mut acc);
            }
        }
        let defect = acc.det_defect();
        if defect > 1e-8 {
            return Err(Error::DegenerateTransfer(defect));
        }
        Ok(acc)
    }

    /// Weyl disk for the truncated problem on `[-l, 0]`.
    pub fn disk(&self, z: C, l: f64) -> Result<WeylDisk> {
        if z.im <= 0.0 {
            return Err(Error::InvalidArgument("Weyl disk needs Im z > 0".into()));
        }
        if !(l > 0.0) {
            return Err(Error::InvalidArgument("truncation length must be positive".into()));
        }
        let t = self.transfer(z, l)?;
        Ok(disk_from_transfer(&t, l))
    }

    fn m_by_disk(&self, z: C) -> Result<MValue> {
        let mut l = 1.0f64.max(-self.profile.pieces()[0].right + 1.0);
        let mut last = f64::INFINITY;
        while l <= self.opts.l_max {
            let t = self.transfer(z, l)?;
            let d = disk_from_transfer(&t, l);
            last = d.radius;
            // Dirichlet condition at -l
            let m = -t.m[1][1] / t.m[0][1];
            if d.radius <= self.opts.tol * m.norm().max(1.0) {
                return Ok(MValue {
                    z,
                    m,
                    mode: Mode::Disk,
                    disk_radius: Some(d.radius),
                });
            }
            l *= 2.0;
        }
        Err(Error::DiskNotConverged {
            radius: last,
            tol: self.opts.tol,
            l_max: self.opts.l_max,
        })
    }
}

fn disk_from_transfer(t: &Scaled, l: f64) -> WeylDisk {
    // m = -(T10 tau + T11)/(T00 tau + T01), tau real
    let (alpha, beta, gamma, delta) = (-t.m[1][0], -t.m[1][1], t.m[0][0], t.m[0][1]);
    let den = gamma * delta.conj() - gamma.conj() * delta;
    let center = (alpha * delta.conj() - beta * gamma.conj()) / den;
    let radius = (-2.0 * t.log_scale).exp() / den.norm();
    WeylDisk {
        center,
        radius,
        length: l,
    }
}

/// Cells covering `[a, b]` inside piece `i`.
fn piece_cells(
    profile: &MiuraProfile,
    nq: &NormalizedQ,
    i: usize,
    a: f64,
    b: f64,
    opts: &WeylOptions,
) -> Result<Vec<Cell>> {
    let p = &profile.pieces()[i];
    match p.kind {
        PieceKind::Riccati { potential, .. } => {
            let q_right = nq.right_value(i) - potential * (p.right - b);
            let len = b - a;
            Ok(vec![Cell::Exact {
                len,
                v: potential,
                q_left: q_right - potential * len,
                q_right,
            }])
        }
        PieceKind::Smooth { .. } => adaptive_magnus(profile, nq, i, a, b, opts),
    }
}

fn magnus_mesh(
    profile: &MiuraProfile,
    nq: &NormalizedQ,
    i: usize,
    a: f64,
    b: f64,
    n: usize,
) -> Result<Vec<Cell>> {
    let p = &profile.pieces()[i];
    let gl = quad::gauss_legendre(10);
    let sub = |lo: f64, hi: f64| -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        gl.nodes
            .iter()
            .zip(&gl.weights)
            .map(|(&u, &w)| {
                let r = p.r(mid + half * u);
                w * half * r * r
            })
            .sum()
    };
    // int_b^{right} r^2 then accumulate leftwards
    let mut acc = nq.cumulative(i) + r_squared_integral(p, b, p.right)?;
    let len = (b - a) / n as f64;
    let off = len / (2.0 * 3f64.sqrt());
    let mut cells = vec![
        Cell::Magnus {
            len,
            q1: 0.0,
            q2: 0.0
        };
        n
    ];
    for j in (0..n).rev() {
        let lo = a + len * j as f64;
        let hi = if j + 1 == n { b } else { a + len * (j + 1) as f64 };
        let mid = 0.5 * (lo + hi);
        let g1 = mid - off;
        let g2 = mid + off;
        let q1 = p.r(g1) - acc - sub(g1, hi);
        let q2 = p.r(g2) - acc - sub(g2, hi);
        cells[j] = Cell::Magnus { len: hi - lo, q1, q2 };
        acc += sub(lo, hi);
    }
    Ok(cells)
}

fn adaptive_magnus(
    profile: &MiuraProfile,
    nq: &NormalizedQ,
    i: usize,
    a: f64,
    b: f64,
    opts: &WeylOptions,
) -> Result<Vec<Cell>> {
    let probes: Vec<C> = [
        C::new(opts.k_max, 0.5),
        C::new(0.5 * opts.k_max, 0.5),
        C::new(0.0, 1.0),
        C::new(1.0, 0.25),
    ]
    .iter()
    .map(|k| k * k)
    .collect();
    let total = |cells: &[Cell], z: C| {
        let mut acc = Scaled::identity();
        for c in cells {
            c.apply(z, &mut acc);
        }
        acc
    };
    let len = b - a;
    let mut n = ((len * opts.k_max / PI).ceil() as usize).max(8);
    let mut cells = magnus_mesh(profile, nq, i, a, b, n)?;
    let mut prev: Vec<Scaled> = probes.iter().map(|&z| total(&cells, z)).collect();
    let mut change = f64::INFINITY;
    let mut last_change = f64::INFINITY;
    while n <= 1 << 22 {
        n *= 2;
        let finer = magnus_mesh(profile, nq, i, a, b, n)?;
        let next: Vec<Scaled> = probes.iter().map(|&z| total(&finer, z)).collect();
        change = prev
            .iter()
            .zip(&next)
            .map(|(u, v)| relative_change(u, v))
            .fold(0.0, f64::max);
        cells = finer;
        prev = next;
        // a fourth-order method gains a factor 16 per doubling; stalling
        // at a small value means the roundoff floor has been reached
        let stalled = change < 1e-9 && change > 0.25 * last_change;
        last_change = change;
        if change < opts.tol || stalled {
            for t in &prev {
                let d = t.det_defect();
                if d > 1e-8 {
                    return Err(Error::DegenerateTransfer(d));
                }
            }
            return Ok(cells);
        }
    }
    Err(Error::MeshTooCoarse {
        estimate: change,
        tol: opts.tol,
    })
}

fn relative_change(u: &Scaled, v: &Scaled) -> f64 {
    let su = (u.log_scale - v.log_scale).exp();
    let mut diff: f64 = 0.0;
    let mut size: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            diff = diff.max((u.m[r][c] * su - v.m[r][c]).norm());
            size = size.max(v.m[r][c].norm());
        }
    }
    diff / size
}

/// `m(z)` with a fresh solver.
pub fn m_function(profile: &MiuraProfile, z: C, tol: f64) -> Result<MValue> {
    let opts = WeylOptions {
        tol,
        ..WeylOptions::default()
    };
    WeylSolver::new(profile, opts)?.m(z)
}

/// Weyl disk of the problem truncated to `[-l, 0]` with a fresh solver.
pub fn weyl_disk(profile: &MiuraProfile, z: C, l: f64) -> Result<WeylDisk> {
    WeylSolver::new(profile, WeylOptions::default())?.disk(z, l)
}
