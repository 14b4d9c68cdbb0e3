//! The Hankel operator with symbol `xi_{x,t}(k) R(k)`, where
//! `xi_{x,t}(k) = exp(i (8 k^3 t + 2 k x))`, realized on the contour
//! `Im k = h`.
//!
//! Two discretizations are provided: a Nyström matrix of the integral
//! operator with kernel `F(s + u)` on the half-line, and a Galerkin matrix
//! in the rational orthonormal basis of the Hardy space of the upper
//! half-plane. They share the contour rule and the reflection table.

mod galerkin;
mod nystrom;

pub use galerkin::build_galerkin;
pub use nystrom::{build_nystrom, half_line_rule, nystrom_matrices, truncate_for_decay, DECAY_CUTOFF};

use crate::error::{Error, Result};
use crate::quad::{self, Rule};
use crate::scattering::ReflectionTable;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

type C = Complex64;

/// Largest exponent accepted before `xi` is reported as overflowing.
const MAX_EXPONENT: f64 = 700.0;

/// `xi_{x,t}(k) = exp(i (8 k^3 t + 2 k x))`.
pub fn xi(k: C, x: C, t: f64) -> Result<C> {
    let e = C::i() * (8.0 * k * k * k * t + 2.0 * k * x);
    if e.re > MAX_EXPONENT {
        return Err(Error::Overflow(e.re));
    }
    Ok(e.exp())
}

/// `|xi_{z,t}(lambda + ih)| = exp(8h^3 t - 2h Re z + Im^2 z / (24ht) - mu^2)`
/// with `mu = sqrt(24ht) lambda + Im z / sqrt(24ht)`. The exponent is
/// evaluated expanded, which avoids the cancellation of the `Im^2 z` terms.
pub fn xi_abs(lambda: f64, h: f64, z: C, t: f64) -> f64 {
    (h * (8.0 * h * h * t - 24.0 * t * lambda * lambda - 2.0 * z.re) - 2.0 * lambda * z.im).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleKind {
    /// Gauss–Hermite in the Gaussian variable of `|xi|`.
    Hermite,
    /// Uniform trapezoid on the same window.
    Trapezoid,
}

/// Half-width of the contour window in standard deviations of `|xi|`.
pub const WINDOW: f64 = 8.0;

/// Quadrature on the contour `lambda + ih` adapted to the Gaussian
/// envelope of `xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRule {
    pub kind: RuleKind,
    pub h: f64,
    pub t: f64,
    /// `Im z` the rule is centred for.
    pub im_z: f64,
    /// Requested node count (Hermite nodes outside the window are dropped).
    pub n: usize,
    pub rule: Rule,
}

/// Builds the contour rule in `mu = sqrt(24ht) lambda + Im z / sqrt(24ht)`,
/// truncated to `|mu| <= 8`. The weights integrate in `lambda` and do not
/// contain the Gaussian.
pub fn lambda_rule(im_z: f64, t: f64, h: f64, n: usize, kind: RuleKind) -> Result<LambdaRule> {
    if !(t > 0.0) || !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("need t > 0 and h > 0 (t = {t}, h = {h})")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("contour rule needs at least one node".into()));
    }
    let a = (24.0 * h * t).sqrt();
    let base = match kind {
        RuleKind::Hermite => {
            let mut r = quad::gauss_hermite_scaled(n, WINDOW);
            symmetrize(&mut r);
            r
        }
        RuleKind::Trapezoid => {
            let n = n.max(2);
            let mut r = quad::trapezoid(n, -WINDOW, WINDOW);
            symmetrize(&mut r);
            r
        }
    };
    let shift = im_z / a;
    let rule = Rule {
        nodes: base.nodes.iter().map(|&mu| (mu - shift) / a).collect(),
        weights: base.weights.iter().map(|&w| w / a).collect(),
    };
    Ok(LambdaRule {
        kind,
        h,
        t,
        im_z,
        n,
        rule,
    })
}

/// Forces exact mirror symmetry of a rule about 0.
fn symmetrize(r: &mut Rule) {
    let n = r.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (r.nodes[j] - r.nodes[i]);
        let w = 0.5 * (r.weights[i] + r.weights[j]);
        r.nodes[i] = -x;
        r.nodes[j] = x;
        r.weights[i] = w;
        r.weights[j] = w;
    }
    if n % 2 == 1 {
        r.nodes[n / 2] = 0.0;
    }
}

/// The symbol `phi = xi_{x,t} R` sampled on the contour.
#[derive(Debug, Clone)]
pub struct OscillatorySymbol {
    pub x: C,
    pub t: f64,
    pub h: f64,
    pub table: Arc<ReflectionTable>,
    /// `(lambda_j + ih, w_j xi(lambda_j + ih) R_j)`.
    samples: Vec<(C, C)>,
}

impl OscillatorySymbol {
    pub fn new(x: C, t: f64, table: Arc<ReflectionTable>) -> Result<Self> {
        let h = table.h;
        if !(t > 0.0) || !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("need t > 0 and h > 0 (t = {t}, h = {h})")));
        }
        let mut samples = Vec::with_capacity(table.len());
        for j in 0..table.len() {
            let l = C::new(table.nodes[j], h);
            let v = if table.values[j] == C::new(0.0, 0.0) {
                C::new(0.0, 0.0)
            } else {
                table.weights[j] * xi(l, x, t)? * table.values[j]
            };
            samples.push((l, v));
        }
        Ok(OscillatorySymbol {
            x,
            t,
            h,
            table,
            samples,
        })
    }

    pub fn real_x(x: f64, t: f64, table: Arc<ReflectionTable>) -> Result<Self> {
        Self::new(C::new(x, 0.0), t, table)
    }

    /// `(lambda_j + ih, w_j xi R_j (2 i (lambda_j + ih))^order / (2 pi))`.
    pub fn kernel_coefficients(&self, order: u32) -> Vec<(C, C)> {
        self.samples
            .iter()
            .map(|&(l, v)| (l, v * (2.0 * C::i() * l).powu(order) / (2.0 * PI)))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|s| s.1 == C::new(0.0, 0.0))
    }

    /// `Phi(k) = -(1 / 2 pi i) int xi R / (lambda - k + ih) d lambda` for
    /// `k` below the contour.
    pub fn phi(&self, k: C) -> Result<C> {
        let distance = self.h - k.im;
        if distance.abs() < 1e-8 {
            return Err(Error::NearContour { k, distance: distance.abs() });
        }
        if distance < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "k = {k} lies above the contour Im k = {}",
                self.h
            )));
        }
        let sum: C = self.samples.iter().map(|&(l, v)| v / (l - k)).sum();
        Ok(-sum / (2.0 * PI * C::i()))
    }

    /// Kernel `F(sigma) = (1/2 pi) int xi R exp(i (lambda + ih) sigma)`.
    pub fn kernel_complex(&self, sigma: f64) -> C {
        self.samples
            .iter()
            .map(|&(l, v)| v * (C::i() * l * sigma).exp())
            .sum::<C>()
            / (2.0 * PI)
    }

    /// `sum_j |w_j xi R_j| exp(-h sigma) / 2 pi`, the size the kernel's
    /// rounding error is measured against.
    pub fn kernel_scale(&self, sigma: f64) -> f64 {
        self.samples.iter().map(|s| s.1.norm()).sum::<f64>() * (-self.h * sigma).exp() / (2.0 * PI)
    }
}

/// Relative size of the imaginary part tolerated in a real-`x` kernel.
pub const KERNEL_IMAG_TOL: f64 = 1e-11;

/// `Phi(k)` for the symbol.
pub fn symbol_phi(sym: &OscillatorySymbol, k: C) -> Result<C> {
    sym.phi(k)
}

/// Real kernel `F(sigma)` for real `x`.
pub fn marchenko_kernel(sym: &OscillatorySymbol, sigma: f64) -> Result<f64> {
    if sigma < 0.0 {
        return Err(Error::InvalidArgument(format!("sigma = {sigma} must be non-negative")));
    }
    if sym.x.im != 0.0 {
        return Err(Error::InvalidArgument("real kernel needs real x".into()));
    }
    let f = sym.kernel_complex(sigma);
    let scale = sym.kernel_scale(sigma).max(1.0);
    if f.im.abs() > KERNEL_IMAG_TOL * scale {
        return Err(Error::NotConverged {
            what: "kernel reality",
            change: f.im.abs(),
            target: KERNEL_IMAG_TOL * scale,
        });
    }
    Ok(f.re)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscretizationKind {
    Nystrom,
    Galerkin,
}

/// Finite matrix approximating the Hankel operator.
#[derive(Debug, Clone)]
pub struct HankelDiscretization {
    pub kind: DiscretizationKind,
    pub matrix: DMatrix<C>,
    /// Nyström nodes and weights on the half-line (empty for Galerkin).
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Largest entry on the last anti-diagonal (Galerkin only).
    pub tail_entry: f64,
    /// Largest imaginary part dropped or present, relative to the entry scale.
    pub imag_residual: f64,
    pub x: C,
    pub t: f64,
    pub h: f64,
}

impl HankelDiscretization {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Real part, when the matrix is real up to `KERNEL_IMAG_TOL`.
    pub fn real_matrix(&self) -> Option<DMatrix<f64>> {
        if self.imag_residual <= KERNEL_IMAG_TOL {
            Some(self.matrix.map(|c| c.re))
        } else {
            None
        }
    }

    pub fn spectral_radius(&self) -> f64 {
        if let Some(m) = self.real_matrix() {
            if m.nrows() == 0 {
                return 0.0;
            }
            let sym = (&m + m.transpose()) * 0.5;
            let eig = nalgebra::SymmetricEigen::new(sym);
            return eig.eigenvalues.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        }
        let schur = nalgebra::Schur::new(self.matrix.clone());
        schur
            .eigenvalues()
            .map(|e| e.iter().fold(0.0f64, |a, v| a.max(v.norm())))
            .unwrap_or(f64::NAN)
    }

    /// `det(I + M)`.
    pub fn det_iplus(&self) -> C {
        let n = self.size();
        (DMatrix::<C>::identity(n, n) + &self.matrix).determinant()
    }
}

/// Singular values in decreasing order.
pub fn singular_values(disc: &HankelDiscretization) -> Vec<f64> {
    if disc.size() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = disc.matrix.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `sqrt(1 / (24 pi h^3 t)) exp(8 h^3 t - 2 h Re z + Im^2 z / (24 h t))`.
pub fn norm_bound(z: C, t: f64, h: f64) -> f64 {
    log_norm_bound(z, t, h).exp()
}

pub fn log_norm_bound(z: C, t: f64, h: f64) -> f64 {
    -0.5 * (24.0 * PI * h * h * h * t).ln() + 8.0 * h * h * h * t - 2.0 * h * z.re
        + z.im * z.im / (24.0 * h * t)
}

/// `(2 pi h)^{-1} int |xi R| d lambda` over the symbol's contour rule.
pub fn table_norm_bound(sym: &OscillatorySymbol) -> f64 {
    let total: f64 = sym.samples.iter().map(|s| s.1.norm()).sum();
    total / (2.0 * PI * sym.h)
}

/// Prefactor `(2 / h) int |xi R| d lambda` of the s-number estimate.
pub fn s_number_prefactor(sym: &OscillatorySymbol) -> f64 {
    let total: f64 = sym.samples.iter().map(|s| s.1.norm()).sum();
    2.0 * total / sym.h
}

/// `h` minimizing `norm_bound(z, t, h)` on `(1e-3, 1e3)`.
///
/// The log of the bound is strictly convex in `h`, so its derivative is
/// increasing and its root is found by bisection in `log h`.
pub fn optimize_h(z: C, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t = {t} must be positive")));
    }
    let dlog = |h: f64| -1.5 / h + 24.0 * h * h * t - 2.0 * z.re - z.im * z.im / (24.0 * h * h * t);
    let (mut lo, mut hi) = (1e-3f64.ln(), 1e3f64.ln());
    if dlog(lo.exp()) >= 0.0 {
        return Ok(lo.exp());
    }
    if dlog(hi.exp()) <= 0.0 {
        return Ok(hi.exp());
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dlog(mid.exp()) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Smallest `h` for which the contour window `|lambda| <= 8 / sqrt(24 h t)`
/// stays within `|lambda| <= 8`.
pub fn resolution_floor_h(t: f64) -> f64 {
    1.0 / (24.0 * t)
}

/// `h` used by the pipeline: the bound-optimal value, raised to the
/// resolution floor when `t` is small.
pub fn pipeline_h(x: C, t: f64) -> Result<f64> {
    Ok(optimize_h(x, t)?.max(resolution_floor_h(t)))
}
