use super::{DiscretizationKind, HankelDiscretization, OscillatorySymbol};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

type C = Complex64;

/// Galerkin matrix in the basis `e_n(k) = pi^{-1/2} (k - i)^n / (k + i)^{n+1}`.
///
/// Entry `(m, n)` pairs `e_n` with the reflected conjugate of `e_m`; after
/// moving the contour to `Im k = h` it reads
/// `-(1/pi) int phi(l) (l - i)^{m+n} / (l + i)^{m+n+2} d lambda`,
/// `l = lambda + ih`. The matrix is Hankel in `m + n`.
pub fn build_galerkin(sym: &OscillatorySymbol, basis_size: usize) -> Result<HankelDiscretization> {
    if basis_size == 0 {
        return Err(Error::InvalidArgument("Galerkin basis needs at least one element".into()));
    }
    let count = 2 * basis_size - 1;
    let mut g = vec![C::new(0.0, 0.0); count];
    let i = C::i();
    for &(l, v) in &sym.samples {
        if v == C::new(0.0, 0.0) {
            continue;
        }
        let ratio = (l - i) / (l + i);
        let mut term = v / ((l + i) * (l + i));
        for gj in g.iter_mut() {
            *gj += term;
            term *= ratio;
        }
    }
    for gj in g.iter_mut() {
        *gj *= -1.0 / PI;
    }
    let matrix = DMatrix::from_fn(basis_size, basis_size, |m, n| g[m + n]);
    let scale = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let imag = if sym.x.im == 0.0 && scale > 0.0 {
        g.iter().map(|v| v.im.abs()).fold(0.0, f64::max) / scale.max(1.0)
    } else if sym.x.im == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(HankelDiscretization {
        kind: DiscretizationKind::Galerkin,
        matrix,
        nodes: Vec::new(),
        weights: Vec::new(),
        tail_entry: g[count - 1].norm(),
        imag_residual: imag,
        x: sym.x,
        t: sym.t,
        h: sym.h,
    })
}
