use super::{DiscretizationKind, HankelDiscretization, OscillatorySymbol};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::quad::{self, Rule};
use nalgebra::DMatrix;
use num_complex::Complex64;

type C = Complex64;

/// Gauss–Legendre nodes on the half-line with scale `tau`.
pub fn half_line_rule(n: usize, tau: f64) -> Result<Rule> {
    if n < 2 {
        return Err(Error::InvalidArgument("Nyström discretization needs n >= 2".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("half-line scale tau = {tau} must be positive")));
    }
    Ok(quad::half_line(n, tau))
}

/// Largest `h s` kept in a half-line rule; the kernel carries `exp(-h s)`,
/// so dropped rows are below `1e-30` and would only contribute subnormals.
pub const DECAY_CUTOFF: f64 = 75.0;

/// Drops the nodes of `rule` beyond `h s = DECAY_CUTOFF`.
pub fn truncate_for_decay(mut rule: Rule, h: f64) -> Rule {
    let keep = rule.nodes.iter().take_while(|&&s| h * s <= DECAY_CUTOFF).count();
    rule.nodes.truncate(keep);
    rule.weights.truncate(keep);
    rule
}

/// Matrices `sqrt(w_a w_b) F_p(s_a + s_b)` for each requested `p`, where
/// `F_p` is the kernel with the integrand multiplied by `(2 i k)^p`.
///
/// The second value is the largest imaginary part found, relative to the
/// entry scale; for real `x` it is dropped from the returned matrices only
/// by the caller.
pub fn nystrom_matrices(
    sym: &OscillatorySymbol,
    rule: &Rule,
    orders: &[u32],
    exec: Execution,
) -> (Vec<DMatrix<C>>, f64) {
    let n = rule.len();
    let coeffs: Vec<Vec<(C, C)>> = orders.iter().map(|&p| sym.kernel_coefficients(p)).collect();
    let m = sym.samples.len();
    // E[a][j] = sqrt(w_a) exp(i l_j s_a)
    let e: Vec<Vec<C>> = par::map(exec, &rule.nodes, |&s| {
        sym.samples.iter().map(|&(l, _)| (C::i() * l * s).exp()).collect()
    });
    let sw: Vec<f64> = rule.weights.iter().map(|w| w.sqrt()).collect();
    let mag: Vec<f64> = sym.samples.iter().map(|s| s.1.norm()).collect();
    let rows: Vec<(Vec<Vec<C>>, f64)> = par::map_range(exec, n, |a| {
        let mut out = vec![vec![C::new(0.0, 0.0); n]; orders.len()];
        let mut worst: f64 = 0.0;
        let mut prod = vec![C::new(0.0, 0.0); m];
        for b in a..n {
            for j in 0..m {
                prod[j] = e[a][j] * e[b][j];
            }
            let scale: f64 = (0..m).map(|j| mag[j] * prod[j].norm()).sum::<f64>() / (2.0 * std::f64::consts::PI);
            for (o, co) in coeffs.iter().enumerate() {
                let mut acc = C::new(0.0, 0.0);
                for j in 0..m {
                    acc += co[j].1 * prod[j];
                }
                let v = acc * (sw[a] * sw[b]);
                out[o][b] = v;
                if o == 0 && scale > 0.0 {
                    worst = worst.max(acc.im.abs() / scale.max(1.0));
                }
            }
        }
        (out, worst)
    });
    let mut mats: Vec<DMatrix<C>> = orders.iter().map(|_| DMatrix::zeros(n, n)).collect();
    let mut worst: f64 = 0.0;
    for (a, (row, w)) in rows.into_iter().enumerate() {
        worst = worst.max(w);
        for (o, vals) in row.into_iter().enumerate() {
            for b in a..n {
                mats[o][(a, b)] = vals[b];
                mats[o][(b, a)] = vals[b];
            }
        }
    }
    (mats, worst)
}

/// Nyström matrix of the Hankel operator on `n` mapped Gauss–Legendre
/// nodes with half-line scale `tau`.
pub fn build_nystrom(sym: &OscillatorySymbol, n: usize, tau: f64) -> Result<HankelDiscretization> {
    let rule = truncate_for_decay(half_line_rule(n, tau)?, sym.h);
    let (mut mats, imag) = nystrom_matrices(sym, &rule, &[0], Execution::Parallel);
    let mut matrix = mats.remove(0);
    if sym.x.im == 0.0 {
        matrix.iter_mut().for_each(|c| c.im = 0.0);
    }
    Ok(HankelDiscretization {
        kind: DiscretizationKind::Nystrom,
        matrix,
        nodes: rule.nodes,
        weights: rule.weights,
        tail_entry: 0.0,
        imag_residual: if sym.x.im == 0.0 { imag } else { f64::INFINITY },
        x: sym.x,
        t: sym.t,
        h: sym.h,
    })
}
