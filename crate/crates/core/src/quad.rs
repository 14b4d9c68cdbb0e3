//! Quadrature rules used across the pipeline.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss–Legendre rule on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1, "Gauss-Legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on the three-term recurrence.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Rule {
    let base = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Rule {
        nodes: base.nodes.iter().map(|&u| mid + half * u).collect(),
        weights: base.weights.iter().map(|&w| w * half).collect(),
    }
}

/// Gauss–Legendre rule pushed onto [0, inf) by `s = tau * u / (1 - u)`,
/// `u` in (0, 1).
pub fn half_line(n: usize, tau: f64) -> Rule {
    let base = gauss_legendre(n);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (&x, &w) in base.nodes.iter().zip(&base.weights) {
        let u = 0.5 * (x + 1.0);
        let one_minus = 1.0 - u;
        nodes.push(tau * u / one_minus);
        weights.push(0.5 * w * tau / (one_minus * one_minus));
    }
    Rule { nodes, weights }
}

/// Gauss–Hermite rule for the weight `exp(-mu^2)`, keeping only nodes with
/// `|mu| <= cut`.
///
/// The returned weights are *scaled*: `weights[k] = w_k * exp(mu_k^2)`, so
/// `sum_k weights[k] * g(mu_k)` approximates `int g(mu) dmu` for integrands
/// `g` that already contain the Gaussian. Scaled weights are computed from
/// the Christoffel function of the orthonormal recurrence, which keeps full
/// relative accuracy for tail nodes.
pub fn gauss_hermite_scaled(n: usize, cut: f64) -> Rule {
    assert!(n >= 1, "Gauss-Hermite needs at least one node");
    let lo = -cut - 1.0;
    let hi = cut + 1.0;
    let below = |x: f64| sturm_count_hermite(n, x);
    let first = below(lo);
    let last = below(hi);
    let mut nodes = Vec::with_capacity(last - first);
    let mut weights = Vec::with_capacity(last - first);
    for k in first..last {
        // k-th smallest root by bisection on the Sturm count, then Newton.
        let (mut a, mut b) = (lo, hi);
        while b - a > 1e-9 {
            let m = 0.5 * (a + b);
            if below(m) > k {
                b = m;
            } else {
                a = m;
            }
        }
        let mut mu = 0.5 * (a + b);
        for _ in 0..20 {
            let (pn, pn1) = hermite_orthonormal(n, mu);
            let d = (2.0 * n as f64).sqrt() * pn1;
            let step = pn / d;
            mu -= step;
            if step.abs() < 1e-16 * mu.abs().max(1.0) {
                break;
            }
        }
        if mu.abs() > cut {
            continue;
        }
        let (_, pn1) = hermite_orthonormal(n, mu);
        nodes.push(mu);
        weights.push(1.0 / (n as f64 * pn1 * pn1));
    }
    Rule { nodes, weights }
}

/// Orthonormal Hermite functions `(p_n(x), p_{n-1}(x)) * exp(-x^2/2)`.
fn hermite_orthonormal(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    // carries the factor exp(-x^2/2), so 1/(n p_{n-1}^2) is the scaled weight
    let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
    for j in 0..n {
        let jf = j as f64;
        let next = (2.0 / (jf + 1.0)).sqrt() * x * cur - (jf / (jf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Number of Hermite roots (Jacobi matrix eigenvalues) below `x`.
fn sturm_count_hermite(n: usize, x: f64) -> usize {
    let mut count = 0;
    let mut d = -x;
    for i in 0..n {
        if i > 0 {
            let beta2 = i as f64 / 2.0;
            d = -x - beta2 / d;
        }
        if d == 0.0 {
            d = -1e-300;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Uniform trapezoid rule with `n` nodes on [a, b] (endpoint weights halved).
pub fn trapezoid(n: usize, a: f64, b: f64) -> Rule {
    assert!(n >= 2, "trapezoid rule needs at least two nodes");
    let step = (b - a) / (n - 1) as f64;
    let nodes = (0..n).map(|i| a + step * i as f64).collect();
    let weights = (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * step } else { step })
        .collect();
    Rule { nodes, weights }
}

/// Adaptive integration of a smooth real function on [a, b].
///
/// Double-exponential quadrature with recursive bisection when the
/// per-panel error estimate misses the target.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    integrate_rec(f, a, b, tol, 0)
}

fn integrate_rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let out = quadrature::double_exponential::integrate(f, a, b, tol);
    if out.error_estimate <= tol && out.integral.is_finite() {
        return Ok(out.integral);
    }
    if depth >= 24 {
        return Err(Error::Quadrature {
            a,
            b,
            estimate: out.error_estimate,
            target: tol,
        });
    }
    let m = 0.5 * (a + b);
    Ok(integrate_rec(f, a, m, 0.5 * tol, depth + 1)? + integrate_rec(f, m, b, 0.5 * tol, depth + 1)?)
}
