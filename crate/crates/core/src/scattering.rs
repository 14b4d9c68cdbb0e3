//! Right reflection coefficient `R(k) = (ik - m(k^2)) / (ik + m(k^2))` and
//! cached tables of `R` on horizontal contours `Im k = h`.

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::profiles::MiuraProfile;
use crate::quad::Rule;
use crate::weyl::{WeylOptions, WeylSolver};
use num_complex::Complex64;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex, OnceLock};

type C = Complex64;

/// Slack allowed on `|R| <= 1` before a value is rejected.
pub const UNIT_BOUND_SLACK: f64 = 1e-9;

/// `R(k)` from a prepared solver, `k` in the closed upper half-plane.
pub fn reflection_with(solver: &WeylSolver, k: C) -> Result<C> {
    if solver.profile().is_zero() {
        if k.im < 0.0 {
            return Err(Error::InvalidArgument(format!("k = {k} is below the real axis")));
        }
        return Ok(C::new(0.0, 0.0));
    }
    let m = solver.m_at_k(k)?;
    let ik = C::i() * k;
    let r = (ik - m) / (ik + m);
    let slack = (10.0 * solver.options().tol).max(UNIT_BOUND_SLACK);
    if !(r.norm() <= 1.0 + slack) {
        return Err(Error::ReflectionBound { k, modulus: r.norm() });
    }
    Ok(r)
}

/// `R(k)` with a fresh solver.
pub fn reflection(profile: &MiuraProfile, k: C, tol: f64) -> Result<C> {
    let opts = WeylOptions {
        tol,
        k_max: k.norm().max(1.0),
        ..WeylOptions::default()
    };
    reflection_with(&WeylSolver::new(profile, opts)?, k)
}

/// Samples of `R(lambda_j + i h)` with the weights of the contour rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionTable {
    pub profile_id: String,
    pub h: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub values: Vec<C>,
}

impl ReflectionTable {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Table of zeros on the given rule (the zero profile needs no solves).
    pub fn zeros(profile_id: &str, h: f64, rule: &Rule) -> Self {
        ReflectionTable {
            profile_id: profile_id.to_string(),
            h,
            nodes: rule.nodes.clone(),
            weights: rule.weights.clone(),
            values: vec![C::new(0.0, 0.0); rule.len()],
        }
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max_j |R(-lambda_j + ih) - conj R(lambda_j + ih)|` over node pairs
    /// mirrored about 0; `None` if the node set is not symmetric.
    pub fn symmetry_residual(&self) -> Option<f64> {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let mirror = n - 1 - j;
            if (self.nodes[j] + self.nodes[mirror]).abs() > 1e-12 * self.nodes[j].abs().max(1.0) {
                return None;
            }
            worst = worst.max((self.values[mirror] - self.values[j].conj()).norm());
        }
        Some(worst)
    }

    /// Writes `h`, the node count and one `lambda re im weight` line per
    /// node, all in 17 significant digits.
    pub fn dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# profile {}", self.profile_id)?;
        writeln!(out, "h {:.16e}", self.h)?;
        writeln!(out, "n {}", self.len())?;
        for j in 0..self.len() {
            writeln!(
                out,
                "{:.16e} {:.16e} {:.16e} {:.16e}",
                self.nodes[j], self.values[j].re, self.values[j].im, self.weights[j]
            )?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidArgument(format!("reflection table: {msg}"));
        let mut profile_id = String::new();
        let mut h = None;
        let mut n = None;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut values = Vec::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("# profile ") {
                profile_id = rest.to_string();
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["h", v] => h = Some(v.parse::<f64>().map_err(|_| bad("bad h"))?),
                ["n", v] => n = Some(v.parse::<usize>().map_err(|_| bad("bad n"))?),
                [a, b, c, d] => {
                    let p = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
                    nodes.push(p(a)?);
                    values.push(C::new(p(b)?, p(c)?));
                    weights.push(p(d)?);
                }
                _ => return Err(bad(&format!("unexpected line `{line}`"))),
            }
        }
        let h = h.ok_or_else(|| bad("missing h"))?;
        let n = n.ok_or_else(|| bad("missing n"))?;
        if nodes.len() != n {
            return Err(bad(&format!("expected {n} nodes, found {}", nodes.len())));
        }
        Ok(ReflectionTable {
            profile_id,
            h,
            nodes,
            weights,
            values,
        })
    }
}

/// Evaluates `R` at every `lambda_j + ih` of `rule`.
pub fn build_table(
    profile: &MiuraProfile,
    h: f64,
    rule: &Rule,
    tol: f64,
    exec: Execution,
) -> Result<ReflectionTable> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("contour height h = {h} must be positive")));
    }
    if profile.is_zero() {
        return Ok(ReflectionTable::zeros(profile.id(), h, &rule.clone()));
    }
    let k_max = rule
        .nodes
        .iter()
        .map(|l| l.hypot(h))
        .fold(1.0, f64::max);
    let solver = WeylSolver::new(
        profile,
        WeylOptions {
            tol,
            k_max,
            ..WeylOptions::default()
        },
    )?;
    let n = rule.len();
    // evaluate one node of each mirrored pair and reuse the conjugate, so
    // the symmetry holds exactly
    let symmetric = (0..n).all(|j| rule.nodes[j] == -rule.nodes[n - 1 - j]);
    let half = if symmetric { n.div_ceil(2) } else { n };
    let solve = |j: usize| -> Result<C> {
        let lambda = rule.nodes[n - 1 - j];
        reflection_with(&solver, C::new(lambda, h)).map_err(|e| Error::NodeFailure {
            lambda,
            source: Box::new(e),
        })
    };
    let upper: Vec<Result<C>> = par::map_range(exec, half, solve);
    let mut values = vec![C::new(0.0, 0.0); n];
    for (j, v) in upper.into_iter().enumerate() {
        let v = v?;
        values[n - 1 - j] = v;
        if symmetric {
            values[j] = v.conj();
        }
    }
    if symmetric && n % 2 == 1 {
        // the centre node sits on the imaginary axis, where R is real
        let mid = n / 2;
        values[mid] = C::new(values[mid].re, 0.0);
    }
    Ok(ReflectionTable {
        profile_id: profile.id().to_string(),
        h,
        nodes: rule.nodes.clone(),
        weights: rule.weights.clone(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    profile: String,
    h: u64,
    rule: u64,
    tol: u64,
}

fn rule_hash(rule: &Rule) -> u64 {
    let mut hasher = DefaultHasher::new();
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        x.to_bits().hash(&mut hasher);
        w.to_bits().hash(&mut hasher);
    }
    hasher.finish()
}

type Slot = Arc<OnceLock<Arc<ReflectionTable>>>;

/// Insert-once cache of reflection tables keyed by profile, `h` and rule.
#[derive(Default)]
pub struct TableCache {
    slots: Mutex<HashMap<Key, Slot>>,
}

impl TableCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide cache.
    pub fn global() -> &'static TableCache {
        static CACHE: OnceLock<TableCache> = OnceLock::new();
        CACHE.get_or_init(TableCache::new)
    }

    pub fn len(&self) -> usize {
        self.slots.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.slots.lock().expect("cache lock").clear();
    }

    /// Returns the cached table, building it on first use. Concurrent
    /// callers asking for the same key wait for a single build.
    pub fn get_or_build(
        &self,
        profile: &MiuraProfile,
        h: f64,
        rule: &Rule,
        tol: f64,
        exec: Execution,
    ) -> Result<Arc<ReflectionTable>> {
        let key = Key {
            profile: profile.id().to_string(),
            h: h.to_bits(),
            rule: rule_hash(rule),
            tol: tol.to_bits(),
        };
        let slot = {
            let mut map = self.slots.lock().expect("cache lock");
            map.entry(key.clone()).or_default().clone()
        };
        if let Some(t) = slot.get() {
            return Ok(t.clone());
        }
        // build outside the map lock; a failed build leaves the slot empty
        let table = Arc::new(build_table(profile, h, rule, tol, exec)?);
        Ok(slot.get_or_init(|| table).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::catalog;
    use crate::quad;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn delta_two_at_i_is_minus_half() {
        let p = catalog("delta", &[2.0]).unwrap();
        let r = reflection(&p, c(0.0, 1.0), 1e-12).unwrap();
        assert!((r + 0.5).norm() < 1e-14, "{r}");
    }

    #[test]
    fn zero_profile_reflects_nothing() {
        let p = catalog("zero", &[]).unwrap();
        for k in [c(0.3, 0.1), c(-2.0, 4.0), c(5.0, 0.0)] {
            assert_eq!(reflection(&p, k, 1e-12).unwrap(), c(0.0, 0.0));
        }
    }

    #[test]
    fn box_reflection_matches_closed_form() {
        let p = catalog("positive_box", &[1.0, 1.0]).unwrap();
        let k = c(1.0, 1.0);
        let m = p.closed_form().unwrap().m_of_k(k);
        let want = (C::i() * k - m) / (C::i() * k + m);
        let got = reflection(&p, k, 1e-12).unwrap();
        assert!((got - want).norm() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn real_k_boundary_values() {
        let p = catalog("delta", &[1.0]).unwrap();
        for k in [0.5, -1.5, 3.0] {
            let r = reflection(&p, c(k, 0.0), 1e-12).unwrap();
            let want = 1.0 / (2.0 * C::i() * k - 1.0);
            assert!((r - want).norm() < 1e-13);
        }
    }

    #[test]
    fn table_for_delta_is_exactly_symmetric() {
        let p = catalog("delta", &[1.0]).unwrap();
        let rule = quad::gauss_legendre_on(33, -6.0, 6.0);
        let t = build_table(&p, 1.0, &rule, 1e-12, Execution::Parallel).unwrap();
        assert!(t.symmetry_residual().unwrap() < 1e-12);
        for (l, v) in t.nodes.iter().zip(&t.values) {
            let k = c(*l, 1.0);
            assert!((v - 1.0 / (2.0 * C::i() * k - 1.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn rough_random_table_respects_unit_bound() {
        let p = catalog("rough_random", &[7.0, 8.0, 1.0]).unwrap();
        let rule = quad::gauss_legendre_on(64, -10.0, 10.0);
        let t = build_table(&p, 1.0, &rule, 1e-12, Execution::Parallel).unwrap();
        assert!(t.max_modulus() <= 1.0 + UNIT_BOUND_SLACK);
    }

    #[test]
    fn table_is_independent_of_execution_policy() {
        let p = catalog("positive_box", &[2.0, 0.7]).unwrap();
        let rule = quad::trapezoid(21, -4.0, 4.0);
        let a = build_table(&p, 0.5, &rule, 1e-12, Execution::Sequential).unwrap();
        let b = build_table(&p, 0.5, &rule, 1e-12, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dump_and_load_round_trip() {
        let p = catalog("delta", &[1.0]).unwrap();
        let rule = quad::trapezoid(9, -2.0, 2.0);
        let t = build_table(&p, 0.75, &rule, 1e-12, Execution::Sequential).unwrap();
        let mut buf = Vec::new();
        t.dump(&mut buf).unwrap();
        let back = ReflectionTable::load(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn load_rejects_truncated_file() {
        let text = "h 1.0\nn 3\n0.0 0.0 0.0 1.0\n";
        assert!(ReflectionTable::load(text.as_bytes()).is_err());
    }

    #[test]
    fn cache_builds_once() {
        let cache = TableCache::new();
        let p = catalog("delta", &[1.0]).unwrap();
        let rule = quad::trapezoid(5, -1.0, 1.0);
        let a = cache.get_or_build(&p, 1.0, &rule, 1e-12, Execution::Parallel).unwrap();
        let b = cache.get_or_build(&p, 1.0, &rule, 1e-12, Execution::Parallel).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
        cache.get_or_build(&p, 2.0, &rule, 1e-12, Execution::Parallel).unwrap();
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn mollified_reflection_converges() {
        let p = catalog("delta", &[1.0]).unwrap();
        let ks = [c(0.5, 0.5), c(1.5, 1.0), c(-1.0, 0.7)];
        let mut last = f64::INFINITY;
        for n in [4u32, 8, 16] {
            let m = crate::profiles::mollify(&p, n).unwrap();
            let solver = WeylSolver::new(
                &m,
                WeylOptions {
                    tol: 1e-10,
                    k_max: 3.0,
                    ..WeylOptions::default()
                },
            )
            .unwrap();
            let err = ks
                .iter()
                .map(|&k| (reflection_with(&solver, k).unwrap() - 1.0 / (2.0 * C::i() * k - 1.0)).norm())
                .fold(0.0, f64::max);
            assert!(err < last, "n = {n}: {err}");
            last = err;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn unit_bound_and_reflection_symmetry(
            which in 0usize..5,
            kr in -6.0f64..6.0,
            ki in 0.01f64..4.0,
        ) {
            let p = [
                catalog("delta", &[1.5]).unwrap(),
                catalog("smooth_bump", &[2.0, 0.5]).unwrap(),
                catalog("positive_box", &[1.0, 2.0]).unwrap(),
                catalog("constant_r", &[0.7]).unwrap(),
                catalog("rough_random", &[11.0, 6.0, 1.0]).unwrap(),
            ][which].clone();
            let solver = WeylSolver::new(&p, WeylOptions { k_max: 8.0, ..WeylOptions::default() }).unwrap();
            let k = c(kr, ki);
            let r = reflection_with(&solver, k).unwrap();
            prop_assert!(r.norm() <= 1.0 + 1e-9);
            let mirrored = reflection_with(&solver, -k.conj()).unwrap();
            prop_assert!((mirrored - r.conj()).norm() < 1e-10);
        }
    }
}
