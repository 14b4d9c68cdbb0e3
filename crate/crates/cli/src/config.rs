//! Run configuration (TOML). Unknown keys are rejected everywhere.

use crate::CliError;
use kdvist_core::dyson::{HPolicy, QOptions};
use kdvist_core::refsolver::CompareOptions;
use kdvist_core::{Execution, ProfileSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Reflection,
    Solve,
    Certify,
    Validate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Used when no subcommand is given on the command line.
    #[serde(default)]
    pub command: Option<Command>,
    pub profile: ProfileSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub reflection: ReflectionConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Explicit points; overrides the uniform grid below.
    pub x: Option<Vec<f64>>,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub t: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            x: None,
            x_min: -4.0,
            x_max: 4.0,
            points: 101,
            t: vec![0.1],
        }
    }
}

impl GridConfig {
    pub fn xs(&self) -> Vec<f64> {
        if let Some(x) = &self.x {
            return x.clone();
        }
        uniform(self.x_min, self.x_max, self.points)
    }
}

pub fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    /// `"auto"` or `{ fixed = value }`.
    pub h: HPolicy,
    pub lambda_nodes: Option<usize>,
    pub lambda_nodes_max: usize,
    pub s_nodes: Option<usize>,
    pub s_nodes_max: usize,
    pub convergence_tol: f64,
    pub table_tol: f64,
    pub fd_step: f64,
    pub t_min: f64,
    pub trapezoid_check: bool,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        let q = QOptions::default();
        NumericsConfig {
            h: q.h,
            lambda_nodes: q.lambda_nodes,
            lambda_nodes_max: q.lambda_nodes_max,
            s_nodes: q.s_nodes,
            s_nodes_max: q.s_nodes_max,
            convergence_tol: q.convergence_tol,
            table_tol: q.table_tol,
            fd_step: q.fd_step,
            t_min: q.t_min,
            trapezoid_check: q.trapezoid_check,
        }
    }
}

impl NumericsConfig {
    pub fn q_options(&self) -> QOptions {
        QOptions {
            h: self.h,
            lambda_nodes: self.lambda_nodes,
            lambda_nodes_max: self.lambda_nodes_max,
            s_nodes: self.s_nodes,
            s_nodes_max: self.s_nodes_max,
            convergence_tol: self.convergence_tol,
            table_tol: self.table_tol,
            fd_step: self.fd_step,
            t_min: self.t_min,
            trapezoid_check: self.trapezoid_check,
            exec: Execution::Parallel,
        }
    }
}

/// Uniform contour `lambda + ih`, `lambda` in `[-lambda_max, lambda_max]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReflectionConfig {
    pub h: f64,
    pub nodes: usize,
    pub lambda_max: f64,
}

impl Default for ReflectionConfig {
    fn default() -> Self {
        ReflectionConfig {
            h: 1.0,
            nodes: 64,
            lambda_max: 8.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    pub seed: u64,
    /// Random points per pointwise invariant.
    pub samples: usize,
    /// Contour height for the singular-value and consistency checks.
    pub h: f64,
    /// Spectral radius is checked on `grid.x` at these times.
    pub t: Vec<f64>,
    pub domain_t: f64,
    pub domain_delta: f64,
    pub domain_samples: usize,
    /// Externally supplied reflection table checked for `|R| <= 1`.
    pub table: Option<PathBuf>,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            seed: 1,
            samples: 100,
            h: 1.0,
            t: vec![0.05, 0.1, 0.5, 1.0],
            domain_t: 0.5,
            domain_delta: 1.0,
            domain_samples: 50,
            table: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidateMode {
    /// `compare` for smooth data, `mollify` otherwise.
    #[default]
    Auto,
    Compare,
    Mollify,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub mode: ValidateMode,
    /// Defaults to 0.05 for `compare` and 0.2 for `mollify`.
    pub t: Option<f64>,
    /// Defaults to `[-5, 5]` for `compare` and `[-3, 3]` for `mollify`.
    pub window: Option<[f64; 2]>,
    pub points: Option<usize>,
    pub n: Vec<u32>,
    pub max_discrepancy: f64,
    pub reference_target: Option<f64>,
    pub dt_start: Option<f64>,
    pub dt_levels: Option<usize>,
    pub k_resolved: Option<f64>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            mode: ValidateMode::Auto,
            t: None,
            window: None,
            points: None,
            n: vec![4, 8, 16],
            max_discrepancy: 1e-4,
            reference_target: None,
            dt_start: None,
            dt_levels: None,
            k_resolved: None,
        }
    }
}

impl ValidateConfig {
    pub fn compare_options(&self) -> CompareOptions {
        let d = CompareOptions::default();
        CompareOptions {
            points: self.points.unwrap_or(d.points),
            target: self.reference_target.unwrap_or(d.target),
            dt_start: self.dt_start.unwrap_or(d.dt_start),
            dt_levels: self.dt_levels.unwrap_or(d.dt_levels),
            k_resolved: self.k_resolved.unwrap_or(d.k_resolved),
            ..d
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Main table; standard output when absent.
    pub path: Option<PathBuf>,
    pub format: Format,
    /// `x q` blocks per time, separated by blank lines (`solve` only).
    pub gnuplot: Option<PathBuf>,
    /// Reflection table in the loadable text format (`reflection` only).
    pub table: Option<PathBuf>,
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{name}` must be positive and finite, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{name}` must be at least {min}, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let g = &self.grid;
        match &g.x {
            Some(x) => {
                at_least("grid.x length", x.len(), 1)?;
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::Config("`grid.x` must be finite".into()));
                }
            }
            None => {
                at_least("grid.points", g.points, 1)?;
                if !(g.x_min.is_finite() && g.x_max.is_finite() && g.x_max >= g.x_min) {
                    return Err(CliError::Config("`grid.x_min` and `grid.x_max` must be finite and ordered".into()));
                }
            }
        }
        at_least("grid.t length", g.t.len(), 1)?;
        for &t in &g.t {
            positive("grid.t", t)?;
        }

        let n = &self.numerics;
        if let HPolicy::Fixed(h) = n.h {
            positive("numerics.h", h)?;
        }
        for (name, v) in [
            ("numerics.convergence_tol", n.convergence_tol),
            ("numerics.table_tol", n.table_tol),
            ("numerics.fd_step", n.fd_step),
            ("numerics.t_min", n.t_min),
        ] {
            positive(name, v)?;
        }
        if let Some(v) = n.lambda_nodes {
            at_least("numerics.lambda_nodes", v, 1)?;
        }
        if let Some(v) = n.s_nodes {
            at_least("numerics.s_nodes", v, 1)?;
        }
        at_least("numerics.lambda_nodes_max", n.lambda_nodes_max, 1)?;
        at_least("numerics.s_nodes_max", n.s_nodes_max, 1)?;

        let r = &self.reflection;
        positive("reflection.h", r.h)?;
        positive("reflection.lambda_max", r.lambda_max)?;
        at_least("reflection.nodes", r.nodes, 2)?;

        let c = &self.certify;
        positive("certify.h", c.h)?;
        positive("certify.domain_t", c.domain_t)?;
        positive("certify.domain_delta", c.domain_delta)?;
        at_least("certify.samples", c.samples, 1)?;
        at_least("certify.domain_samples", c.domain_samples, 1)?;
        for &t in &c.t {
            positive("certify.t", t)?;
        }

        let v = &self.validate;
        if let Some(t) = v.t {
            positive("validate.t", t)?;
        }
        if let Some([a, b]) = v.window {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(CliError::Config("`validate.window` must be finite with a < b".into()));
            }
        }
        if let Some(p) = v.points {
            at_least("validate.points", p, 2)?;
        }
        at_least("validate.n length", v.n.len(), 1)?;
        if v.n.contains(&0) {
            return Err(CliError::Config("`validate.n` entries must be at least 1".into()));
        }
        positive("validate.max_discrepancy", v.max_discrepancy)?;
        for (name, val) in [
            ("validate.reference_target", v.reference_target),
            ("validate.dt_start", v.dt_start),
            ("validate.k_resolved", v.k_resolved),
        ] {
            if let Some(val) = val {
                positive(name, val)?;
            }
        }
        if let Some(l) = v.dt_levels {
            at_least("validate.dt_levels", l, 1)?;
        }
        Ok(())
    }
}
