//! Inverse-scattering solver for the KdV equation with step-like Miura
//! initial data.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dyson;
pub mod error;
pub mod hankel;
pub mod par;
pub mod profiles;
pub mod quad;
pub mod refsolver;
pub mod scattering;
pub mod weyl;

pub use error::{Error, Result};
pub use par::Execution;
pub use profiles::{catalog, evaluate_q, mollify, MiuraProfile, ProfileSpec};
