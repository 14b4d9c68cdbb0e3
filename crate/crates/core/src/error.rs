use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),

    #[error("invalid parameters for profile `{profile}`: {reason}")]
    InvalidParameter { profile: String, reason: String },

    #[error("quadrature did not reach {target:e} (estimate {estimate:e}) on [{a}, {b}]")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        target: f64,
    },

    #[error("spectral parameter {0} lies on the cut [0, inf)")]
    OnCut(Complex64),

    #[error("Weyl disk radius {radius:e} did not drop below {tol:e} before L = {l_max}")]
    DiskNotConverged { radius: f64, tol: f64, l_max: f64 },

    #[error("transfer matrix is not unimodular (|det - 1| = {0:e})")]
    DegenerateTransfer(f64),

    #[error("mesh too coarse: halving changed the result by {estimate:e} > {tol:e}")]
    MeshTooCoarse { estimate: f64, tol: f64 },

    #[error("reflection coefficient evaluation failed at lambda = {lambda}: {source}")]
    NodeFailure {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("|R| = {modulus} exceeds the unit bound at k = {k}")]
    ReflectionBound { k: Complex64, modulus: f64 },

    #[error("point {k} is within {distance:e} of the integration contour")]
    NearContour { k: Complex64, distance: f64 },

    #[error("exponent {0:e} overflows")]
    Overflow(f64),

    #[error("spectral radius {0} of the discretized operator is not below 1")]
    SpectralRadius(f64),

    #[error("{what} did not converge under node doubling (change {change:e}, target {target:e})")]
    NotConverged {
        what: &'static str,
        change: f64,
        target: f64,
    },

    #[error("no norm certificate at x = {z}: best bound {bound} is not below 1")]
    Uncertified { z: Complex64, bound: f64 },

    #[error("point {0} lies outside the parabolic domain")]
    OutsideDomain(Complex64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("reference solver: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
