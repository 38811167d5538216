use thiserror::Error;

/// Unified error type for the whole crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Domain parameters fail validation (non-positive radius, axis, or side).
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    /// A star profile dips to a non-positive radius, so the boundary is not
    /// star-shaped with respect to the origin and the polar solver does not apply.
    #[error("profile is not star-shaped: rho({theta:.6}) = {rho:.6e} <= 0")]
    NonStarShaped { theta: f64, rho: f64 },

    /// Boundary condition and domain cannot be combined (e.g. the supported
    /// condition needs a curvature, which a polygon does not have).
    #[error("unsupported combination: {0}")]
    Unsupported(String),

    /// A scalar argument lies outside its admissible range.
    #[error("{name} = {value} out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// Requested resolution would exceed the dense-solver budget.
    #[error("{dof} degrees of freedom exceed the cap of {cap}")]
    DofCapExceeded { dof: usize, cap: usize },

    /// The dense eigensolver failed to converge or produced invalid output.
    #[error("eigensolver failure: {0}")]
    EigenFailure(String),

    /// Mode tracking could not decide between two candidate matches.
    #[error(
        "ambiguous mode match for group {group}: overlaps {first:.6} and {second:.6} \
         differ by less than {tol:.1e}"
    )]
    AmbiguousMatching {
        group: usize,
        first: f64,
        second: f64,
        tol: f64,
    },

    /// A root bracket for a semi-analytic dispersion equation was not found.
    #[error("no root bracket for {context} in [{lo}, {hi}]")]
    RootBracket {
        context: &'static str,
        lo: f64,
        hi: f64,
    },

    /// Key-value configuration text failed to parse.
    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    /// Generic numeric failure with context.
    #[error("{0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
