//! Numerical laboratory for bi-Laplacian plate eigenproblems.

pub mod discretize;
pub mod eigensolve;
pub mod elasticity;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod identities;
pub mod oracles;
pub mod scalar;
pub mod traces;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision aliases for the main entry types.
pub type DomainSpec64 = geometry::DomainSpec<f64>;
pub type BcKind64 = discretize::BcKind<f64>;
pub type EigenPair64 = eigensolve::EigenPair<f64>;
pub type BoundaryTrace64 = traces::BoundaryTrace<f64>;
pub type Material64 = elasticity::Material<f64>;

/// Single-precision variants. The solver's floor-aware residual
/// certification widens automatically to what f32 can resolve; expect
/// roughly three significant digits from a fourth-order pencil.
pub type DomainSpec32 = geometry::DomainSpec<f32>;
pub type BcKind32 = discretize::BcKind<f32>;
pub type EigenPair32 = eigensolve::EigenPair<f32>;
pub type BoundaryTrace32 = traces::BoundaryTrace<f32>;
pub type Material32 = elasticity::Material<f32>;
