//! Sparse multivariate polynomial arithmetic over `f64`: the common currency
//! for dynamics, value functions, barriers and rewards.

mod matrix;
mod monomial;
mod polynomial;
mod region;
mod text;

pub use matrix::{dot, quadratic_form, PolyMatrix};
pub use monomial::{monomial_basis, Monomial};
pub use polynomial::{monomial_moment, Polynomial, DROP_TOL};
pub use region::BoxRegion;
pub use text::parse_polynomial;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid box: variable {var} has lo={lo} > hi={hi}")]
    InvalidBox { var: usize, lo: f64, hi: f64 },
    #[error("cannot parse polynomial '{input}': {message}")]
    Parse { input: String, message: String },
}
