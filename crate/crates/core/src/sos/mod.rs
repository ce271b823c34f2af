//! SOS programs compiled to block SDPs through Gram-matrix
//! parameterizations.

mod certificate;
mod check;
mod expr;
mod program;

pub use certificate::{CertTolerance, GramCertificate};
pub use check::{check_sos, SosCheck};
pub use expr::{AffineExpr, PolyExpr, VarId};
pub use program::{half_basis, DecisionPoly, PsdBlock, SosPoly, SosProgram, SosSolution};

use crate::sdp::SdpError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SosError {
    #[error("name '{0}' is already declared")]
    DuplicateName(String),
    #[error("'{0}' has an empty basis")]
    EmptyBasis(String),
    #[error("'{0}' has a repeated monomial in its basis")]
    DuplicateMonomial(String),
    #[error("dimension mismatch: expected {expected} variables, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("expression is not affine in the decisions: product {left} * {right}")]
    Bilinear { left: String, right: String },
    #[error("SOS constraint '{constraint}' has odd degree {degree}")]
    OddDegree { constraint: String, degree: u32 },
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

#[cfg(test)]
mod tests;
