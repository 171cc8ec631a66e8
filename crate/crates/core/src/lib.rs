//! Structured functions of bounded variation on planar domains, the singular
//! vertical distance between points, and rigidity checks for equality cases of
//! Steiner's perimeter inequality.

pub mod bv1d;
pub mod bvfield;
pub mod chains;
pub mod connectivity;
pub mod geom;
pub mod sampling;
pub mod steiner;
pub mod svd;

pub use bv1d::{cantor_eval, BVProfile, ProfileBuilder, VariationPart};
pub use bvfield::{CantorChannel, JumpWall, SmoothGrid, StructuredBVField};
pub use chains::{validate_chain, PolygonalChain};
pub use geom::{Domain, Point};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid chain at segment {segment}: {reason}")]
    InvalidChain { segment: usize, reason: String },
    #[error("construction error: {0}")]
    Construction(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invariant breach: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
