//! Large well-conditioned subsystems of decompositions of the identity, John
//! contact points, Dvoretzky–Rogers selections and l∞-cube embeddings, each
//! returned with the measurements that certify it.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// dense kernels read better with explicit indices
#![allow(clippy::needless_range_loop)]

pub mod cube;
pub mod decomposition;
pub mod dvoretzky_rogers;
pub mod error;
pub mod extraction;
pub mod john;
pub mod linalg;
pub mod matrix;
pub mod rng;

pub use cube::{CubeEmbeddingResult, Estimate, GtParams, TalagrandParams, TalagrandResult};
pub use decomposition::{Decomposition, DecompositionFile, SplitPlan};
pub use dvoretzky_rogers::{ClassicalDr, DrResult};
pub use error::{Error, Result};
pub use extraction::{ExtractionParams, SelectionCertificate};
pub use john::{Ellipsoid, JohnResult, PolytopeSpace};
pub use linalg::{SpectralSummary, SystemCertificate};
pub use matrix::{DenseMatrix, DenseVector, MatrixFile};
