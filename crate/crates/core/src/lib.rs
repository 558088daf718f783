//! Upper bounds on one-way secret-key rates of QKD protocols from the best
//! decomposition of compatible states into symmetric-extendible and
//! non-extendible parts.

pub mod bounds;
pub mod error;
pub mod extendibility;
pub mod hermitian_ops;
pub mod infotheory;
pub mod linalg;
pub mod protocols;
pub mod quantum;
pub mod sdp;

pub use error::{Error, Result};
pub use extendibility::{best_extendible_decomposition, is_extendible, ExtendibilityResult};
pub use hermitian_ops::{build_basis, CoefficientVector, OperatorBasis};
pub use protocols::{Direction, EquivalenceClassSpec, ObservedData, Povm, ProtocolKind, ProtocolSpec};
pub use quantum::DensityOperator;
pub use sdp::{SdpProblem, SdpSettings, SdpSolution, SdpStatus};
