//! Evaluation protocols: bootstrap F1, modality statistics of explanations,
//! the simulated-user trustworthiness protocol and the noise-injection
//! robustness protocol.
//!
//! The protocols are expressed per round so that callers can run rounds in
//! parallel and reduce them in order.

pub mod bootstrap;
pub mod interpret;
pub mod robust;
pub mod trust;

use alloc::string::String;

pub use bootstrap::{bootstrap_f1, f1_score, BootstrapReport, Confusion};
pub use interpret::{modality_distribution, ModalityReport};
pub use robust::{RobustConfig, RobustReport, RobustRound};
pub use trust::{TrustConfig, TrustReport, TrustRound, TrustSubject};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("predictions ({preds}) and gold labels ({golds}) differ in length")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("no predictions to evaluate")]
    Empty,
    #[error("explanation for `{target}` does not match the feature layout")]
    LayoutMismatch { target: String },
    #[error("no test nodes to explain")]
    NoTestNodes,
    #[error("invalid protocol parameter: {0}")]
    InvalidParameter(String),
    #[error("surrogate fit failed for `{0}`")]
    SurrogateFailed(String),
}
