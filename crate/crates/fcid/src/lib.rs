//! Training-free codebook dimension optimization (TOC) and the fine/coarse
//! cross-modal information-disentanglement model stack (FCID) at desk scale,
//! with oracle-verified quantization, calibrated mutual-information
//! estimators, and an evaluation harness for cross-modal generalization,
//! retrieval, activation analysis, and masked reconstruction.

pub mod error;
pub mod gradcheck;
pub mod nn;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
