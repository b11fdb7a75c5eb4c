//! Multi-view canonical correlation analysis for question/answer ranking.
//!
//! The crate learns joint linear projections between two or more feature
//! views (answers, questions and optionally images), ranks candidate answers
//! by the cosine of centred embeddings, and provides the usual retrieval
//! metrics plus an Otsu-threshold analysis of per-question score
//! distributions.

pub mod cca;
pub mod dataio;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod ranking;

pub use cca::{CcaConfig, CcaModel, Ridge, ViewSpec};
pub use error::{Error, Result};
pub use linalg::Matrix;
