//! Plan-then-seam non-autoregressive table-to-text generation.
//!
//! A single network first copies a content plan out of the source table in
//! one parallel pass, then repeatedly inserts connective words between the
//! plan tokens until the text stops changing.

pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod nnet;
pub mod planner;
pub mod seamer;
pub mod sequence;
pub mod training;

pub use error::{PtsError, Result};
