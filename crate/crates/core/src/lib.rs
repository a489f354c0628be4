//! Closed-loop adaptive enhancement for degraded endoscopic images.
//!
//! The agent perceives an image's degradation by matching an embedding
//! against a bank of text templates, picks one of seven enhancement operators
//! and its parameters with a small learned policy, and learns from a reward
//! mixing downstream segmentation Dice with a no-reference quality score.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod bench;
pub mod dataset;
pub mod degrade;
pub mod enhance;
pub mod error;
pub mod eval;
pub mod filter;
pub mod haar;
pub mod image;
pub mod perception;
pub mod policy;

pub use error::{Error, ErrorClass, Result};
