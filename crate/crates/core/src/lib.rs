//! Parallel sentence extraction with a siamese bidirectional recurrent
//! classifier, plus a lexical-alignment baseline and evaluation tooling.

pub mod baseline;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod fsio;
pub mod model;
pub mod nn;
pub mod par;
pub mod persistence;
pub mod rng;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
