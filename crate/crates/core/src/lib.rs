//! Zero-shot classification by synthesising unseen-class feature embeddings
//! with a class-conditioned denoising network, plus the compatibility
//! classifiers and experiment harness around it.

pub mod checkpoint;
pub mod classifier;
pub mod diffusion;
pub mod embedding_io;
pub mod error;
pub mod harness;
pub mod numerics;

pub use error::{Error, Result};
