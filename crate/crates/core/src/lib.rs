//! Pix2Pix-style conditional GAN toolkit for delimiting volcanic ash clouds
//! in satellite imagery: dataset preparation, U-Net/PatchGAN models, the
//! adversarial training loop, evaluation and prediction.

pub mod dataset;
pub mod error;
pub mod eval;
mod fsutil;
pub mod model;
pub mod nn;
pub mod predict;
pub mod synth;
pub mod train;

pub use error::{Error, ErrorKind, Result};
pub use fsutil::write_atomic;

/// Identifier of the pixel scaling recorded in checkpoints.
pub const NORMALIZATION_ID: &str = "affine_v/127.5-1";
