//! 4D spatio-temporal convolutional networks for volumetric motion
//! estimation and forecasting.
//!
//! The crate is self-contained: dense `f64` tensors, 3D/4D convolution with
//! reverse-mode gradients, five network architectures over volume sequences,
//! a synthetic volumetric data generator, and a training/evaluation harness
//! with a reproducible comparison study. Matrix products are delegated to a
//! BLAS-style microkernel; everything model-specific is implemented here.

pub mod error;
pub mod harness;
pub mod layers;
pub mod rng;
pub mod synthgen;
pub mod tensor;
pub mod zoo;

pub use error::{Error, Result};
pub use tensor::{AxisLayout, AxisRole, Fill, Tensor};
