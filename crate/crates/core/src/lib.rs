//! Demosaicing toolkit for 4x4 snapshot multispectral mosaic images.
//!
//! The crate covers the full path from raw frames to evaluated hypercubes:
//! calibration, ground-truth composition from pixel-shifted captures,
//! classical interpolation baselines, a parallel-path convolutional
//! demosaicing network with its own gradient engine and trainer, image
//! quality metrics and RGB rendering.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the `f32` instantiations used for storage and training.

pub mod calibration;
pub mod classical;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod io;
pub mod metrics;
pub mod model;
pub mod mosaic;
pub mod render;
pub mod scalar;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use model::ModelParams;
pub use mosaic::{HyperCube, MosaicImage, MosaicPattern, SamplingMode};
pub use scalar::Scalar;

pub type Cube = HyperCube<f32>;
pub type Mosaic = MosaicImage<f32>;
pub type Params = ModelParams<f32>;
