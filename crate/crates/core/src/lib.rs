//! Joint temporal and viewpoint alignment of 3D skeleton sequences for
//! few-shot action recognition.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the CLI uses.

pub mod alignment;
pub mod encoders;
pub mod error;
pub mod fewshot;
pub mod geometry;
pub mod scalar;
pub mod skeleton;

pub use error::{Error, Result};
pub use scalar::Real;

pub type SkeletonSequence64 = skeleton::SkeletonSequence<f64>;
pub type BlockSequence64 = skeleton::BlockSequence<f64>;
pub type FeatureMap64 = encoders::FeatureMap<f64>;
pub type EncoderParams64 = encoders::EncoderParams<f64>;
pub type DistanceTensor64 = alignment::DistanceTensor<f64>;
pub type AlignmentConfig64 = alignment::AlignmentConfig<f64>;
pub type RotationMatrix64 = geometry::RotationMatrix<f64>;
