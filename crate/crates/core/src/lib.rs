//! Latent-space recovery and attribute editing for generative image models.
//!
//! An image is inverted to a latent code by gradient descent on a weighted
//! reconstruction objective, the code is moved along the unit normal of an
//! attribute hyperplane learned by a linear SVM, and results are scored with
//! Fréchet distance, BRISQUE statistics and embedding distance.
//!
//! The numeric core is generic over [`Real`] (`f32`/`f64`); the `*F64` aliases
//! below cover the common case.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::too_many_arguments,
    clippy::type_complexity,
    clippy::needless_range_loop
)]

pub mod editing;
pub mod error;
pub mod image;
pub mod io;
pub mod latent;
pub mod losses;
pub mod metrics;
pub mod recovery;
pub mod scalar;
pub mod toy;
pub mod trainer;

#[cfg(test)]
mod testutil;

pub use editing::{advisory_range, beautify_conditional, sweep, EditMethod, Frame};
pub use error::{Error, Result};
pub use image::ImageBuffer;
pub use latent::{classify, distance, edit, EditStep, Hyperplane, LatentCode, LatentSpace};
pub use losses::{LabelVector, LossWeights};
pub use metrics::{frechet_distance, gaussian_stats, FeatureSet, GaussianStats};
pub use recovery::{recover, recover_conditional, ConditionalGenerator, Generator, RecoveryConfig, RecoveryTrace};
pub use scalar::Real;
pub use trainer::{ScoredSample, Scorer, SvmConfig};

pub type LatentCodeF64 = LatentCode<f64>;
pub type LatentCodeF32 = LatentCode<f32>;
pub type HyperplaneF64 = Hyperplane<f64>;
pub type HyperplaneF32 = Hyperplane<f32>;
pub type ImageF64 = ImageBuffer<f64>;
pub type ImageF32 = ImageBuffer<f32>;
pub type LabelF64 = LabelVector<f64>;
pub type RecoveryConfigF64 = RecoveryConfig<f64>;
pub type FeatureSetF64 = FeatureSet<f64>;
pub type ScoredSampleF64 = ScoredSample<f64>;
