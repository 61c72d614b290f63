//! Evaluation metrics: Fréchet distance between feature Gaussians, BRISQUE
//! natural-scene statistics, and embedding distance for identity preservation.

mod brisque;
mod frechet;

pub use brisque::{aggd_fit, brisque_features, brisque_score, Aggd, BrisqueModel, BRISQUE_LEN, BRISQUE_MIN_SIDE};
pub use frechet::{
    frechet_distance, gaussian_stats, jacobi_eigen, sym_matrix_sqrt, FeatureSet, GaussianStats, SymMatrix,
};

use crate::error::{check_dim, Result};
use crate::image::ImageBuffer;
use crate::scalar::Real;

/// Image embedding with unit-norm output.
pub trait Embedder<T: Real>: Send + Sync {
    fn embed(&self, image: &ImageBuffer<T>) -> Result<Vec<T>>;
}

/// L2 distance between the embeddings of two images.
pub fn identity_distance<T: Real>(a: &ImageBuffer<T>, b: &ImageBuffer<T>, e: &dyn Embedder<T>) -> Result<T> {
    let (ea, eb) = (e.embed(a)?, e.embed(b)?);
    check_dim(ea.len(), eb.len())?;
    Ok(ea.iter().zip(&eb).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt())
}
