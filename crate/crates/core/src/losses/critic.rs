use super::BatchLoss;
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::scalar::Real;

/// Scalar image critic (discriminator stand-in) with an image-space gradient.
pub trait Critic<T: Real>: Send + Sync {
    fn score(&self, image: &ImageBuffer<T>) -> Result<T>;
    fn gradient(&self, image: &ImageBuffer<T>) -> Result<Vec<T>>;
}

/// Mean critic score over the batch; per-image gradients scaled by `1/N`.
pub fn critic_loss<T: Real>(preds: &[ImageBuffer<T>], critic: &dyn Critic<T>) -> Result<BatchLoss<T>> {
    if preds.is_empty() {
        return Err(Error::arg("batch must hold at least one image"));
    }
    let n = T::from_usize_lossy(preds.len());
    let mut value = T::zero();
    let mut grads = Vec::with_capacity(preds.len());
    for p in preds {
        value += critic.score(p)?;
        grads.push(critic.gradient(p)?.into_iter().map(|g| g / n).collect());
    }
    Ok(BatchLoss {
        value: value / n,
        grads,
    })
}
