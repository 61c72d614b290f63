use super::Loss;
use crate::error::Result;
use crate::image::ImageBuffer;
use crate::scalar::Real;

/// `ln cosh(x)` without overflow for large `|x|`.
#[inline]
pub(crate) fn log_cosh<T: Real>(x: T) -> T {
    let a = x.abs();
    a + (-(a + a)).exp().ln_1p() - T::LN_2()
}

/// Mean log-cosh pixel difference; gradient `tanh(pred - target) / (W·H·C)`.
pub fn pixel_logcosh<T: Real>(pred: &ImageBuffer<T>, target: &ImageBuffer<T>) -> Result<Loss<T>> {
    pred.check_same_shape(target)?;
    let n = T::from_usize_lossy(pred.len());
    let mut value = T::zero();
    let grad = pred
        .pixels()
        .iter()
        .zip(target.pixels())
        .map(|(&p, &t)| {
            let d = p - t;
            value += log_cosh(d);
            d.tanh() / n
        })
        .collect();
    Ok(Loss { value: value / n, grad })
}
