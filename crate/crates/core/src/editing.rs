//! Attribute editing: hyperplane sweeps `z + αn` and conditional beauty
//! sweeps over `α₊` with the recovered identity held fixed.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::latent::{edit, EditStep, Hyperplane, LatentCode};
use crate::losses::LabelVector;
use crate::recovery::{ConditionalGenerator, Generator};
use crate::scalar::Real;

/// Slack that keeps a sweep end reachable despite rounding in `start + k·step`.
pub const SWEEP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T> {
    pub alpha: T,
    pub latent: LatentCode<T>,
    pub image: ImageBuffer<T>,
}

/// Offsets `start, start + step, …` up to `end` inclusive.
pub fn sweep_alphas<T: Real>(start: T, end: T, step: T) -> Result<Vec<T>> {
    if !(start.is_finite() && end.is_finite() && step.is_finite()) {
        return Err(Error::arg("sweep bounds and step must be finite"));
    }
    if step <= T::zero() {
        return Err(Error::arg(format!("sweep step must be positive (got {step})")));
    }
    if end < start {
        return Err(Error::arg(format!("sweep end {end} is below start {start}")));
    }
    let count = ((end - start + T::lit(SWEEP_SLACK)) / step)
        .floor()
        .to_usize()
        .unwrap_or(0)
        + 1;
    Ok((0..count).map(|i| start + T::from_usize_lossy(i) * step).collect())
}

/// Latents `z + αn` for every sweep offset.
pub fn sweep_latents<T: Real>(
    z: &LatentCode<T>,
    h: &Hyperplane<T>,
    start: T,
    end: T,
    step: T,
) -> Result<Vec<(T, LatentCode<T>)>> {
    sweep_alphas(start, end, step)?
        .into_iter()
        .map(|a| Ok((a, edit(z, h, EditStep::new(a)?)?)))
        .collect()
}

pub fn sweep<T: Real>(
    z: &LatentCode<T>,
    h: &Hyperplane<T>,
    start: T,
    end: T,
    step: T,
    gen: &dyn Generator<T>,
) -> Result<Vec<Frame<T>>> {
    sweep_latents(z, h, start, end, step)?
        .into_iter()
        .map(|(alpha, latent)| {
            let image = gen.synthesize(&latent)?;
            Ok(Frame { alpha, latent, image })
        })
        .collect()
}

/// `alpha_hat + k·step` for `k < frames`, capped at 1. The flag reports
/// whether any offset was capped.
pub fn conditional_alphas<T: Real>(alpha_hat: T, step: T, frames: usize) -> Result<(Vec<T>, bool)> {
    if frames == 0 {
        return Err(Error::arg("frame count must be >= 1"));
    }
    if !(step.is_finite() && step >= T::zero()) {
        return Err(Error::arg(format!("alpha step must be finite and >= 0 (got {step})")));
    }
    if !(alpha_hat >= T::zero() && alpha_hat <= T::one()) {
        return Err(Error::arg(format!("recovered beauty {alpha_hat} is outside [0, 1]")));
    }
    let mut capped = false;
    let alphas = (0..frames)
        .map(|k| {
            let a = alpha_hat + T::from_usize_lossy(k) * step;
            if a > T::one() {
                capped = true;
                T::one()
            } else {
                a
            }
        })
        .collect();
    Ok((alphas, capped))
}

/// Renders `G(z | α₊, β)` for each `α₊`, with `z` and `β` fixed.
pub fn beautify_conditional<T: Real>(
    z: &LatentCode<T>,
    alpha_hat: T,
    beta: &[T],
    alphas_plus: &[T],
    cgen: &dyn ConditionalGenerator<T>,
) -> Result<Vec<ImageBuffer<T>>> {
    for &a in alphas_plus {
        if !(a >= T::zero() && a <= T::one()) {
            return Err(Error::arg(format!("beauty offset {a} is outside [0, 1]")));
        }
        if a < alpha_hat {
            return Err(Error::arg(format!(
                "beauty offset {a} is below the recovered beauty {alpha_hat}"
            )));
        }
    }
    alphas_plus
        .iter()
        .map(|&a| {
            let label = LabelVector::new(a, beta.to_vec())?;
            cgen.synthesize(z, &label)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditMethod {
    Hyperplane,
    Conditional,
}

impl FromStr for EditMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hyperplane" => Ok(Self::Hyperplane),
            "conditional" => Ok(Self::Conditional),
            other => Err(Error::UnknownTag(other.to_string())),
        }
    }
}

/// Largest edit magnitude that still looked realistic: a hyperplane distance
/// of 1.2 or a beauty-score increase of 0.1. Advisory only.
pub fn advisory_range(method: EditMethod) -> f64 {
    match method {
        EditMethod::Hyperplane => 1.2,
        EditMethod::Conditional => 0.1,
    }
}
