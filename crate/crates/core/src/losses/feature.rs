use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Loss;
use crate::error::{Error, Result};
use crate::image::{ImageBuffer, Shape};
use crate::scalar::Real;

/// Maps an image to a list of flattened feature maps and pulls feature-space
/// gradients back to image space.
pub trait FeatureExtractor<T: Real>: Send + Sync {
    fn extract(&self, image: &ImageBuffer<T>) -> Result<Vec<Vec<T>>>;

    /// Vector-Jacobian product: `upstream[j]` has the length of map `j`.
    fn vjp(&self, image: &ImageBuffer<T>, upstream: &[Vec<T>]) -> Result<Vec<T>>;
}

/// Features are the raw pixels.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityExtractor;

impl<T: Real> FeatureExtractor<T> for IdentityExtractor {
    fn extract(&self, image: &ImageBuffer<T>) -> Result<Vec<Vec<T>>> {
        Ok(vec![image.pixels().to_vec()])
    }

    fn vjp(&self, image: &ImageBuffer<T>, upstream: &[Vec<T>]) -> Result<Vec<T>> {
        match upstream {
            [g] if g.len() == image.len() => Ok(g.clone()),
            _ => Err(Error::arg("identity extractor expects one map of image size")),
        }
    }
}

/// Seeded bank of random 3×3 convolutions followed by `tanh`, plus a 2×2
/// average-pooled copy of the activations as a second feature level.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBankExtractor {
    channels: usize,
    filters: usize,
    /// `[filter][channel][ky][kx]` flattened.
    kernels: Vec<f64>,
    biases: Vec<f64>,
}

impl ConvBankExtractor {
    pub const FILTERS: usize = 8;

    pub fn new(seed: u64, channels: usize) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::arg(format!("extractor channels must be 1 or 3, got {channels}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.5 / ((9 * channels) as f64).sqrt();
        let kernels = (0..Self::FILTERS * channels * 9)
            .map(|_| rng.random_range(-1.0..1.0) * scale)
            .collect();
        let biases = (0..Self::FILTERS).map(|_| rng.random_range(-0.2..0.2)).collect();
        Ok(Self {
            channels,
            filters: Self::FILTERS,
            kernels,
            biases,
        })
    }

    fn check(&self, shape: Shape) -> Result<()> {
        if shape.2 != self.channels {
            return Err(Error::arg(format!(
                "extractor built for {} channels cannot take a {}-channel image",
                self.channels, shape.2
            )));
        }
        Ok(())
    }

    #[inline]
    fn k(&self, f: usize, c: usize, ky: usize, kx: usize) -> f64 {
        self.kernels[((f * self.channels + c) * 3 + ky) * 3 + kx]
    }

    /// First-level activations laid out `[filter][y][x]`.
    fn activations<T: Real>(&self, image: &ImageBuffer<T>) -> Vec<T> {
        let (w, h, ch) = image.shape();
        let mut out = vec![T::zero(); self.filters * w * h];
        for f in 0..self.filters {
            for y in 0..h {
                for x in 0..w {
                    let mut s = T::lit(self.biases[f]);
                    for ky in 0..3 {
                        let yy = y as isize + ky as isize - 1;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        for kx in 0..3 {
                            let xx = x as isize + kx as isize - 1;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            for c in 0..ch {
                                s += T::lit(self.k(f, c, ky, kx)) * image.get(xx as usize, yy as usize, c);
                            }
                        }
                    }
                    out[(f * h + y) * w + x] = s.tanh();
                }
            }
        }
        out
    }
}

fn pool_dims(w: usize, h: usize) -> (usize, usize) {
    (w / 2, h / 2)
}

impl<T: Real> FeatureExtractor<T> for ConvBankExtractor {
    fn extract(&self, image: &ImageBuffer<T>) -> Result<Vec<Vec<T>>> {
        self.check(image.shape())?;
        let (w, h, _) = image.shape();
        let act = self.activations(image);
        let (pw, ph) = pool_dims(w, h);
        if pw == 0 || ph == 0 {
            return Ok(vec![act]);
        }
        let quarter = T::lit(0.25);
        let mut pooled = vec![T::zero(); self.filters * pw * ph];
        for f in 0..self.filters {
            for y in 0..ph {
                for x in 0..pw {
                    let at = |yy: usize, xx: usize| act[(f * h + yy) * w + xx];
                    pooled[(f * ph + y) * pw + x] = quarter
                        * (at(2 * y, 2 * x) + at(2 * y, 2 * x + 1) + at(2 * y + 1, 2 * x) + at(2 * y + 1, 2 * x + 1));
                }
            }
        }
        Ok(vec![act, pooled])
    }

    fn vjp(&self, image: &ImageBuffer<T>, upstream: &[Vec<T>]) -> Result<Vec<T>> {
        self.check(image.shape())?;
        let (w, h, ch) = image.shape();
        let act = self.activations(image);
        let (pw, ph) = pool_dims(w, h);
        let levels = if pw == 0 || ph == 0 { 1 } else { 2 };
        if upstream.len() != levels || upstream[0].len() != act.len() {
            return Err(Error::arg("upstream gradient does not match extractor maps"));
        }
        let mut g_act = upstream[0].clone();
        if levels == 2 {
            let quarter = T::lit(0.25);
            for f in 0..self.filters {
                for y in 0..ph {
                    for x in 0..pw {
                        let g = quarter * upstream[1][(f * ph + y) * pw + x];
                        for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                            g_act[(f * h + 2 * y + dy) * w + 2 * x + dx] += g;
                        }
                    }
                }
            }
        }
        // through tanh
        for (g, &a) in g_act.iter_mut().zip(&act) {
            *g *= T::one() - a * a;
        }
        // transposed convolution back to pixels
        let mut out = vec![T::zero(); w * h * ch];
        for f in 0..self.filters {
            for y in 0..h {
                for x in 0..w {
                    let g = g_act[(f * h + y) * w + x];
                    if g == T::zero() {
                        continue;
                    }
                    for ky in 0..3 {
                        let yy = y as isize + ky as isize - 1;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        for kx in 0..3 {
                            let xx = x as isize + kx as isize - 1;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            let base = (yy as usize * w + xx as usize) * ch;
                            for c in 0..ch {
                                out[base + c] += T::lit(self.k(f, c, ky, kx)) * g;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Mean absolute feature difference averaged over the extractor's maps.
///
/// The upstream gradient handed to the extractor is `sign(F(pred) - F(target))`
/// scaled by the map mean, with `sign(0) = 0`.
pub fn feature_l1<T: Real>(
    pred: &ImageBuffer<T>,
    target: &ImageBuffer<T>,
    extractor: &dyn FeatureExtractor<T>,
) -> Result<Loss<T>> {
    pred.check_same_shape(target)?;
    let fp = extractor.extract(pred)?;
    let ft = extractor.extract(target)?;
    if fp.len() != ft.len() || fp.is_empty() {
        return Err(Error::arg("extractor returned inconsistent feature maps"));
    }
    let maps = T::from_usize_lossy(fp.len());
    let mut value = T::zero();
    let mut upstream = Vec::with_capacity(fp.len());
    for (a, b) in fp.iter().zip(&ft) {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::arg("extractor returned mismatched map sizes"));
        }
        let n = T::from_usize_lossy(a.len()) * maps;
        let mut s = T::zero();
        let g = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| {
                s += (x - y).abs();
                (x - y).sign0() / n
            })
            .collect();
        value += s / n;
        upstream.push(g);
    }
    let grad = extractor.vjp(pred, &upstream)?;
    Ok(Loss { value, grad })
}
