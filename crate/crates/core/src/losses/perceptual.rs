use super::msssim::{pool2, pool2_adjoint};
use super::Loss;
use crate::error::{Error, Result};
use crate::image::{interleave, ImageBuffer};
use crate::scalar::Real;

/// Learned-perceptual-metric slot: a distance with a gradient in its first argument.
pub trait PerceptualMetric<T: Real>: Send + Sync {
    fn distance(&self, pred: &ImageBuffer<T>, target: &ImageBuffer<T>) -> Result<Loss<T>>;
}

/// Stand-in perceptual distance: squared L2 between unit-normalized
/// Laplacian-pyramid bands, averaged over bands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PyramidPerceptual {
    /// Band-pass levels requested; capped so the coarsest residual keeps at least one pixel.
    pub levels: usize,
    /// Per-element stabilizer added under the band norm.
    pub eps: f64,
}

impl Default for PyramidPerceptual {
    fn default() -> Self {
        Self { levels: 3, eps: 1e-10 }
    }
}

/// Nearest-neighbour upsample of a pooled plane back to `(w, h)`; border rows
/// of odd sizes reuse the last coarse cell.
fn upsample<T: Real>(g: &[T], pw: usize, ph: usize, w: usize, h: usize) -> Vec<T> {
    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        let cy = (y / 2).min(ph - 1);
        for x in 0..w {
            out[y * w + x] = g[cy * pw + (x / 2).min(pw - 1)];
        }
    }
    out
}

fn upsample_adjoint<T: Real>(g: &[T], pw: usize, ph: usize, w: usize, h: usize) -> Vec<T> {
    let mut out = vec![T::zero(); pw * ph];
    for y in 0..h {
        let cy = (y / 2).min(ph - 1);
        for x in 0..w {
            out[cy * pw + (x / 2).min(pw - 1)] += g[y * w + x];
        }
    }
    out
}

impl PyramidPerceptual {
    fn effective_levels(&self, w: usize, h: usize) -> usize {
        let mut l = 0;
        while l < self.levels && (w >> (l + 1)) >= 1 && (h >> (l + 1)) >= 1 {
            l += 1;
        }
        l
    }

    /// Bands of every plane: `bands[k]` concatenates level `k` over channels.
    /// Returns the bands plus the per-level plane sizes.
    fn bands<T: Real>(&self, img: &ImageBuffer<T>) -> (Vec<Vec<T>>, Vec<(usize, usize)>) {
        let (w, h, c) = img.shape();
        let levels = self.effective_levels(w, h);
        let mut bands = vec![Vec::new(); levels + 1];
        let mut sizes = Vec::with_capacity(levels + 1);
        for ch in 0..c {
            let (mut g, mut cw, mut chh) = (img.plane(ch), w, h);
            for (k, band) in bands.iter_mut().enumerate() {
                if ch == 0 {
                    sizes.push((cw, chh));
                }
                if k == levels {
                    band.extend_from_slice(&g);
                    break;
                }
                let (p, pw, ph) = pool2(&g, cw, chh);
                let up = upsample(&p, pw, ph, cw, chh);
                band.extend(g.iter().zip(&up).map(|(&a, &b)| a - b));
                g = p;
                cw = pw;
                chh = ph;
            }
        }
        (bands, sizes)
    }

    /// Pulls per-band gradients back to the image.
    fn bands_adjoint<T: Real>(&self, grads: &[Vec<T>], sizes: &[(usize, usize)], c: usize) -> Vec<T> {
        let levels = sizes.len() - 1;
        let mut planes = Vec::with_capacity(c);
        for ch in 0..c {
            // Coarsest first: the lowpass residual is the last band.
            let (lw, lh) = sizes[levels];
            let off = ch * lw * lh;
            let mut acc: Vec<T> = grads[levels][off..off + lw * lh].to_vec();
            for k in (0..levels).rev() {
                let (cw, chh) = sizes[k];
                let (pw, ph) = sizes[k + 1];
                let off = ch * cw * chh;
                let gb = &grads[k][off..off + cw * chh];
                // band = g - up(pool(g)); next level input = pool(g)
                let up_adj = upsample_adjoint(gb, pw, ph, cw, chh);
                let coarse: Vec<T> = acc.iter().zip(&up_adj).map(|(&a, &b)| a - b).collect();
                let mut fine = pool2_adjoint(&coarse, cw, chh);
                for (f, &b) in fine.iter_mut().zip(gb) {
                    *f += b;
                }
                acc = fine;
            }
            planes.push(acc);
        }
        interleave(&planes)
    }
}

impl<T: Real> PerceptualMetric<T> for PyramidPerceptual {
    fn distance(&self, pred: &ImageBuffer<T>, target: &ImageBuffer<T>) -> Result<Loss<T>> {
        pred.check_same_shape(target)?;
        if !(self.eps > 0.0) {
            return Err(Error::arg("perceptual eps must be positive"));
        }
        let (bp, sizes) = self.bands(pred);
        let (bt, _) = self.bands(target);
        let nb = T::from_usize_lossy(bp.len());
        let two = T::lit(2.0);
        let mut value = T::zero();
        let mut grads = Vec::with_capacity(bp.len());
        for (b, v) in bp.iter().zip(&bt) {
            let eps = T::lit(self.eps) * T::from_usize_lossy(b.len());
            let nb_ = (b.iter().map(|&x| x * x).sum::<T>() + eps).sqrt();
            let nv = (v.iter().map(|&x| x * x).sum::<T>() + eps).sqrt();
            let diff: Vec<T> = b.iter().zip(v).map(|(&x, &y)| x / nb_ - y / nv).collect();
            value += diff.iter().map(|&d| d * d).sum::<T>() / nb;
            let proj: T = b.iter().zip(&diff).map(|(&x, &d)| x * d).sum();
            let n3 = nb_ * nb_ * nb_;
            grads.push(
                b.iter()
                    .zip(&diff)
                    .map(|(&x, &d)| (two * d / nb_ - two * x * proj / n3) / nb)
                    .collect::<Vec<T>>(),
            );
        }
        let grad = self.bands_adjoint(&grads, &sizes, pred.channels());
        Ok(Loss { value, grad })
    }
}

pub fn perceptual_loss<T: Real>(
    pred: &ImageBuffer<T>,
    target: &ImageBuffer<T>,
    metric: &dyn PerceptualMetric<T>,
) -> Result<Loss<T>> {
    metric.distance(pred, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{central_gradient, max_rel_err, random_pixels};

    fn img(seed: u64, w: usize, h: usize, c: usize) -> ImageBuffer<f64> {
        ImageBuffer::new(w, h, c, random_pixels(seed, w * h * c, 0.05, 0.95)).unwrap()
    }

    #[test]
    fn identical_is_zero_and_symmetric() {
        let m = PyramidPerceptual::default();
        let (a, b) = (img(1, 16, 16, 1), img(2, 16, 16, 1));
        assert!(perceptual_loss(&a, &a, &m).unwrap().value.abs() < 1e-15);
        let ab = perceptual_loss(&a, &b, &m).unwrap().value;
        let ba = perceptual_loss(&b, &a, &m).unwrap().value;
        assert_eq!(ab, ba);
        assert!(ab > 0.0);
    }

    #[test]
    fn gradient_matches_fd() {
        let m = PyramidPerceptual::default();
        for (w, h, c) in [(16, 16, 1), (9, 7, 3)] {
            let (p, t) = (img(3, w, h, c), img(4, w, h, c));
            let analytic = perceptual_loss(&p, &t, &m).unwrap().grad;
            let numeric = central_gradient(p.pixels(), 1e-5, |x| {
                perceptual_loss(&ImageBuffer::new(w, h, c, x.to_vec()).unwrap(), &t, &m)
                    .unwrap()
                    .value
            });
            assert!(max_rel_err(&analytic, &numeric) < 1e-3, "{w}x{h}x{c}");
        }
    }

    #[test]
    fn levels_capped_for_tiny_images() {
        let m = PyramidPerceptual { levels: 10, eps: 1e-10 };
        let (a, b) = (img(5, 2, 3, 1), img(6, 2, 3, 1));
        assert!(perceptual_loss(&a, &b, &m).unwrap().value.is_finite());
        let one = ImageBuffer::filled(1, 1, 1, 0.5).unwrap();
        assert_eq!(perceptual_loss(&one, &one, &m).unwrap().value, 0.0);
    }
}
