//! Multi-scale structural similarity with an analytic gradient.
//!
//! Each scale filters with an 11×11 Gaussian (σ = 1.5) over valid positions
//! only. Coarser scales are 2×2 average pooled. Scales below the coarsest
//! contribute their mean contrast-structure term. The coarsest contributes
//! the full SSIM mean. The per-scale bases are combined as a weighted
//! product `∏ sgn(b)|b|^w`. Multichannel images average MS-SSIM over
//! channels.

use super::Loss;
use crate::error::{Error, Result};
use crate::image::{interleave, ImageBuffer};
use crate::scalar::Real;

/// Standard five-scale exponents.
pub const MSSSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct MsSsimConfig {
    pub levels: usize,
    /// Per-level exponents; `None` renormalizes the first `levels` standard weights.
    pub level_weights: Option<Vec<f64>>,
    pub c1: f64,
    pub c2: f64,
}

impl Default for MsSsimConfig {
    fn default() -> Self {
        Self::with_levels(5)
    }
}

impl MsSsimConfig {
    pub fn with_levels(levels: usize) -> Self {
        Self {
            levels,
            level_weights: None,
            c1: 0.01 * 0.01,
            c2: 0.03 * 0.03,
        }
    }

    fn weights(&self) -> Result<Vec<f64>> {
        if self.levels == 0 {
            return Err(Error::arg("MS-SSIM needs at least one level"));
        }
        match &self.level_weights {
            Some(w) if w.len() != self.levels => Err(Error::arg(format!(
                "{} level weights given for {} levels",
                w.len(),
                self.levels
            ))),
            Some(w) if w.iter().any(|v| !v.is_finite() || *v < 0.0) => {
                Err(Error::arg("MS-SSIM level weights must be finite and >= 0"))
            }
            Some(w) => Ok(w.clone()),
            None => {
                if self.levels > MSSSIM_WEIGHTS.len() {
                    return Err(Error::arg(format!(
                        "at most {} levels have standard weights; pass level_weights explicitly",
                        MSSSIM_WEIGHTS.len()
                    )));
                }
                let w = &MSSSIM_WEIGHTS[..self.levels];
                let s: f64 = w.iter().sum();
                Ok(w.iter().map(|v| v / s).collect())
            }
        }
    }
}

/// Largest level count an image of this size supports (0 if below one window).
pub fn max_msssim_levels(width: usize, height: usize) -> usize {
    let m = width.min(height);
    let mut levels = 0;
    while m >= WINDOW << levels {
        levels += 1;
    }
    levels
}

fn gaussian_kernel<T: Real>() -> Vec<T> {
    let half = (WINDOW / 2) as f64;
    let raw: Vec<f64> = (0..WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * SIGMA * SIGMA)).exp()
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| T::lit(v / s)).collect()
}

/// Separable valid correlation, `(w, h) → (w - k + 1, h - k + 1)`.
fn filter_valid<T: Real>(p: &[T], w: usize, h: usize, k: &[T]) -> Vec<T> {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut tmp = vec![T::zero(); ow * h];
    for y in 0..h {
        for x in 0..ow {
            let mut s = T::zero();
            for (i, &kv) in k.iter().enumerate() {
                s += kv * p[y * w + x + i];
            }
            tmp[y * ow + x] = s;
        }
    }
    let mut out = vec![T::zero(); ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut s = T::zero();
            for (i, &kv) in k.iter().enumerate() {
                s += kv * tmp[(y + i) * ow + x];
            }
            out[y * ow + x] = s;
        }
    }
    out
}

/// Adjoint of [`filter_valid`].
fn filter_valid_adjoint<T: Real>(g: &[T], w: usize, h: usize, k: &[T]) -> Vec<T> {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut tmp = vec![T::zero(); ow * h];
    for y in 0..oh {
        for x in 0..ow {
            let v = g[y * ow + x];
            for (i, &kv) in k.iter().enumerate() {
                tmp[(y + i) * ow + x] += kv * v;
            }
        }
    }
    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..ow {
            let v = tmp[y * ow + x];
            for (i, &kv) in k.iter().enumerate() {
                out[y * w + x + i] += kv * v;
            }
        }
    }
    out
}

pub(crate) fn pool2<T: Real>(p: &[T], w: usize, h: usize) -> (Vec<T>, usize, usize) {
    let (pw, ph) = (w / 2, h / 2);
    let q = T::lit(0.25);
    let mut out = vec![T::zero(); pw * ph];
    for y in 0..ph {
        for x in 0..pw {
            out[y * pw + x] = q
                * (p[2 * y * w + 2 * x]
                    + p[2 * y * w + 2 * x + 1]
                    + p[(2 * y + 1) * w + 2 * x]
                    + p[(2 * y + 1) * w + 2 * x + 1]);
        }
    }
    (out, pw, ph)
}

pub(crate) fn pool2_adjoint<T: Real>(g: &[T], w: usize, h: usize) -> Vec<T> {
    let (pw, ph) = (w / 2, h / 2);
    let q = T::lit(0.25);
    let mut out = vec![T::zero(); w * h];
    for y in 0..ph {
        for x in 0..pw {
            let v = q * g[y * pw + x];
            out[2 * y * w + 2 * x] += v;
            out[2 * y * w + 2 * x + 1] += v;
            out[(2 * y + 1) * w + 2 * x] += v;
            out[(2 * y + 1) * w + 2 * x + 1] += v;
        }
    }
    out
}

/// Mean of the contrast-structure map (or the full SSIM map when `full`)
/// and its gradient with respect to `x`.
fn scale_term<T: Real>(x: &[T], y: &[T], w: usize, h: usize, full: bool, c1: T, c2: T, k: &[T]) -> (T, Vec<T>) {
    let sq = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&u, &v)| u * v).collect::<Vec<T>>();
    let mx = filter_valid(x, w, h, k);
    let my = filter_valid(y, w, h, k);
    let sxx = filter_valid(&sq(x, x), w, h, k);
    let syy = filter_valid(&sq(y, y), w, h, k);
    let sxy = filter_valid(&sq(x, y), w, h, k);
    let np = mx.len();
    let inv_p = T::one() / T::from_usize_lossy(np);
    let two = T::lit(2.0);

    let mut total = T::zero();
    let mut d_mu = vec![T::zero(); np];
    let mut d_sxx = vec![T::zero(); np];
    let mut d_sxy = vec![T::zero(); np];
    for i in 0..np {
        let (ux, uy) = (mx[i], my[i]);
        let vx = sxx[i] - ux * ux;
        let vy = syy[i] - uy * uy;
        let vxy = sxy[i] - ux * uy;
        let a = two * vxy + c2;
        let b = vx + vy + c2;
        let cs = a / b;
        let dcs_dvx = -a / (b * b);
        let dcs_dvxy = two / b;
        let dcs_dmu = -two * ux * dcs_dvx - uy * dcs_dvxy;
        if full {
            let nl = two * ux * uy + c1;
            let dl = ux * ux + uy * uy + c1;
            let l = nl / dl;
            let dl_dmu = (two * uy * dl - nl * two * ux) / (dl * dl);
            total += l * cs;
            d_mu[i] = (dl_dmu * cs + l * dcs_dmu) * inv_p;
            d_sxx[i] = l * dcs_dvx * inv_p;
            d_sxy[i] = l * dcs_dvxy * inv_p;
        } else {
            total += cs;
            d_mu[i] = dcs_dmu * inv_p;
            d_sxx[i] = dcs_dvx * inv_p;
            d_sxy[i] = dcs_dvxy * inv_p;
        }
    }
    let g_mu = filter_valid_adjoint(&d_mu, w, h, k);
    let g_sxx = filter_valid_adjoint(&d_sxx, w, h, k);
    let g_sxy = filter_valid_adjoint(&d_sxy, w, h, k);
    let grad = (0..w * h)
        .map(|j| g_mu[j] + two * x[j] * g_sxx[j] + y[j] * g_sxy[j])
        .collect();
    (total * inv_p, grad)
}

#[inline]
fn signed_pow<T: Real>(b: T, e: T) -> T {
    b.signum() * b.abs().powf(e)
}

/// MS-SSIM of one plane and its gradient with respect to `x`.
fn msssim_plane<T: Real>(x: &[T], y: &[T], w: usize, h: usize, weights: &[f64], c1: T, c2: T) -> (T, Vec<T>) {
    let k = gaussian_kernel::<T>();
    let levels = weights.len();
    let mut dims = Vec::with_capacity(levels);
    let mut bases = Vec::with_capacity(levels);
    let mut grads = Vec::with_capacity(levels);
    let (mut cx, mut cy, mut cw, mut ch) = (x.to_vec(), y.to_vec(), w, h);
    for j in 0..levels {
        let (b, g) = scale_term(&cx, &cy, cw, ch, j + 1 == levels, c1, c2, &k);
        bases.push(b);
        grads.push(g);
        dims.push((cw, ch));
        if j + 1 < levels {
            let (px, pw, ph) = pool2(&cx, cw, ch);
            let (py, _, _) = pool2(&cy, cw, ch);
            cx = px;
            cy = py;
            cw = pw;
            ch = ph;
        }
    }
    let ew: Vec<T> = weights.iter().map(|&v| T::lit(v)).collect();
    let factors: Vec<T> = bases.iter().zip(&ew).map(|(&b, &e)| signed_pow(b, e)).collect();
    let value = factors.iter().fold(T::one(), |acc, &f| acc * f);

    // Walk from the coarsest scale up, folding each scale's contribution in
    // before the pooling adjoint to the next finer scale.
    let mut acc: Option<Vec<T>> = None;
    for j in (0..levels).rev() {
        let others = factors
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j)
            .fold(T::one(), |a, (_, &f)| a * f);
        let coeff = if ew[j] == T::zero() {
            T::zero()
        } else {
            ew[j] * bases[j].abs().powf(ew[j] - T::one()) * others
        };
        let mut g: Vec<T> = grads[j].iter().map(|&v| v * coeff).collect();
        if let Some(coarse) = acc.take() {
            let (fw, fh) = dims[j];
            for (a, b) in g.iter_mut().zip(pool2_adjoint(&coarse, fw, fh)) {
                *a += b;
            }
        }
        acc = Some(g);
    }
    (value, acc.expect("at least one level"))
}

fn check_size(width: usize, height: usize, levels: usize) -> Result<()> {
    let required = WINDOW << (levels.max(1) - 1);
    if width.min(height) < required {
        return Err(Error::ImageTooSmall {
            width,
            height,
            levels,
            required,
            max_levels: max_msssim_levels(width, height),
        });
    }
    Ok(())
}

/// MS-SSIM averaged over channels, with its gradient with respect to `x`.
pub fn msssim<T: Real>(x: &ImageBuffer<T>, y: &ImageBuffer<T>, cfg: &MsSsimConfig) -> Result<Loss<T>> {
    x.check_same_shape(y)?;
    let weights = cfg.weights()?;
    let (w, h, c) = x.shape();
    check_size(w, h, cfg.levels)?;
    let (c1, c2) = (T::lit(cfg.c1), T::lit(cfg.c2));
    let inv_c = T::one() / T::from_usize_lossy(c);
    let mut value = T::zero();
    let mut planes = Vec::with_capacity(c);
    for ch in 0..c {
        let (v, g) = msssim_plane(&x.plane(ch), &y.plane(ch), w, h, &weights, c1, c2);
        value += v * inv_c;
        planes.push(g.into_iter().map(|v| v * inv_c).collect::<Vec<T>>());
    }
    Ok(Loss {
        value,
        grad: interleave(&planes),
    })
}

/// `1 - MS-SSIM(pred, target)` with its gradient with respect to `pred`.
pub fn msssim_loss<T: Real>(pred: &ImageBuffer<T>, target: &ImageBuffer<T>, cfg: &MsSsimConfig) -> Result<Loss<T>> {
    let s = msssim(pred, target, cfg)?;
    Ok(Loss {
        value: T::one() - s.value,
        grad: s.grad.into_iter().map(|g| -g).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{central_gradient, max_rel_err, random_pixels};

    fn correlated_pair(seed: u64, w: usize, h: usize, c: usize) -> (ImageBuffer<f64>, ImageBuffer<f64>) {
        let n = w * h * c;
        let t = random_pixels(seed, n, 0.1, 0.9);
        let noise = random_pixels(seed + 100, n, -0.1, 0.1);
        let p: Vec<f64> = t.iter().zip(&noise).map(|(a, b)| a + b).collect();
        (
            ImageBuffer::new(w, h, c, p).unwrap(),
            ImageBuffer::new(w, h, c, t).unwrap(),
        )
    }

    #[test]
    fn identical_images_score_zero_loss() {
        let (p, _) = correlated_pair(1, 32, 32, 1);
        let l = msssim_loss(&p, &p, &MsSsimConfig::with_levels(2)).unwrap();
        assert!(l.value.abs() < 1e-12);
        assert!(l.grad.iter().all(|g| g.abs() < 1e-9));
    }

    #[test]
    fn constant_images_match_closed_form() {
        let (a, b) = (0.2f64, 0.8);
        let x = ImageBuffer::filled(16, 16, 1, a).unwrap();
        let y = ImageBuffer::filled(16, 16, 1, b).unwrap();
        let c1 = 0.0001;
        let expect = (2.0 * a * b + c1) / (a * a + b * b + c1);
        let s = msssim(&x, &y, &MsSsimConfig::with_levels(1)).unwrap();
        assert!((s.value - expect).abs() < 1e-9, "{} vs {expect}", s.value);
    }

    #[test]
    fn gradient_matches_fd_two_levels() {
        let (p, t) = correlated_pair(3, 32, 32, 1);
        let cfg = MsSsimConfig::with_levels(2);
        let analytic = msssim_loss(&p, &t, &cfg).unwrap().grad;
        let numeric = central_gradient(p.pixels(), 1e-5, |x| {
            msssim_loss(&ImageBuffer::new(32, 32, 1, x.to_vec()).unwrap(), &t, &cfg)
                .unwrap()
                .value
        });
        assert!(max_rel_err(&analytic, &numeric) < 1e-3);
    }

    #[test]
    fn gradient_matches_fd_rgb_one_level() {
        let (p, t) = correlated_pair(4, 12, 13, 3);
        let cfg = MsSsimConfig::with_levels(1);
        let analytic = msssim_loss(&p, &t, &cfg).unwrap().grad;
        let numeric = central_gradient(p.pixels(), 1e-5, |x| {
            msssim_loss(&ImageBuffer::new(12, 13, 3, x.to_vec()).unwrap(), &t, &cfg)
                .unwrap()
                .value
        });
        assert!(max_rel_err(&analytic, &numeric) < 1e-3);
    }

    #[test]
    fn too_small_names_feasible_levels() {
        let x = ImageBuffer::filled(40, 40, 1, 0.5).unwrap();
        match msssim_loss(&x, &x, &MsSsimConfig::with_levels(3)) {
            Err(Error::ImageTooSmall {
                max_levels, required, ..
            }) => {
                assert_eq!(max_levels, 2);
                assert_eq!(required, 44);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(max_msssim_levels(10, 100), 0);
        assert_eq!(max_msssim_levels(176, 200), 5);
    }

    #[test]
    fn symmetric_and_bounded() {
        let (p, t) = correlated_pair(5, 24, 24, 1);
        let cfg = MsSsimConfig::with_levels(2);
        let ab = msssim_loss(&p, &t, &cfg).unwrap().value;
        let ba = msssim_loss(&t, &p, &cfg).unwrap().value;
        assert!((ab - ba).abs() < 1e-12);
        assert!((0.0..=2.0).contains(&ab));
        let x = ImageBuffer::new(16, 16, 1, random_pixels(8, 256, 0.0, 1.0)).unwrap();
        let inv = ImageBuffer::new(16, 16, 1, x.pixels().iter().map(|v| 1.0 - v).collect()).unwrap();
        let v = msssim_loss(&x, &inv, &MsSsimConfig::with_levels(1)).unwrap().value;
        assert!(v > 1.0 && v <= 2.0);
    }

    #[test]
    fn explicit_weights_validated() {
        let x = ImageBuffer::filled(16, 16, 1, 0.5).unwrap();
        let cfg = MsSsimConfig {
            level_weights: Some(vec![1.0, 1.0]),
            ..MsSsimConfig::with_levels(1)
        };
        assert!(msssim(&x, &x, &cfg).is_err());
        assert!(msssim(&x, &x, &MsSsimConfig::with_levels(0)).is_err());
    }
}
