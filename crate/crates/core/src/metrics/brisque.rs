use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::scalar::Real;

pub const BRISQUE_LEN: usize = 36;
pub const BRISQUE_MIN_SIDE: usize = 32;

const WINDOW: usize = 7;
const SIGMA: f64 = 7.0 / 6.0;
const C: f64 = 1.0 / 255.0;
const SHAPE_MIN: f64 = 0.2;
const SHAPE_MAX: f64 = 10.0;
const SHAPE_STEP: f64 = 0.001;

/// Asymmetric generalized Gaussian fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggd {
    pub shape: f64,
    pub mean: f64,
    pub left_var: f64,
    pub right_var: f64,
}

/// `(shape, r(shape))` with `r(a) = Γ(2/a)² / (Γ(1/a) Γ(3/a))`.
fn shape_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let steps = ((SHAPE_MAX - SHAPE_MIN) / SHAPE_STEP).round() as usize;
        (0..=steps)
            .map(|i| {
                let a = SHAPE_MIN + i as f64 * SHAPE_STEP;
                let r = (2.0 * ln_gamma(2.0 / a) - ln_gamma(1.0 / a) - ln_gamma(3.0 / a)).exp();
                (a, r)
            })
            .collect()
    })
}

/// Moment-matching AGGD fit over the shape grid `[0.2, 10]`, step 0.001.
/// Samples with no energy fit as shape 2 with zero mean and variances.
pub fn aggd_fit(samples: &[f64]) -> Aggd {
    let (mut lsum, mut ln, mut rsum, mut rn) = (0.0, 0usize, 0.0, 0usize);
    let (mut abs_sum, mut sq_sum) = (0.0, 0.0);
    for &x in samples {
        if x < 0.0 {
            lsum += x * x;
            ln += 1;
        } else if x > 0.0 {
            rsum += x * x;
            rn += 1;
        }
        abs_sum += x.abs();
        sq_sum += x * x;
    }
    if samples.is_empty() || sq_sum <= 0.0 {
        return Aggd {
            shape: 2.0,
            mean: 0.0,
            left_var: 0.0,
            right_var: 0.0,
        };
    }
    let left_var = if ln > 0 { lsum / ln as f64 } else { 0.0 };
    let right_var = if rn > 0 { rsum / rn as f64 } else { 0.0 };
    let (ls, rs) = (left_var.sqrt(), right_var.sqrt());
    let n = samples.len() as f64;
    let rhat = (abs_sum / n).powi(2) / (sq_sum / n);
    let rhat_norm = if ls > 0.0 && rs > 0.0 {
        let g = ls / rs;
        rhat * (g.powi(3) + 1.0) * (g + 1.0) / (g * g + 1.0).powi(2)
    } else {
        rhat
    };
    let (shape, _) = shape_table().iter().map(|&(a, r)| (a, (r - rhat_norm).powi(2))).fold(
        (SHAPE_MIN, f64::INFINITY),
        |best, cur| if cur.1 < best.1 { cur } else { best },
    );
    let ratio = (ln_gamma(2.0 / shape) - ln_gamma(1.0 / shape)).exp();
    let spread = (ln_gamma(1.0 / shape) - ln_gamma(3.0 / shape)).exp().sqrt();
    let mean = (rs - ls) * spread * ratio;
    Aggd {
        shape,
        mean,
        left_var,
        right_var,
    }
}

fn gaussian_kernel() -> [f64; WINDOW] {
    let half = (WINDOW / 2) as f64;
    let mut k = [0.0; WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with replicate padding.
fn blur(p: &[f64], w: usize, h: usize) -> Vec<f64> {
    let k = gaussian_kernel();
    let r = (WINDOW / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (0..WINDOW)
                .map(|i| k[i] * p[y * w + clamp(x as isize + i as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (0..WINDOW)
                .map(|i| k[i] * tmp[clamp(y as isize + i as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

/// Mean-subtracted contrast-normalized coefficients.
fn mscn(p: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mu = blur(p, w, h);
    let sq: Vec<f64> = p.iter().map(|v| v * v).collect();
    let mu2 = blur(&sq, w, h);
    p.iter()
        .zip(&mu)
        .zip(&mu2)
        .map(|((&v, &m), &m2)| (v - m) / ((m2 - m * m).abs().sqrt() + C))
        .collect()
}

fn scale_features(p: &[f64], w: usize, h: usize, out: &mut Vec<f64>) {
    let m = mscn(p, w, h);
    let fit = aggd_fit(&m);
    out.push(fit.shape);
    out.push(0.5 * (fit.left_var + fit.right_var));
    let pairs: [fn(&[f64], usize, usize, usize) -> f64; 4] = [
        |m, w, x, y| m[y * w + x] * m[y * w + x + 1],
        |m, w, x, y| m[y * w + x] * m[(y + 1) * w + x],
        |m, w, x, y| m[y * w + x] * m[(y + 1) * w + x + 1],
        |m, w, x, y| m[y * w + x + 1] * m[(y + 1) * w + x],
    ];
    for (k, pair) in pairs.iter().enumerate() {
        let (xn, yn) = match k {
            0 => (w - 1, h),
            1 => (w, h - 1),
            _ => (w - 1, h - 1),
        };
        let prod: Vec<f64> = (0..yn)
            .flat_map(|y| (0..xn).map(move |x| (x, y)))
            .map(|(x, y)| pair(&m, w, x, y))
            .collect();
        let f = aggd_fit(&prod);
        out.extend([f.shape, f.mean, f.left_var, f.right_var]);
    }
}

fn half(p: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (hw, hh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(hw * hh);
    for y in 0..hh {
        for x in 0..hw {
            let (x0, y0) = (2 * x, 2 * y);
            out.push(0.25 * (p[y0 * w + x0] + p[y0 * w + x0 + 1] + p[(y0 + 1) * w + x0] + p[(y0 + 1) * w + x0 + 1]));
        }
    }
    (out, hw, hh)
}

/// 36 natural-scene statistics: 18 per scale at full and half resolution.
/// RGB is reduced to luminance first.
pub fn brisque_features<T: Real>(img: &ImageBuffer<T>) -> Result<Vec<f64>> {
    let (w, h) = (img.width(), img.height());
    if w.min(h) < BRISQUE_MIN_SIDE {
        return Err(Error::ImageBelowMinimum {
            width: w,
            height: h,
            min: BRISQUE_MIN_SIDE,
            what: "BRISQUE",
        });
    }
    let lum: Vec<f64> = img.luminance().iter().map(|v| v.as_f64()).collect();
    let mut out = Vec::with_capacity(BRISQUE_LEN);
    scale_features(&lum, w, h, &mut out);
    let (p2, w2, h2) = half(&lum, w, h);
    scale_features(&p2, w2, h2, &mut out);
    Ok(out)
}

/// Affine quality model over min-max rescaled features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrisqueModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_min: Vec<f64>,
    pub feature_max: Vec<f64>,
}

impl BrisqueModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("weights", &self.weights),
            ("feature_min", &self.feature_min),
            ("feature_max", &self.feature_max),
        ] {
            if v.len() != BRISQUE_LEN {
                return Err(Error::invariant(format!(
                    "BRISQUE model `{name}` needs {BRISQUE_LEN} entries, got {}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invariant(format!(
                    "BRISQUE model `{name}` entries must be finite"
                )));
            }
        }
        if !self.bias.is_finite() {
            return Err(Error::invariant("BRISQUE model bias must be finite"));
        }
        Ok(())
    }

    /// Features rescaled to `[-1, 1]` by the model's ranges; a zero-width
    /// range maps to 0.
    pub fn rescale(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(self.feature_min.iter().zip(&self.feature_max))
            .map(|(&f, (&lo, &hi))| {
                if hi > lo {
                    -1.0 + 2.0 * (f - lo) / (hi - lo)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

pub fn brisque_score(features: &[f64], model: &BrisqueModel) -> Result<f64> {
    model.validate()?;
    if features.len() != BRISQUE_LEN {
        return Err(Error::DimensionMismatch {
            expected: BRISQUE_LEN,
            actual: features.len(),
        });
    }
    Ok(crate::scalar::dot(&model.weights, &model.rescale(features)) + model.bias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn normal_samples(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    fn laplace_samples(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = rand_distr::Exp::new(1.0).unwrap();
        (0..n)
            .map(|_| {
                let a: f64 = e.sample(&mut rng);
                let b: f64 = e.sample(&mut rng);
                a - b
            })
            .collect()
    }

    fn image_from(seed: u64, size: usize, noise: impl Fn(u64, usize) -> Vec<f64>, sd: f64) -> ImageBuffer<f64> {
        let px = noise(seed, size * size)
            .into_iter()
            .map(|v| (0.5 + sd * v).clamp(0.0, 1.0))
            .collect();
        ImageBuffer::new(size, size, 1, px).unwrap()
    }

    #[test]
    fn gaussian_samples_fit_shape_two() {
        let f = aggd_fit(&normal_samples(1, 20_000));
        assert!((f.shape - 2.0).abs() < 0.1, "{f:?}");
        assert!((f.left_var / f.right_var - 1.0).abs() < 0.1);
        assert!(f.mean.abs() < 0.05);
    }

    #[test]
    fn laplace_samples_fit_shape_one() {
        let f = aggd_fit(&laplace_samples(2, 20_000));
        assert!((f.shape - 1.0).abs() < 0.2, "{f:?}");
    }

    #[test]
    fn positive_skew_has_larger_right_variance() {
        let s: Vec<f64> = normal_samples(3, 5000)
            .into_iter()
            .map(|v| if v > 0.0 { 2.0 * v } else { 0.5 * v })
            .collect();
        let f = aggd_fit(&s);
        assert!(f.right_var > f.left_var);
        assert!(f.mean > 0.0);
        let pos: Vec<f64> = normal_samples(4, 1000).into_iter().map(f64::abs).collect();
        let f = aggd_fit(&pos);
        assert!(f.right_var > f.left_var && f.left_var == 0.0);
    }

    #[test]
    fn zero_samples_fit_degenerate() {
        let f = aggd_fit(&[0.0; 10]);
        assert_eq!((f.shape, f.mean, f.left_var, f.right_var), (2.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_image_has_zero_mscn() {
        let img = ImageBuffer::filled(40, 40, 1, 0.6).unwrap();
        let lum: Vec<f64> = img.pixels().to_vec();
        assert!(mscn(&lum, 40, 40).iter().all(|v| v.abs() < 1e-9));
        let f = brisque_features(&img).unwrap();
        assert_eq!(f.len(), BRISQUE_LEN);
        assert!(f[1].abs() < 1e-12 && f[19].abs() < 1e-12);
    }

    // Noise well below C keeps the contrast normalization close to a fixed
    // scale, so the coefficients inherit the noise law.
    #[test]
    fn low_contrast_noise_images_match_their_law() {
        let g = brisque_features(&image_from(5, 96, normal_samples, 0.001)).unwrap();
        assert!((g[0] - 2.0).abs() < 0.3, "gaussian shape {}", g[0]);
    }

    // Local mean subtraction mixes neighbours into each coefficient, pulling
    // a Laplace field part of the way toward Gaussian.
    #[test]
    fn low_contrast_laplace_image_stays_heavy_tailed() {
        let l = brisque_features(&image_from(6, 96, laplace_samples, 0.001)).unwrap();
        assert!(l[0] > 1.0 && l[0] < 1.5, "laplace shape {}", l[0]);
    }

    #[test]
    fn high_contrast_noise_normalization_lightens_tails() {
        let g = brisque_features(&image_from(5, 96, normal_samples, 0.08)).unwrap();
        assert!(g[0] > 2.5, "gaussian shape {}", g[0]);
    }

    #[test]
    fn invariant_to_constant_offset() {
        let a = image_from(7, 64, normal_samples, 0.05);
        let b = ImageBuffer::new(64, 64, 1, a.pixels().iter().map(|v| v + 0.1).collect()).unwrap();
        let (fa, fb) = (brisque_features(&a).unwrap(), brisque_features(&b).unwrap());
        for (x, y) in fa.iter().zip(&fb) {
            assert!((x - y).abs() < 1e-3, "{x} vs {y}");
        }
    }

    #[test]
    fn rgb_uses_luminance() {
        let g = image_from(8, 32, normal_samples, 0.1);
        let rgb = ImageBuffer::new(32, 32, 3, g.pixels().iter().flat_map(|&v| [v, v, v]).collect()).unwrap();
        let (a, b) = (brisque_features(&g).unwrap(), brisque_features(&rgb).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn small_images_rejected() {
        let img = ImageBuffer::filled(31, 64, 1, 0.5).unwrap();
        assert!(matches!(brisque_features(&img), Err(Error::ImageBelowMinimum { .. })));
    }

    fn model(weights: Vec<f64>, bias: f64) -> BrisqueModel {
        BrisqueModel {
            weights,
            bias,
            feature_min: vec![0.0; BRISQUE_LEN],
            feature_max: vec![2.0; BRISQUE_LEN],
        }
    }

    #[test]
    fn linear_model_scoring() {
        let f: Vec<f64> = (0..BRISQUE_LEN).map(|i| i as f64 * 0.05).collect();
        assert_eq!(brisque_score(&f, &model(vec![0.0; BRISQUE_LEN], 4.5)).unwrap(), 4.5);
        let mut w = vec![0.0; BRISQUE_LEN];
        w[3] = 1.0;
        let s = brisque_score(&f, &model(w, 1.0)).unwrap();
        assert!((s - (-1.0 + 2.0 * 0.15 / 2.0 + 1.0)).abs() < 1e-12);
        assert!(brisque_score(&f[..10], &model(vec![0.0; BRISQUE_LEN], 0.0)).is_err());
        assert!(brisque_score(&f, &model(vec![0.0; 3], 0.0)).is_err());
    }
}
