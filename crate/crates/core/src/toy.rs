//! Small deterministic models with analytic derivatives: a procedural blob
//! generator (plain and label-conditioned), latent and brightness scorers,
//! an embedder and a critic. Everything is seeded and platform independent
//! up to floating point rounding.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::image::{ImageBuffer, Shape};
use crate::latent::LatentCode;
use crate::losses::Critic;
use crate::metrics::Embedder;
use crate::recovery::{ConditionalGenerator, Generator};
use crate::scalar::{dot, norm2, Real};
use crate::trainer::Scorer;

const RADIUS_MID: f64 = 0.45;
const RADIUS_SPREAD: f64 = 0.2;
const INTENSITY_MID: f64 = 1.0;
const INTENSITY_SPREAD: f64 = 0.6;
/// Blob-center shift per unit of identity projection.
const IDENTITY_SHIFT: f64 = 0.15;

/// Per-blob squash map: `(cx, cy, r, intensity) = mid + spread · tanh(A z₄ + b)`.
#[derive(Debug, Clone, PartialEq)]
struct BlobMap {
    mix: [[f64; 4]; 4],
    offset: [f64; 4],
    mid: [f64; 4],
    spread: [f64; 4],
    color: [f64; 3],
    /// Identity directions driving the center offsets (conditional only).
    shift_x: [f64; 4],
    shift_y: [f64; 4],
}

#[derive(Debug, Clone, Copy)]
struct BlobParams<T> {
    cx: T,
    cy: T,
    r: T,
    intensity: T,
    /// `d(param)/du` for the four squashed parameters.
    dparam: [T; 4],
    tanh_u: [T; 4],
}

#[derive(Debug, Clone, PartialEq)]
struct BlobField {
    dim: usize,
    size: usize,
    channels: usize,
    blobs: Vec<BlobMap>,
}

impl BlobField {
    fn new(dim: usize, size: usize, channels: usize, seed: u64) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(4) {
            return Err(Error::arg(format!(
                "blob latent dim must be a positive multiple of 4, got {dim}"
            )));
        }
        if size == 0 {
            return Err(Error::arg("blob image size must be >= 1"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::arg(format!("blob channels must be 1 or 3, got {channels}")));
        }
        let m = dim / 4;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spread_c = if m == 1 {
            0.35
        } else {
            0.3f64.min(0.9 * 0.45 * (std::f64::consts::PI / m as f64).sin())
        };
        let blobs = (0..m)
            .map(|k| {
                let (hx, hy) = if m == 1 {
                    (0.0, 0.0)
                } else {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                    (0.45 * a.cos(), 0.45 * a.sin())
                };
                let mut mix = [[0.0; 4]; 4];
                for (i, row) in mix.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = if i == j {
                            rng.random_range(0.7..1.1)
                        } else {
                            rng.random_range(-0.15..0.15)
                        };
                    }
                }
                let offset = std::array::from_fn(|_| rng.random_range(-0.15..0.15));
                let color = if channels == 1 {
                    [1.0, 0.0, 0.0]
                } else {
                    std::array::from_fn(|_| rng.random_range(0.5..1.0))
                };
                let shift_x = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                let shift_y = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                BlobMap {
                    mix,
                    offset,
                    mid: [hx, hy, RADIUS_MID, INTENSITY_MID],
                    spread: [spread_c, spread_c, RADIUS_SPREAD, INTENSITY_SPREAD],
                    color,
                    shift_x,
                    shift_y,
                }
            })
            .collect();
        Ok(Self {
            dim,
            size,
            channels,
            blobs,
        })
    }

    fn shape(&self) -> Shape {
        (self.size, self.size, self.channels)
    }

    fn params<T: Real>(&self, z: &[T], identity: Option<&[T]>) -> Vec<BlobParams<T>> {
        self.blobs
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let zk = &z[4 * k..4 * k + 4];
                let mut tanh_u = [T::zero(); 4];
                let mut p = [T::zero(); 4];
                let mut dparam = [T::zero(); 4];
                for i in 0..4 {
                    let mut u = T::lit(b.offset[i]);
                    for j in 0..4 {
                        u += T::lit(b.mix[i][j]) * zk[j];
                    }
                    let t = u.tanh();
                    tanh_u[i] = t;
                    p[i] = T::lit(b.mid[i]) + T::lit(b.spread[i]) * t;
                    dparam[i] = T::lit(b.spread[i]) * (T::one() - t * t);
                }
                if let Some(id) = identity {
                    let s = T::lit(IDENTITY_SHIFT);
                    for j in 0..4 {
                        p[0] += s * T::lit(b.shift_x[j]) * id[j];
                        p[1] += s * T::lit(b.shift_y[j]) * id[j];
                    }
                }
                BlobParams {
                    cx: p[0],
                    cy: p[1],
                    r: p[2],
                    intensity: p[3],
                    dparam,
                    tanh_u,
                }
            })
            .collect()
    }

    #[inline]
    fn coord<T: Real>(i: usize, n: usize) -> T {
        T::lit(2.0 * (i as f64 + 0.5) / n as f64 - 1.0)
    }

    /// Raw field `s` laid out like the image, before the output squash.
    fn field<T: Real>(&self, params: &[BlobParams<T>]) -> Vec<T> {
        let (n, c) = (self.size, self.channels);
        let mut out = vec![T::zero(); n * n * c];
        for y in 0..n {
            let py = Self::coord::<T>(y, n);
            for x in 0..n {
                let px = Self::coord::<T>(x, n);
                for (b, p) in self.blobs.iter().zip(params) {
                    let dx = px - p.cx;
                    let dy = py - p.cy;
                    let g = p.intensity * (-(dx * dx + dy * dy) / (p.r * p.r)).exp();
                    for ch in 0..c {
                        out[(y * n + x) * c + ch] += T::lit(b.color[ch]) * g;
                    }
                }
            }
        }
        out
    }

    /// Pulls a gradient on the raw field back to `(∂/∂z, ∂/∂cx, ∂/∂cy)` where
    /// the center partials are kept per blob for the identity chain rule.
    fn field_vjp<T: Real>(&self, z_dim: usize, params: &[BlobParams<T>], g_field: &[T]) -> (Vec<T>, Vec<(T, T)>) {
        let (n, c) = (self.size, self.channels);
        let two = T::lit(2.0);
        let mut gz = vec![T::zero(); z_dim];
        let mut gcenter = Vec::with_capacity(params.len());
        for (k, (b, p)) in self.blobs.iter().zip(params).enumerate() {
            let (mut g_cx, mut g_cy, mut g_r, mut g_i) = (T::zero(), T::zero(), T::zero(), T::zero());
            let r2 = p.r * p.r;
            for y in 0..n {
                let py = Self::coord::<T>(y, n);
                for x in 0..n {
                    let px = Self::coord::<T>(x, n);
                    let base = (y * n + x) * c;
                    let mut up = T::zero();
                    for ch in 0..c {
                        up += T::lit(b.color[ch]) * g_field[base + ch];
                    }
                    if up == T::zero() {
                        continue;
                    }
                    let dx = px - p.cx;
                    let dy = py - p.cy;
                    let rho2 = dx * dx + dy * dy;
                    let gauss = (-rho2 / r2).exp();
                    let ig = p.intensity * gauss * up;
                    g_i += gauss * up;
                    g_cx += ig * two * dx / r2;
                    g_cy += ig * two * dy / r2;
                    g_r += ig * two * rho2 / (r2 * p.r);
                }
            }
            gcenter.push((g_cx, g_cy));
            let gp = [g_cx, g_cy, g_r, g_i];
            let gu: [T; 4] = std::array::from_fn(|i| gp[i] * p.dparam[i]);
            for j in 0..4 {
                let mut s = T::zero();
                for (i, &g) in gu.iter().enumerate() {
                    s += T::lit(b.mix[i][j]) * g;
                }
                gz[4 * k + j] += s;
            }
            let _ = p.tanh_u;
        }
        (gz, gcenter)
    }
}

/// Procedural generator: each group of four latent coordinates places one
/// Gaussian blob; pixels are `tanh` of the summed blob field.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobGenerator {
    field: BlobField,
}

impl BlobGenerator {
    pub fn new(dim: usize, size: usize, channels: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            field: BlobField::new(dim, size, channels, seed)?,
        })
    }
}

impl<T: Real> Generator<T> for BlobGenerator {
    fn latent_dim(&self) -> usize {
        self.field.dim
    }

    fn output_shape(&self) -> Shape {
        self.field.shape()
    }

    fn synthesize(&self, z: &LatentCode<T>) -> Result<ImageBuffer<T>> {
        check_dim(self.field.dim, z.dim())?;
        let params = self.field.params(z.values(), None);
        let px = self.field.field(&params).into_iter().map(|s| s.tanh()).collect();
        let (w, h, c) = self.field.shape();
        ImageBuffer::new(w, h, c, px)
    }

    fn vjp(&self, z: &LatentCode<T>, upstream: &[T]) -> Result<Vec<T>> {
        check_dim(self.field.dim, z.dim())?;
        let (w, h, c) = self.field.shape();
        check_dim(w * h * c, upstream.len())?;
        let params = self.field.params(z.values(), None);
        let s = self.field.field(&params);
        let g: Vec<T> = s
            .iter()
            .zip(upstream)
            .map(|(&v, &u)| {
                let t = v.tanh();
                u * (T::one() - t * t)
            })
            .collect();
        Ok(self.field.field_vjp(z.dim(), &params, &g).0)
    }
}

/// Blob generator conditioned on `(beauty, identity)`: a brightness gain and
/// background lift increasing in beauty, and blob centers shifted linearly
/// by the first four identity entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyConditionalGenerator {
    field: BlobField,
    identity_dim: usize,
}

const GAIN_BASE: f64 = 0.6;
const GAIN_SLOPE: f64 = 0.8;
const LIFT: f64 = 0.3;

impl ToyConditionalGenerator {
    pub fn new(dim: usize, size: usize, channels: usize, identity_dim: usize, seed: u64) -> Result<Self> {
        if identity_dim < 4 {
            return Err(Error::arg(format!("identity dim must be >= 4, got {identity_dim}")));
        }
        Ok(Self {
            field: BlobField::new(dim, size, channels, seed)?,
            identity_dim,
        })
    }

    fn check<T: Real>(&self, z: &LatentCode<T>, beauty: T, identity: &[T]) -> Result<()> {
        check_dim(self.field.dim, z.dim())?;
        check_dim(self.identity_dim, identity.len())?;
        if !beauty.is_finite() || identity.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("label entries must be finite"));
        }
        Ok(())
    }
}

impl<T: Real> ConditionalGenerator<T> for ToyConditionalGenerator {
    fn latent_dim(&self) -> usize {
        self.field.dim
    }

    fn identity_dim(&self) -> usize {
        self.identity_dim
    }

    fn output_shape(&self) -> Shape {
        self.field.shape()
    }

    /// Negative arguments (beauty below zero) are clamped to a black pixel.
    fn synthesize_raw(&self, z: &LatentCode<T>, beauty: T, identity: &[T]) -> Result<ImageBuffer<T>> {
        self.check(z, beauty, identity)?;
        let params = self.field.params(z.values(), Some(identity));
        let gain = T::lit(GAIN_BASE) + T::lit(GAIN_SLOPE) * beauty;
        let lift = T::lit(LIFT) * beauty;
        let px = self
            .field
            .field(&params)
            .into_iter()
            .map(|s| (gain * s + lift).tanh().max(T::zero()))
            .collect();
        let (w, h, c) = self.field.shape();
        ImageBuffer::new(w, h, c, px)
    }

    fn vjp_raw(&self, z: &LatentCode<T>, beauty: T, identity: &[T], upstream: &[T]) -> Result<(Vec<T>, T, Vec<T>)> {
        self.check(z, beauty, identity)?;
        let (w, h, c) = self.field.shape();
        check_dim(w * h * c, upstream.len())?;
        let params = self.field.params(z.values(), Some(identity));
        let s = self.field.field(&params);
        let gain = T::lit(GAIN_BASE) + T::lit(GAIN_SLOPE) * beauty;
        let lift = T::lit(LIFT) * beauty;
        let mut g_beauty = T::zero();
        let g_field: Vec<T> = s
            .iter()
            .zip(upstream)
            .map(|(&v, &u)| {
                let t = (gain * v + lift).tanh();
                let d = u * (T::one() - t * t);
                g_beauty += d * (T::lit(GAIN_SLOPE) * v + T::lit(LIFT));
                d * gain
            })
            .collect();
        let (gz, gcenter) = self.field.field_vjp(z.dim(), &params, &g_field);
        let mut g_identity = vec![T::zero(); self.identity_dim];
        let shift = T::lit(IDENTITY_SHIFT);
        for (b, &(gx, gy)) in self.field.blobs.iter().zip(&gcenter) {
            for j in 0..4 {
                g_identity[j] += shift * (T::lit(b.shift_x[j]) * gx + T::lit(b.shift_y[j]) * gy);
            }
        }
        Ok((gz, g_beauty, g_identity))
    }
}

/// Score `wᵀz` for a seeded unit vector `w`; the image is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentLinearScorer {
    weights: Vec<f64>,
}

impl LatentLinearScorer {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("scorer dim must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm2(&w);
        w.iter_mut().for_each(|v| *v /= n);
        Ok(Self { weights: w })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl<T: Real> Scorer<T> for LatentLinearScorer {
    fn score(&self, _image: &ImageBuffer<T>, latent: &LatentCode<T>) -> Result<T> {
        check_dim(self.weights.len(), latent.dim())?;
        let w: Vec<T> = self.weights.iter().map(|&v| T::lit(v)).collect();
        Ok(dot(&w, latent.values()))
    }
}

/// Mean luminance of the image.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BrightnessScorer;

impl<T: Real> Scorer<T> for BrightnessScorer {
    fn score(&self, image: &ImageBuffer<T>, _latent: &LatentCode<T>) -> Result<T> {
        Ok(crate::scalar::mean(&image.luminance()))
    }
}

/// 8×8 area-averaged luminance, mean-removed and normalized. A flat image
/// maps to the first basis vector.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ToyEmbedder;

pub const EMBED_GRID: usize = 8;

impl<T: Real> Embedder<T> for ToyEmbedder {
    fn embed(&self, image: &ImageBuffer<T>) -> Result<Vec<T>> {
        let lum = image.luminance();
        let (w, h) = (image.width(), image.height());
        let g = EMBED_GRID;
        let mut cells = Vec::with_capacity(g * g);
        for cy in 0..g {
            let (y0, y1) = (cy * h / g, ((cy + 1) * h / g).max(cy * h / g + 1).min(h));
            let y0 = y0.min(h - 1);
            for cx in 0..g {
                let (x0, x1) = (cx * w / g, ((cx + 1) * w / g).max(cx * w / g + 1).min(w));
                let x0 = x0.min(w - 1);
                let mut s = T::zero();
                for y in y0..y1.max(y0 + 1) {
                    for x in x0..x1.max(x0 + 1) {
                        s += lum[y * w + x];
                    }
                }
                let count = (y1.max(y0 + 1) - y0) * (x1.max(x0 + 1) - x0);
                cells.push(s / T::from_usize_lossy(count));
            }
        }
        let m = crate::scalar::mean(&cells);
        cells.iter_mut().for_each(|v| *v -= m);
        let n = norm2(&cells);
        if !(n > T::lit(1e-12)) {
            let mut e = vec![T::zero(); g * g];
            e[0] = T::one();
            return Ok(e);
        }
        Ok(cells.into_iter().map(|v| v / n).collect())
    }
}

/// Smooth critic `mean(tanh(2x - 1)) + ½(mean(x) - ½)²`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ToyCritic;

impl<T: Real> Critic<T> for ToyCritic {
    fn score(&self, image: &ImageBuffer<T>) -> Result<T> {
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let n = T::from_usize_lossy(image.len());
        let s: T = image.pixels().iter().map(|&x| (two * x - T::one()).tanh()).sum();
        let m = image.mean() - half;
        Ok(s / n + half * m * m)
    }

    fn gradient(&self, image: &ImageBuffer<T>) -> Result<Vec<T>> {
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let n = T::from_usize_lossy(image.len());
        let m = image.mean() - half;
        Ok(image
            .pixels()
            .iter()
            .map(|&x| {
                let t = (two * x - T::one()).tanh();
                (two * (T::one() - t * t) + m) / n
            })
            .collect())
    }
}

/// Kinds accepted by [`make_toy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyKind {
    Blob,
    CondBlob,
    LatentLinear,
    Brightness,
    Embedder,
    Critic,
}

impl FromStr for ToyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "blob" => ToyKind::Blob,
            "condblob" => ToyKind::CondBlob,
            "latentlinear" => ToyKind::LatentLinear,
            "brightness" => ToyKind::Brightness,
            "embedder" => ToyKind::Embedder,
            "critic" => ToyKind::Critic,
            other => return Err(Error::UnknownTag(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ToyModel {
    Blob(BlobGenerator),
    CondBlob(ToyConditionalGenerator),
    LatentLinear(LatentLinearScorer),
    Brightness(BrightnessScorer),
    Embedder(ToyEmbedder),
    Critic(ToyCritic),
}

/// Parsed `kind:key=value,...` model string. A leading `role=` such as
/// `scorer=` is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    pub kind: ToyKind,
    pub params: BTreeMap<String, String>,
}

impl FromStr for ToySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let s = match s.split_once('=') {
            Some((role, rest)) if !role.contains(':') && !role.contains(',') && rest.contains(':') => rest,
            _ => s,
        };
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let kind = kind.parse()?;
        let mut params = BTreeMap::new();
        for kv in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::arg(format!("model parameter `{kv}` is not key=value")))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { kind, params })
    }
}

impl ToySpec {
    pub fn build(&self) -> Result<ToyModel> {
        let seed = self.get("seed", 0u64)?;
        make_toy(self.kind, seed, &self.params)
    }

    fn get<V: FromStr>(&self, key: &str, default: V) -> Result<V> {
        param(&self.params, key, default)
    }
}

fn param<V: FromStr>(params: &BTreeMap<String, String>, key: &str, default: V) -> Result<V> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::arg(format!("invalid value `{v}` for model parameter `{key}`"))),
    }
}

const KNOWN_KEYS: &[&str] = &["seed", "d", "size", "channels", "identity"];

/// Builds a seeded toy model. Parameters: `d` (latent dim, default 8),
/// `size` (image side, default 64), `channels` (1), `identity` (conditional
/// identity dim, default 8).
pub fn make_toy(kind: ToyKind, seed: u64, params: &BTreeMap<String, String>) -> Result<ToyModel> {
    if let Some(k) = params.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(Error::arg(format!("unknown model parameter `{k}`")));
    }
    let d = param(params, "d", 8usize)?;
    let size = param(params, "size", 64usize)?;
    let channels = param(params, "channels", 1usize)?;
    Ok(match kind {
        ToyKind::Blob => ToyModel::Blob(BlobGenerator::new(d, size, channels, seed)?),
        ToyKind::CondBlob => {
            let ident = param(params, "identity", 8usize)?;
            ToyModel::CondBlob(ToyConditionalGenerator::new(d, size, channels, ident, seed)?)
        }
        ToyKind::LatentLinear => ToyModel::LatentLinear(LatentLinearScorer::new(d, seed)?),
        ToyKind::Brightness => ToyModel::Brightness(BrightnessScorer),
        ToyKind::Embedder => ToyModel::Embedder(ToyEmbedder),
        ToyKind::Critic => ToyModel::Critic(ToyCritic),
    })
}
