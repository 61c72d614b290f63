//! Latent codes, attribute hyperplanes and the signed-distance edit algebra.
//!
//! A hyperplane with unit normal `n` splits the latent space into two
//! semantic half-spaces. The signed editing distance of a code `z` is `nᵀz`
//! (no bias), and an edit moves the code along the normal: `z + αn`.

use std::collections::BTreeMap;

use crate::error::{check_dim, Error, Result};
use crate::scalar::{dot, norm2, Real};

/// Which generator input space a latent code lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentSpace {
    Z,
    W,
    /// Per-layer codes stacked into one flat vector.
    Layered(usize),
}

impl LatentSpace {
    pub fn tag(&self) -> &'static str {
        match self {
            LatentSpace::Z => "Z",
            LatentSpace::W => "W",
            LatentSpace::Layered(_) => "LAYERED",
        }
    }
}

/// A point in a generator's input space.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode<T> {
    values: Vec<T>,
    space: LatentSpace,
    pub meta: BTreeMap<String, String>,
}

impl<T: Real> LatentCode<T> {
    pub fn new(values: Vec<T>, space: LatentSpace) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invariant("latent dim must be >= 1"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invariant(format!(
                "latent entries must be finite (entry {i} is not)"
            )));
        }
        if let LatentSpace::Layered(k) = space {
            if k == 0 || !values.len().is_multiple_of(k) {
                return Err(Error::invariant(format!(
                    "layered latent dim {} must be a multiple of layer count {k}",
                    values.len()
                )));
            }
        }
        Ok(Self {
            values,
            space,
            meta: BTreeMap::new(),
        })
    }

    /// Code in the `Z` space.
    pub fn from_vec(values: Vec<T>) -> Result<Self> {
        Self::new(values, LatentSpace::Z)
    }

    pub fn zeros(dim: usize, space: LatentSpace) -> Result<Self> {
        Self::new(vec![T::zero(); dim], space)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn space(&self) -> LatentSpace {
        self.space
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Same space and metadata, new values. Fails if the values break the
    /// latent invariants.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        check_dim(self.dim(), values.len())?;
        let mut out = Self::new(values, self.space)?;
        out.meta = self.meta.clone();
        Ok(out)
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }
}

/// Validation accuracies recorded when a hyperplane is trained.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainStats {
    pub val_accuracy: Option<f64>,
    pub rem_accuracy: Option<f64>,
}

/// Unit normal plus classification bias for one binary attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane<T> {
    normal: Vec<T>,
    bias: T,
    pub attribute: String,
    pub train_stats: TrainStats,
}

const UNIT_TOL: f64 = 1e-9;

impl<T: Real> Hyperplane<T> {
    /// Builds a hyperplane from an already unit-length normal.
    pub fn new(normal: Vec<T>, bias: T, attribute: impl Into<String>) -> Result<Self> {
        if normal.is_empty() {
            return Err(Error::invariant("hyperplane dim must be >= 1"));
        }
        if normal.iter().any(|v| !v.is_finite()) || !bias.is_finite() {
            return Err(Error::invariant("hyperplane entries must be finite"));
        }
        let n = norm2(&normal).as_f64();
        // f32 cannot hold a norm to 1e-9; allow its epsilon instead.
        let tol = UNIT_TOL.max(4.0 * T::epsilon().as_f64());
        if (n - 1.0).abs() > tol {
            return Err(Error::invariant(format!(
                "hyperplane normal must have unit norm (|n| = {n})"
            )));
        }
        Ok(Self {
            normal,
            bias,
            attribute: attribute.into(),
            train_stats: TrainStats::default(),
        })
    }

    /// Normalizes an arbitrary `(w, b)` pair so that `‖w‖ = 1`, rescaling the
    /// bias by the same factor. The decision rule `sign(wᵀz + b)` is unchanged.
    pub fn from_unnormalized(weights: &[T], bias: T, attribute: impl Into<String>) -> Result<Self> {
        let n = norm2(weights);
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::invariant("hyperplane normal must be nonzero and finite"));
        }
        let normal = weights.iter().map(|&w| w / n).collect();
        Self::new(normal, bias / n, attribute)
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    pub fn normal(&self) -> &[T] {
        &self.normal
    }

    pub fn bias(&self) -> T {
        self.bias
    }
}

/// Signed offset along a hyperplane normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EditStep<T>(T);

impl<T: Real> EditStep<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::invariant("edit step must be finite"));
        }
        Ok(Self(alpha))
    }

    pub fn alpha(&self) -> T {
        self.0
    }
}

/// Signed editing distance `nᵀz`. The bias is not part of it.
pub fn distance<T: Real>(h: &Hyperplane<T>, z: &LatentCode<T>) -> Result<T> {
    check_dim(h.dim(), z.dim())?;
    Ok(dot(h.normal(), z.values()))
}

/// `z + αn`, keeping the space tag and metadata of `z`.
///
/// Layered codes are moved as one flat vector.
pub fn edit<T: Real>(z: &LatentCode<T>, h: &Hyperplane<T>, step: EditStep<T>) -> Result<LatentCode<T>> {
    check_dim(h.dim(), z.dim())?;
    let a = step.alpha();
    let values = z
        .values()
        .iter()
        .zip(h.normal())
        .map(|(&zi, &ni)| zi + a * ni)
        .collect();
    z.with_values(values)
}

/// SVM decision `sign(nᵀz + bias)`; an exact zero classifies as `+1`.
pub fn classify<T: Real>(h: &Hyperplane<T>, z: &LatentCode<T>) -> Result<i8> {
    check_dim(h.dim(), z.dim())?;
    let v = dot(h.normal(), z.values()) + h.bias();
    Ok(if v < T::zero() { -1 } else { 1 })
}
