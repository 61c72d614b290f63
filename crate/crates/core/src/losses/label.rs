use super::Loss;
use crate::error::{check_dim, Error, Result};
use crate::scalar::{norm2, Real};

/// Conditioning label: a beauty score plus a unit identity embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector<T> {
    beauty: T,
    identity: Vec<T>,
}

impl<T: Real> LabelVector<T> {
    /// `identity` may be empty when the label carries a score only.
    pub fn new(beauty: T, identity: Vec<T>) -> Result<Self> {
        if !(beauty >= T::zero() && beauty <= T::one()) {
            return Err(Error::invariant(format!(
                "beauty score must lie in [0,1] (got {beauty})"
            )));
        }
        if !identity.is_empty() {
            let n = norm2(&identity).as_f64();
            if !n.is_finite() || (n - 1.0).abs() > 1e-6_f64.max(8.0 * T::epsilon().as_f64()) {
                return Err(Error::invariant(format!(
                    "identity embedding must have unit norm (got {n})"
                )));
            }
        }
        Ok(Self { beauty, identity })
    }

    /// Normalizes `identity` before validating.
    pub fn normalized(beauty: T, identity: Vec<T>) -> Result<Self> {
        if identity.is_empty() {
            return Self::new(beauty, identity);
        }
        let n = norm2(&identity);
        if !(n > T::zero()) {
            return Err(Error::invariant("identity embedding must be nonzero"));
        }
        Self::new(beauty, identity.into_iter().map(|v| v / n).collect())
    }

    pub fn beauty(&self) -> T {
        self.beauty
    }

    pub fn identity(&self) -> &[T] {
        &self.identity
    }

    /// `beauty ⧺ identity`.
    pub fn concat(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(1 + self.identity.len());
        v.push(self.beauty);
        v.extend_from_slice(&self.identity);
        v
    }

    pub fn len(&self) -> usize {
        1 + self.identity.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Mean absolute difference over concatenated label vectors; the gradient is
/// taken with respect to `pred` with `sign(0) = 0`.
pub fn label_l1_values<T: Real>(pred: &[T], target: &[T]) -> Result<Loss<T>> {
    check_dim(target.len(), pred.len())?;
    if pred.is_empty() {
        return Err(Error::arg("label vectors must be non-empty"));
    }
    let n = T::from_usize_lossy(pred.len());
    let mut value = T::zero();
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            value += (p - t).abs();
            (p - t).sign0() / n
        })
        .collect();
    Ok(Loss { value: value / n, grad })
}

pub fn label_l1<T: Real>(pred: &LabelVector<T>, target: &LabelVector<T>) -> Result<Loss<T>> {
    label_l1_values(&pred.concat(), &target.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{central_gradient, max_rel_err, random_pixels};

    #[test]
    fn examples() {
        let a = LabelVector::new(0.3f64, vec![]).unwrap();
        let b = LabelVector::new(0.7, vec![]).unwrap();
        assert_eq!(label_l1(&a, &a).unwrap().value, 0.0);
        assert!((label_l1(&a, &b).unwrap().value - 0.4).abs() < 1e-15);
        assert_eq!(label_l1(&a, &b).unwrap().value, label_l1(&b, &a).unwrap().value);
    }

    #[test]
    fn random_513_dim_matches_direct_mean() {
        let p = random_pixels(8, 513, -1.0, 1.0);
        let t = random_pixels(9, 513, -1.0, 1.0);
        let a = LabelVector::normalized(0.25, p[1..].to_vec()).unwrap();
        let b = LabelVector::normalized(0.8, t[1..].to_vec()).unwrap();
        let (ca, cb) = (a.concat(), b.concat());
        let mut s = 0.0;
        for i in 0..513 {
            s += (ca[i] - cb[i]).abs();
        }
        assert!((label_l1(&a, &b).unwrap().value - s / 513.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = random_pixels(3, 16, -1.0, 1.0);
        let t = random_pixels(4, 16, -1.0, 1.0);
        let analytic = label_l1_values(&p, &t).unwrap().grad;
        let numeric = central_gradient(&p, 1e-6, |x| label_l1_values(x, &t).unwrap().value);
        assert!(max_rel_err(&analytic, &numeric) < 1e-3);
    }

    #[test]
    fn invariants() {
        assert!(LabelVector::new(1.2, vec![]).is_err());
        assert!(LabelVector::new(0.5, vec![1.0, 1.0]).is_err());
        assert!(LabelVector::normalized(0.5, vec![0.0, 0.0]).is_err());
        assert!(label_l1_values(&[1.0], &[1.0, 2.0]).is_err());
    }
}
