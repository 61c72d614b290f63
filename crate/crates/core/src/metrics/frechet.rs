use crate::error::{check_dim, Error, Result};
use crate::scalar::Real;

/// `n` feature rows of dimension `d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet<T> {
    n: usize,
    d: usize,
    rows: Vec<T>,
}

impl<T: Real> FeatureSet<T> {
    pub fn new(n: usize, d: usize, rows: Vec<T>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invariant(format!(
                "feature set needs n >= 1 and d >= 1 (got {n}x{d})"
            )));
        }
        if rows.len() != n * d {
            return Err(Error::invariant(format!(
                "feature set header says {n}x{d} but {} values were given",
                rows.len()
            )));
        }
        if let Some(i) = rows.iter().position(|v| !v.is_finite()) {
            return Err(Error::invariant(format!(
                "feature set entries must be finite (row {}, column {})",
                i / d,
                i % d
            )));
        }
        Ok(Self { n, d, rows })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        for r in rows {
            check_dim(d, r.len())?;
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[T] {
        &self.rows
    }
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    pub fn new(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invariant(format!(
                "{n}x{n} matrix needs {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![T::zero(); n * n];
        (0..n).for_each(|i| data[i * n + i] = T::one());
        Self { n, data }
    }

    pub fn diag(d: &[T]) -> Self {
        let n = d.len();
        let mut data = vec![T::zero(); n * n];
        d.iter().enumerate().for_each(|(i, &v)| data[i * n + i] = v);
        Self { n, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.at(i, i)).sum()
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_dim(self.n, other.n)?;
        let n = self.n;
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.at(i, k);
                for j in 0..n {
                    out[i * n + j] += a * other.at(k, j);
                }
            }
        }
        Ok(Self { n, data: out })
    }

    pub fn max_asymmetry(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.n {
            for j in i + 1..self.n {
                m = m.max((self.at(i, j) - self.at(j, i)).abs());
            }
        }
        m
    }

    fn symmetrized(&self) -> Self {
        let n = self.n;
        let half = T::lit(0.5);
        let mut data = self.data.clone();
        for i in 0..n {
            for j in i + 1..n {
                let v = half * (self.at(i, j) + self.at(j, i));
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self { n, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats<T> {
    pub mean: Vec<T>,
    pub cov: SymMatrix<T>,
}

impl<T: Real> GaussianStats<T> {
    pub fn new(mean: Vec<T>, cov: SymMatrix<T>) -> Result<Self> {
        check_dim(mean.len(), cov.n)?;
        if cov.max_asymmetry().as_f64() > 1e-9 {
            return Err(Error::NotSymmetric(cov.max_asymmetry().as_f64()));
        }
        if let Some(i) = (0..cov.n).find(|&i| cov.at(i, i).as_f64() < -1e-12) {
            return Err(Error::invariant(format!("covariance diagonal entry {i} is negative")));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased covariance; a single row gives a zero covariance.
pub fn gaussian_stats<T: Real>(f: &FeatureSet<T>) -> GaussianStats<T> {
    let (n, d) = (f.count(), f.dim());
    let nt = T::from_usize_lossy(n);
    let mut mean = vec![T::zero(); d];
    for i in 0..n {
        mean.iter_mut().zip(f.row(i)).for_each(|(m, &v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= nt);
    let mut cov = vec![T::zero(); d * d];
    if n > 1 {
        for i in 0..n {
            let c: Vec<T> = f.row(i).iter().zip(&mean).map(|(&v, &m)| v - m).collect();
            for a in 0..d {
                for b in a..d {
                    cov[a * d + b] += c[a] * c[b];
                }
            }
        }
        let denom = T::from_usize_lossy(n - 1);
        for a in 0..d {
            for b in a..d {
                let v = cov[a * d + b] / denom;
                cov[a * d + b] = v;
                cov[b * d + a] = v;
            }
        }
    }
    GaussianStats {
        mean,
        cov: SymMatrix { n: d, data: cov },
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the
/// eigenvalues and the eigenvectors as the columns of a row-major matrix.
pub fn jacobi_eigen<T: Real>(m: &SymMatrix<T>) -> (Vec<T>, SymMatrix<T>) {
    let n = m.n;
    let mut a = m.symmetrized().data;
    let mut v = SymMatrix::<T>::identity(n).data;
    let scale: T = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let tol = T::epsilon() * T::epsilon() * scale * scale;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= tol || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta.is_infinite() { T::zero() } else { t };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| a[i * n + i]).collect();
    (eig, SymMatrix { n, data: v })
}

/// Principal square root of a symmetric positive semidefinite matrix.
/// Eigenvalues down to `-1e-8` (scaled by the largest magnitude when that
/// exceeds one) are treated as zero.
pub fn sym_matrix_sqrt<T: Real>(m: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let asym = m.max_asymmetry().as_f64();
    if asym > 1e-6 {
        return Err(Error::NotSymmetric(asym));
    }
    let (eig, v) = jacobi_eigen(m);
    let n = m.n;
    let top = eig.iter().fold(1.0f64, |acc, e| acc.max(e.as_f64().abs()));
    let mut roots = Vec::with_capacity(n);
    for &e in &eig {
        if e.as_f64() < -1e-8 * top {
            return Err(Error::NegativeEigenvalue(e.as_f64()));
        }
        roots.push(e.max(T::zero()).sqrt());
    }
    let mut out = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let s: T = (0..n).map(|k| v.at(i, k) * roots[k] * v.at(j, k)).sum();
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    Ok(SymMatrix { n, data: out })
}

fn cross_trace<T: Real>(a: &SymMatrix<T>, b: &SymMatrix<T>) -> Result<T> {
    let ra = sym_matrix_sqrt(a)?;
    let inner = ra.matmul(b)?.matmul(&ra)?.symmetrized();
    Ok(sym_matrix_sqrt(&inner)?.trace())
}

/// `‖μa − μb‖² + Tr(Σa + Σb − 2(ΣaΣb)^½)`. The cross term averages the two
/// symmetric forms `Tr√(√Σa Σb √Σa)` and `Tr√(√Σb Σa √Σb)` so the result
/// is exactly symmetric in its arguments. Round-off negatives down to
/// `-1e-6` are clamped to zero.
pub fn frechet_distance<T: Real>(a: &GaussianStats<T>, b: &GaussianStats<T>) -> Result<T> {
    check_dim(a.dim(), b.dim())?;
    let mean_term: T = a.mean.iter().zip(&b.mean).map(|(&x, &y)| (x - y) * (x - y)).sum();
    let cross = T::lit(0.5) * (cross_trace(&a.cov, &b.cov)? + cross_trace(&b.cov, &a.cov)?);
    let d = mean_term + (a.cov.trace() + b.cov.trace()) - T::lit(2.0) * cross;
    if d < T::zero() {
        if d.as_f64() < -1e-6 {
            return Err(Error::NegativeDistance(d.as_f64()));
        }
        return Ok(T::zero());
    }
    Ok(d)
}
