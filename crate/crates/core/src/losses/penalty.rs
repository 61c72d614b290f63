use super::Loss;
use crate::error::{check_dim, Result};
use crate::latent::LatentCode;
use crate::scalar::Real;

/// Mean `|z_pred - z_avg|` with subgradient `sign(z_pred - z_avg) / dim`.
pub fn latent_penalty_values<T: Real>(z_pred: &[T], z_avg: &[T]) -> Result<Loss<T>> {
    check_dim(z_avg.len(), z_pred.len())?;
    let n = T::from_usize_lossy(z_pred.len().max(1));
    let mut value = T::zero();
    let grad = z_pred
        .iter()
        .zip(z_avg)
        .map(|(&p, &a)| {
            value += (p - a).abs();
            (p - a).sign0() / n
        })
        .collect();
    Ok(Loss { value: value / n, grad })
}

pub fn latent_penalty<T: Real>(z_pred: &LatentCode<T>, z_avg: &LatentCode<T>) -> Result<Loss<T>> {
    latent_penalty_values(z_pred.values(), z_avg.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{central_gradient, max_rel_err, random_pixels};

    #[test]
    fn examples() {
        let z = LatentCode::from_vec(vec![1.0, -1.0]).unwrap();
        let avg = LatentCode::from_vec(vec![0.0, 0.0]).unwrap();
        assert_eq!(latent_penalty(&z, &z).unwrap().value, 0.0);
        assert_eq!(latent_penalty(&z, &z).unwrap().grad, vec![0.0, 0.0]);
        assert_eq!(latent_penalty(&z, &avg).unwrap().value, 1.0);
        let short = LatentCode::from_vec(vec![0.0]).unwrap();
        assert!(latent_penalty(&z, &short).is_err());
    }

    #[test]
    fn random_matches_direct_oracle_and_fd() {
        let p = random_pixels(5, 8, -2.0, 2.0);
        let a = random_pixels(6, 8, -2.0, 2.0);
        let direct = p.iter().zip(&a).map(|(x, y)| (x - y).abs()).sum::<f64>() / 8.0;
        let l = latent_penalty_values(&p, &a).unwrap();
        assert!((l.value - direct).abs() < 1e-14);
        let numeric = central_gradient(&p, 1e-6, |x| latent_penalty_values(x, &a).unwrap().value);
        assert!(max_rel_err(&l.grad, &numeric) < 1e-3);
    }
}
