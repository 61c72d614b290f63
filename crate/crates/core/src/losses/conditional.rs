//! Loss computations of the conditional (score + identity) generator.

use super::Loss;
use crate::error::{check_dim, Error, Result};
use crate::scalar::Real;

/// Added inside the logarithm of the identity cross-entropy.
pub const CE_EPS: f64 = 1e-12;

/// Mean of `-D(G(z | α, β))` over the batch of fake scores.
pub fn adv_generator_loss<T: Real>(fake_scores: &[T]) -> Result<T> {
    if fake_scores.is_empty() {
        return Err(Error::arg("fake score batch is empty"));
    }
    let s: T = fake_scores.iter().map(|&v| -v).sum();
    Ok(s / T::from_usize_lossy(fake_scores.len()))
}

/// `l_adv + λ_ip · l_ip`.
pub fn generator_total_loss<T: Real>(l_adv: T, l_ip: T, lambda_ip: T) -> T {
    l_adv + lambda_ip * l_ip
}

fn check_distribution<T: Real>(p: &[T], name: &str) -> Result<()> {
    if p.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
        return Err(Error::invariant(format!("{name} has negative or non-finite entries")));
    }
    let s: T = p.iter().copied().sum();
    if (s.as_f64() - 1.0).abs() > 1e-6 {
        return Err(Error::invariant(format!("{name} must sum to 1 (sums to {s})")));
    }
    Ok(())
}

/// Cross-entropy in bits, `-Σ p_real · log₂(p_fake + ε)`, with its gradient
/// with respect to `p_fake`. Inputs must be probability distributions.
pub fn identity_cross_entropy<T: Real>(p_real: &[T], p_fake: &[T]) -> Result<Loss<T>> {
    check_dim(p_real.len(), p_fake.len())?;
    check_distribution(p_real, "p_real")?;
    check_distribution(p_fake, "p_fake")?;
    identity_cross_entropy_unchecked(p_real, p_fake)
}

/// [`identity_cross_entropy`] without the simplex checks.
pub fn identity_cross_entropy_unchecked<T: Real>(p_real: &[T], p_fake: &[T]) -> Result<Loss<T>> {
    check_dim(p_real.len(), p_fake.len())?;
    let eps = T::lit(CE_EPS);
    let mut value = T::zero();
    let grad = p_real
        .iter()
        .zip(p_fake)
        .map(|(&r, &f)| {
            value -= r * (f + eps).log2();
            -r / ((f + eps) * T::LN_2())
        })
        .collect();
    Ok(Loss { value, grad })
}

/// Squared L2 distance `Σ (γ - γ̂)²`; the gradient is with respect to `γ̂`.
pub fn score_controller_values<T: Real>(gamma: &[T], gamma_hat: &[T]) -> Result<Loss<T>> {
    check_dim(gamma.len(), gamma_hat.len())?;
    let two = T::lit(2.0);
    let mut value = T::zero();
    let grad = gamma
        .iter()
        .zip(gamma_hat)
        .map(|(&g, &h)| {
            let d = g - h;
            value += d * d;
            -two * d
        })
        .collect();
    Ok(Loss { value, grad })
}

pub fn score_controller<T: Real>(gamma: &super::LabelVector<T>, gamma_hat: &super::LabelVector<T>) -> Result<T> {
    Ok(score_controller_values(&gamma.concat(), &gamma_hat.concat())?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LabelVector;
    use crate::testutil::{central_gradient, max_rel_err, random_pixels};

    #[test]
    fn adversarial_examples() {
        assert_eq!(adv_generator_loss(&[0.5]).unwrap(), -0.5);
        assert_eq!(adv_generator_loss(&[1.0, -1.0]).unwrap(), 0.0);
        let s = random_pixels(3, 17, -2.0, 2.0);
        let oracle = -s.iter().sum::<f64>() / 17.0;
        assert!((adv_generator_loss(&s).unwrap() - oracle).abs() < 1e-14);
        assert!(adv_generator_loss::<f64>(&[]).is_err());
    }

    #[test]
    fn total_loss_examples() {
        assert_eq!(generator_total_loss(1.5, 2.0, 0.0), 1.5);
        assert_eq!(generator_total_loss(1.5, 2.0, 0.5), 2.5);
        let v = random_pixels(4, 3, -1.0, 1.0);
        assert!((generator_total_loss(v[0], v[1], v[2]) - (v[0] + v[2] * v[1])).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_examples() {
        let onehot = [0.0f64, 1.0, 0.0];
        assert!(identity_cross_entropy(&onehot, &onehot).unwrap().value.abs() < 1e-9);
        let u = [0.25f64; 4];
        assert!((identity_cross_entropy(&u, &u).unwrap().value - 2.0).abs() < 1e-9);
        assert!(identity_cross_entropy(&[0.5, 0.6], &[0.5, 0.5]).is_err());
        assert!(identity_cross_entropy(&[1.5, -0.5], &[0.5, 0.5]).is_err());
    }

    fn softmax(v: &[f64]) -> Vec<f64> {
        let m = v.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|x| x / s).collect()
    }

    #[test]
    fn cross_entropy_random_vs_oracle_and_fd() {
        let r = softmax(&random_pixels(5, 10, -2.0, 2.0));
        let f = softmax(&random_pixels(6, 10, -2.0, 2.0));
        let oracle: f64 = -r
            .iter()
            .zip(&f)
            .map(|(a, b)| a * (b + 1e-12).ln() / 2f64.ln())
            .sum::<f64>();
        let l = identity_cross_entropy(&r, &f).unwrap();
        assert!((l.value - oracle).abs() < 1e-12);
        assert!(l.value >= 0.0);
        let numeric = central_gradient(&f, 1e-7, |x| identity_cross_entropy_unchecked(&r, x).unwrap().value);
        assert!(max_rel_err(&l.grad, &numeric) < 1e-4);
    }

    #[test]
    fn score_controller_examples() {
        let a = LabelVector::new(0.2f64, vec![]).unwrap();
        let b = LabelVector::new(0.6, vec![]).unwrap();
        assert_eq!(score_controller(&a, &a).unwrap(), 0.0);
        assert!((score_controller(&a, &b).unwrap() - 0.16).abs() < 1e-15);
        assert_eq!(score_controller(&a, &b).unwrap(), score_controller(&b, &a).unwrap());
        let p = random_pixels(7, 513, -1.0, 1.0);
        let q = random_pixels(8, 513, -1.0, 1.0);
        let oracle: f64 = p.iter().zip(&q).map(|(x, y)| (x - y) * (x - y)).sum();
        let l = score_controller_values(&p, &q).unwrap();
        assert!((l.value - oracle).abs() < 1e-11);
        let numeric = central_gradient(&q[..16], 1e-5, |x| score_controller_values(&p[..16], x).unwrap().value);
        let l16 = score_controller_values(&p[..16], &q[..16]).unwrap();
        assert!(max_rel_err(&l16.grad, &numeric) < 1e-4);
    }
}
