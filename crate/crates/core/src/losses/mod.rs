//! Reconstruction and conditional-generation loss terms.
//!
//! Every term returns a [`Loss`]: its value plus the analytic gradient with
//! respect to the term's optimization variable (predicted image, latent
//! code, or label vector). Batched terms average over the batch.

mod conditional;
mod critic;
mod feature;
mod label;
mod msssim;
mod penalty;
mod perceptual;
mod pixel;

pub use conditional::{
    adv_generator_loss, generator_total_loss, identity_cross_entropy, identity_cross_entropy_unchecked,
    score_controller, score_controller_values,
};
pub use critic::{critic_loss, Critic};
pub use feature::{feature_l1, ConvBankExtractor, FeatureExtractor, IdentityExtractor};
pub use label::{label_l1, label_l1_values, LabelVector};
pub use msssim::{max_msssim_levels, msssim, msssim_loss, MsSsimConfig, MSSSIM_WEIGHTS};
pub use penalty::{latent_penalty, latent_penalty_values};
pub use perceptual::{perceptual_loss, PerceptualMetric, PyramidPerceptual};
pub use pixel::pixel_logcosh;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::scalar::Real;

/// Loss value with the gradient with respect to the term's variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Loss<T> {
    pub value: T,
    pub grad: Vec<T>,
}

impl<T: Real> Loss<T> {
    pub fn zero(len: usize) -> Self {
        Self {
            value: T::zero(),
            grad: vec![T::zero(); len],
        }
    }
}

/// Batch-averaged loss with one gradient per image.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss<T> {
    pub value: T,
    pub grads: Vec<Vec<T>>,
}

/// Weights of the aggregate recovery objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// log-cosh pixel term
    pub lambda1: f64,
    /// feature L1 term
    pub lambda2: f64,
    /// 1 - MS-SSIM
    pub lambda3: f64,
    /// perceptual distance
    pub lambda4: f64,
    /// latent penalty toward the average code
    pub lambda5: f64,
    /// critic score
    pub lambda6: f64,
    /// label L1 term of the conditional objective
    pub lambda_label: f64,
    /// identity-preserving weight in the generator objective
    pub lambda_ip: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.4,
            lambda3: 0.2,
            lambda4: 0.4,
            lambda5: 0.01,
            lambda6: 0.0,
            lambda_label: 0.1,
            lambda_ip: 0.5,
        }
    }
}

impl LossWeights {
    /// Only the pixel term enabled.
    pub fn pixel_only() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.0,
            lambda3: 0.0,
            lambda4: 0.0,
            lambda5: 0.0,
            lambda6: 0.0,
            lambda_label: 0.0,
            lambda_ip: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invariant(format!(
                    "loss weight {name} must be finite and >= 0 (got {v})"
                )));
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 8] {
        [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("lambda4", self.lambda4),
            ("lambda5", self.lambda5),
            ("lambda6", self.lambda6),
            ("lambda_label", self.lambda_label),
            ("lambda_ip", self.lambda_ip),
        ]
    }
}

/// The terms of the aggregate objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    Pixel,
    Feature,
    MsSsim,
    Perceptual,
    Penalty,
    Critic,
    Label,
}

/// Variable a term's gradient is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradSpace {
    Image,
    Latent,
    Label,
}

impl Term {
    pub fn name(&self) -> &'static str {
        match self {
            Term::Pixel => "pixel",
            Term::Feature => "feature",
            Term::MsSsim => "msssim",
            Term::Perceptual => "perceptual",
            Term::Penalty => "penalty",
            Term::Critic => "critic",
            Term::Label => "label",
        }
    }

    pub fn space(&self) -> GradSpace {
        match self {
            Term::Penalty => GradSpace::Latent,
            Term::Label => GradSpace::Label,
            _ => GradSpace::Image,
        }
    }

    pub fn weight(&self, w: &LossWeights) -> f64 {
        match self {
            Term::Pixel => w.lambda1,
            Term::Feature => w.lambda2,
            Term::MsSsim => w.lambda3,
            Term::Perceptual => w.lambda4,
            Term::Penalty => w.lambda5,
            Term::Critic => w.lambda6,
            Term::Label => w.lambda_label,
        }
    }
}

/// Weighted total with gradients summed per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate<T> {
    pub value: T,
    pub image_grad: Option<Vec<T>>,
    pub latent_grad: Option<Vec<T>>,
    pub label_grad: Option<Vec<T>>,
}

/// Weighted sum of evaluated terms. Gradients living in the same space are
/// combined with the same weights as the values.
pub fn aggregate_recovery_loss<T: Real>(terms: &[(Term, Loss<T>)], weights: &LossWeights) -> Result<Aggregate<T>> {
    weights.validate()?;
    let mut out = Aggregate {
        value: T::zero(),
        image_grad: None,
        latent_grad: None,
        label_grad: None,
    };
    for (term, loss) in terms {
        let w = T::lit(term.weight(weights));
        out.value += w * loss.value;
        let slot = match term.space() {
            GradSpace::Image => &mut out.image_grad,
            GradSpace::Latent => &mut out.latent_grad,
            GradSpace::Label => &mut out.label_grad,
        };
        match slot {
            Some(acc) => {
                if acc.len() != loss.grad.len() {
                    return Err(Error::DimensionMismatch {
                        expected: acc.len(),
                        actual: loss.grad.len(),
                    });
                }
                for (a, &g) in acc.iter_mut().zip(&loss.grad) {
                    *a += w * g;
                }
            }
            None => *slot = Some(loss.grad.iter().map(|&g| w * g).collect()),
        }
    }
    Ok(out)
}

/// Applies a per-image loss across a batch: mean value, gradients scaled by `1/N`.
pub fn batch_mean<T, F>(preds: &[ImageBuffer<T>], targets: &[ImageBuffer<T>], mut f: F) -> Result<BatchLoss<T>>
where
    T: Real,
    F: FnMut(&ImageBuffer<T>, &ImageBuffer<T>) -> Result<Loss<T>>,
{
    if preds.is_empty() {
        return Err(Error::arg("batch must hold at least one image"));
    }
    if preds.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: preds.len(),
            actual: targets.len(),
        });
    }
    let n = T::from_usize_lossy(preds.len());
    let mut value = T::zero();
    let mut grads = Vec::with_capacity(preds.len());
    for (p, t) in preds.iter().zip(targets) {
        let l = f(p, t)?;
        value += l.value;
        grads.push(l.grad.into_iter().map(|g| g / n).collect());
    }
    Ok(BatchLoss {
        value: value / n,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss(v: f64, g: Vec<f64>) -> Loss<f64> {
        Loss { value: v, grad: g }
    }

    fn zero_weights() -> LossWeights {
        LossWeights {
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            lambda4: 0.0,
            lambda5: 0.0,
            lambda6: 0.0,
            lambda_label: 0.0,
            lambda_ip: 0.0,
        }
    }

    #[test]
    fn all_zero_weights_give_zero() {
        let terms = vec![
            (Term::Pixel, loss(3.0, vec![1.0])),
            (Term::Penalty, loss(2.0, vec![1.0, 1.0])),
        ];
        let a = aggregate_recovery_loss(&terms, &zero_weights()).unwrap();
        assert_eq!(a.value, 0.0);
        assert_eq!(a.image_grad.unwrap(), vec![0.0]);
    }

    #[test]
    fn single_weight_scales_term() {
        let w = LossWeights {
            lambda1: 2.0,
            ..zero_weights()
        };
        let terms = vec![
            (Term::Pixel, loss(0.25, vec![0.5, -1.0])),
            (Term::MsSsim, loss(9.0, vec![7.0, 7.0])),
        ];
        let a = aggregate_recovery_loss(&terms, &w).unwrap();
        assert_eq!(a.value, 0.5);
        assert_eq!(a.image_grad.unwrap(), vec![1.0, -2.0]);
    }

    #[test]
    fn random_weights_match_recomputed_sum() {
        let vals = crate::testutil::random_pixels(4, 14, 0.0, 2.0);
        let w = LossWeights {
            lambda1: vals[0],
            lambda2: vals[1],
            lambda3: vals[2],
            lambda4: vals[3],
            lambda5: vals[4],
            lambda6: vals[5],
            lambda_label: vals[6],
            lambda_ip: 0.5,
        };
        let all = [
            Term::Pixel,
            Term::Feature,
            Term::MsSsim,
            Term::Perceptual,
            Term::Penalty,
            Term::Critic,
            Term::Label,
        ];
        let terms: Vec<_> = all
            .iter()
            .enumerate()
            .map(|(i, &t)| (t, loss(vals[7 + i], vec![vals[7 + i]])))
            .collect();
        let a = aggregate_recovery_loss(&terms, &w).unwrap();
        let expect = vals[0] * vals[7]
            + vals[1] * vals[8]
            + vals[2] * vals[9]
            + vals[3] * vals[10]
            + vals[4] * vals[11]
            + vals[5] * vals[12]
            + vals[6] * vals[13];
        assert!((a.value - expect).abs() < 1e-12);
        let img = vals[0] * vals[7] + vals[1] * vals[8] + vals[2] * vals[9] + vals[3] * vals[10] + vals[5] * vals[12];
        assert!((a.image_grad.unwrap()[0] - img).abs() < 1e-12);
        assert!((a.latent_grad.unwrap()[0] - vals[4] * vals[11]).abs() < 1e-12);
        assert!((a.label_grad.unwrap()[0] - vals[6] * vals[13]).abs() < 1e-12);
    }

    #[test]
    fn aggregate_is_linear_in_each_weight() {
        let terms = vec![
            (Term::Pixel, loss(0.3, vec![1.0])),
            (Term::Feature, loss(0.7, vec![1.0])),
        ];
        let at = |l2: f64| {
            let w = LossWeights {
                lambda2: l2,
                ..LossWeights::default()
            };
            aggregate_recovery_loss(&terms, &w).unwrap().value
        };
        let (a, b, c) = (at(0.0), at(1.0), at(2.0));
        assert!((c - b - (b - a)).abs() < 1e-12);
    }

    #[test]
    fn negative_weight_rejected() {
        let w = LossWeights {
            lambda3: -1.0,
            ..LossWeights::default()
        };
        assert!(aggregate_recovery_loss::<f64>(&[], &w).is_err());
    }

    #[test]
    fn batch_mean_averages() {
        let a = ImageBuffer::new(1, 1, 1, vec![0.0]).unwrap();
        let b = ImageBuffer::new(1, 1, 1, vec![1.0]).unwrap();
        let l = batch_mean(&[a.clone(), b.clone()], &[a.clone(), a.clone()], pixel_logcosh).unwrap();
        let expect = 0.5 * 1.0f64.cosh().ln();
        assert!((l.value - expect).abs() < 1e-12);
        assert!((l.grads[1][0] - 0.5 * 1.0f64.tanh()).abs() < 1e-12);
        assert!(batch_mean(std::slice::from_ref(&a), &[], pixel_logcosh).is_err());
    }
}
