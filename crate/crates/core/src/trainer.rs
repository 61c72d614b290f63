//! Scored latent datasets and the linear attribute classifier.
//!
//! Latents are drawn from `N(0, I)`, rendered, and scored. The highest and
//! lowest scoring samples become the positive and negative classes of a
//! hinge-loss linear SVM whose unit normal is the editing direction.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::image::ImageBuffer;
use crate::latent::{classify, Hyperplane, LatentCode, LatentSpace};
use crate::recovery::Generator;
use crate::scalar::Real;

const SPLIT_STREAM: u64 = 1;

/// Attribute rater. It sees both the rendered image and its latent so toy
/// scorers can shortcut through the latent.
pub trait Scorer<T: Real>: Send + Sync {
    fn score(&self, image: &ImageBuffer<T>, latent: &LatentCode<T>) -> Result<T>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSample<T> {
    pub index: usize,
    pub latent: LatentCode<T>,
    pub score: T,
    pub image_ref: Option<String>,
}

/// A latent with a ±1 class label; `index` points back into the source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample<T> {
    pub index: usize,
    pub latent: LatentCode<T>,
    pub label: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    pub epochs: usize,
    pub lambda: f64,
    /// Step size at update `t` is `1 / (lambda · (t + schedule_offset))`.
    pub schedule_offset: f64,
    pub seed: u64,
    pub positives: usize,
    pub negatives: usize,
    pub validation: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            lambda: 1e-4,
            schedule_offset: 0.0,
            seed: 0,
            positives: 5600,
            negatives: 5600,
            validation: 4800,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invariant("svm epochs must be >= 1"));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::invariant("svm lambda must be finite and > 0"));
        }
        if !(self.schedule_offset >= 0.0) {
            return Err(Error::invariant("svm schedule offset must be >= 0"));
        }
        if self.positives == 0 || self.negatives == 0 {
            return Err(Error::invariant("positive and negative counts must be >= 1"));
        }
        Ok(())
    }

    /// Checks the protocol counts fit a dataset of `n` samples.
    pub fn check_counts(&self, n: usize) -> Result<()> {
        let need = self.positives + self.negatives + self.validation;
        if need > n {
            return Err(Error::arg(format!(
                "{} positives + {} negatives + {} validation exceed the {n} samples available",
                self.positives, self.negatives, self.validation
            )));
        }
        Ok(())
    }
}

/// Draws sample `index`: an independent stream per index keeps samples
/// reproducible regardless of evaluation order.
pub fn sample_one<T: Real>(
    gen: &dyn Generator<T>,
    scorer: &dyn Scorer<T>,
    seed: u64,
    index: usize,
) -> Result<(ScoredSample<T>, ImageBuffer<T>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let values = (0..gen.latent_dim())
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            T::lit(v)
        })
        .collect();
    let latent = LatentCode::new(values, LatentSpace::Z)?;
    let image = gen.synthesize(&latent)?;
    let score = scorer.score(&image, &latent).map_err(|e| Error::Scorer {
        index,
        detail: e.to_string(),
    })?;
    if !score.is_finite() {
        return Err(Error::Scorer {
            index,
            detail: format!("score {score} is not finite"),
        });
    }
    Ok((
        ScoredSample {
            index,
            latent,
            score,
            image_ref: None,
        },
        image,
    ))
}

pub fn sample_dataset<T: Real>(
    gen: &dyn Generator<T>,
    scorer: &dyn Scorer<T>,
    n: usize,
    seed: u64,
) -> Result<Vec<ScoredSample<T>>> {
    if n == 0 {
        return Err(Error::arg("dataset size must be >= 1"));
    }
    (0..n)
        .map(|i| sample_one(gen, scorer, seed, i).map(|(s, _)| s))
        .collect()
}

/// Top `k_pos` scores labeled `+1`, then the bottom `k_neg` of the rest
/// labeled `-1`. Ties break toward the lower sample index on both sides.
pub fn select_extremes<T: Real>(
    samples: &[ScoredSample<T>],
    k_pos: usize,
    k_neg: usize,
) -> Result<Vec<LabeledSample<T>>> {
    if k_pos + k_neg > samples.len() {
        return Err(Error::arg(format!(
            "cannot select {k_pos} + {k_neg} extremes from {} samples",
            samples.len()
        )));
    }
    let mut desc: Vec<usize> = (0..samples.len()).collect();
    desc.sort_by(|&a, &b| {
        samples[b]
            .score
            .partial_cmp(&samples[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut taken = vec![false; samples.len()];
    let mut out = Vec::with_capacity(k_pos + k_neg);
    for &i in desc.iter().take(k_pos) {
        taken[i] = true;
        out.push(labeled(&samples[i], 1));
    }
    let mut asc: Vec<usize> = (0..samples.len()).filter(|&i| !taken[i]).collect();
    asc.sort_by(|&a, &b| {
        samples[a]
            .score
            .partial_cmp(&samples[b].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &i in asc.iter().take(k_neg) {
        out.push(labeled(&samples[i], -1));
    }
    Ok(out)
}

fn labeled<T: Real>(s: &ScoredSample<T>, label: i8) -> LabeledSample<T> {
    LabeledSample {
        index: s.index,
        latent: s.latent.clone(),
        label,
    }
}

/// Hinge-loss, L2-regularized linear SVM solved by stochastic subgradient
/// descent with step `1/(λt)` and a projection onto the `1/√λ` ball. The
/// bias rides along as a constant-one feature. The result is the average of
/// the iterates over the second half of the steps; its normal is unit length
/// and the bias is rescaled with it.
pub fn train_svm<T: Real>(set: &[LabeledSample<T>], cfg: &SvmConfig) -> Result<Hyperplane<T>> {
    cfg.validate()?;
    let Some(first) = set.first() else {
        return Err(Error::arg("training set is empty"));
    };
    let dim = first.latent.dim();
    let has_pos = set.iter().any(|s| s.label > 0);
    let has_neg = set.iter().any(|s| s.label < 0);
    if !(has_pos && has_neg) {
        return Err(Error::arg("training set must contain both classes"));
    }
    for s in set {
        check_dim(dim, s.latent.dim())?;
        if s.label != 1 && s.label != -1 {
            return Err(Error::arg(format!("labels must be +1 or -1 (got {})", s.label)));
        }
    }
    let xs: Vec<Vec<f64>> = set
        .iter()
        .map(|s| {
            let mut v: Vec<f64> = s.latent.values().iter().map(|x| x.as_f64()).collect();
            v.push(1.0);
            v
        })
        .collect();
    let ys: Vec<f64> = set.iter().map(|s| s.label as f64).collect();
    let lambda = cfg.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0f64; dim + 1];
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut avg = vec![0.0f64; dim + 1];
    let total = (cfg.epochs * set.len()) as f64;
    let mut t = 0.0f64;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1.0;
            let eta = 1.0 / (lambda * (t + cfg.schedule_offset));
            let margin = ys[i] * crate::scalar::dot(&w, &xs[i]);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (wv, &xv) in w.iter_mut().zip(&xs[i]) {
                    *wv += eta * ys[i] * xv;
                }
            }
            let n = crate::scalar::norm2(&w);
            if n > radius {
                let s = radius / n;
                w.iter_mut().for_each(|v| *v *= s);
            }
            if 2.0 * t > total {
                avg.iter_mut().zip(&w).for_each(|(a, &v)| *a += v);
            }
        }
    }
    let normal: Vec<T> = avg[..dim].iter().map(|&v| T::lit(v)).collect();
    Hyperplane::from_unnormalized(&normal, T::lit(avg[dim]), "attribute")
}

/// Fraction of samples whose label agrees with `classify`.
pub fn accuracy<T: Real>(h: &Hyperplane<T>, set: &[LabeledSample<T>]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::arg("evaluation set is empty"));
    }
    let mut hits = 0usize;
    for s in set {
        if classify(h, &s.latent)? == s.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / set.len() as f64)
}

/// How raw scores become ±1 labels for evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// Same top/bottom rule used for training.
    Extremes { positives: usize, negatives: usize },
    /// Scores at or above the cutoff are positive.
    Cutoff(f64),
}

pub fn apply_threshold<T: Real>(samples: &[ScoredSample<T>], rule: ThresholdRule) -> Result<Vec<LabeledSample<T>>> {
    match rule {
        ThresholdRule::Extremes { positives, negatives } => select_extremes(samples, positives, negatives),
        ThresholdRule::Cutoff(c) => Ok(samples
            .iter()
            .map(|s| labeled(s, if s.score.as_f64() >= c { 1 } else { -1 }))
            .collect()),
    }
}

pub fn evaluate_hyperplane<T: Real>(
    h: &Hyperplane<T>,
    samples: &[ScoredSample<T>],
    rule: ThresholdRule,
) -> Result<f64> {
    accuracy(h, &apply_threshold(samples, rule)?)
}

/// Disjoint train / validation / remaining split of a scored dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSplit<T> {
    pub train: Vec<LabeledSample<T>>,
    pub validation: Vec<LabeledSample<T>>,
    /// Every sample outside the extremes, labeled by the median-score cutoff.
    pub remaining: Vec<LabeledSample<T>>,
    pub median_score: f64,
}

/// Takes the `positives + validation/2` highest and `negatives +
/// validation/2` lowest scores, shuffles each tail with the config seed and
/// holds out the validation share. The rest of the dataset becomes the
/// remaining pool.
pub fn protocol_split<T: Real>(samples: &[ScoredSample<T>], cfg: &SvmConfig) -> Result<ProtocolSplit<T>> {
    cfg.validate()?;
    cfg.check_counts(samples.len())?;
    let val_pos = cfg.validation / 2;
    let val_neg = cfg.validation - val_pos;
    let ext = select_extremes(samples, cfg.positives + val_pos, cfg.negatives + val_neg)?;
    let (mut pos, mut neg): (Vec<_>, Vec<_>) = ext.into_iter().partition(|s| s.label > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SPLIT_STREAM);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let val_p = pos.split_off(cfg.positives);
    let val_n = neg.split_off(cfg.negatives);
    let mut selected = vec![false; samples.len()];
    let pos_of: std::collections::HashMap<usize, usize> =
        samples.iter().enumerate().map(|(i, s)| (s.index, i)).collect();
    for s in pos.iter().chain(&neg).chain(&val_p).chain(&val_n) {
        selected[pos_of[&s.index]] = true;
    }
    let mut scores: Vec<f64> = samples.iter().map(|s| s.score.as_f64()).collect();
    scores.sort_by(f64::total_cmp);
    let median_score = if scores.len() % 2 == 1 {
        scores[scores.len() / 2]
    } else {
        0.5 * (scores[scores.len() / 2 - 1] + scores[scores.len() / 2])
    };
    let rest: Vec<ScoredSample<T>> = samples
        .iter()
        .zip(&selected)
        .filter(|(_, &sel)| !sel)
        .map(|(s, _)| s.clone())
        .collect();
    let remaining = apply_threshold(&rest, ThresholdRule::Cutoff(median_score))?;
    let mut train = pos;
    train.extend(neg);
    let mut validation = val_p;
    validation.extend(val_n);
    Ok(ProtocolSplit {
        train,
        validation,
        remaining,
        median_score,
    })
}
