//! Latent recovery by plain gradient descent, `z ← z − η∇L_rec(z)`.
//!
//! The unconditional objective is the weighted sum of pixel, feature,
//! MS-SSIM, perceptual, latent-penalty and critic terms. The conditional
//! objective drops the penalty and critic terms. It adds an L1 term pulling
//! the label iterate toward a supplied target label. It descends jointly in
//! `(z, beauty, identity)`, with the beauty score stochastically clipped
//! and the identity renormalized after every step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::image::{ImageBuffer, Shape};
use crate::latent::{LatentCode, LatentSpace};
use crate::losses::{
    aggregate_recovery_loss, critic_loss, feature_l1, label_l1_values, latent_penalty, max_msssim_levels, msssim_loss,
    perceptual_loss, pixel_logcosh, ConvBankExtractor, Critic, FeatureExtractor, LabelVector, Loss, LossWeights,
    MsSsimConfig, PerceptualMetric, PyramidPerceptual, Term,
};
use crate::scalar::{norm2, Real};

/// Image generator `I = G(z)`.
pub trait Generator<T: Real>: Send + Sync {
    fn latent_dim(&self) -> usize;

    fn output_shape(&self) -> Shape;

    fn synthesize(&self, z: &LatentCode<T>) -> Result<ImageBuffer<T>>;

    /// Pulls an image-space gradient back to latent space. The default falls
    /// back to central finite differences, which needs `latent_dim() <= 64`.
    fn vjp(&self, z: &LatentCode<T>, upstream: &[T]) -> Result<Vec<T>> {
        finite_difference_vjp(self, z, upstream)
    }
}

/// Label-conditioned generator `I = G(z | beauty, identity)`.
pub trait ConditionalGenerator<T: Real>: Send + Sync {
    fn latent_dim(&self) -> usize;

    fn identity_dim(&self) -> usize;

    fn output_shape(&self) -> Shape;

    /// Synthesis from raw label parts; iterates need not satisfy label invariants.
    fn synthesize_raw(&self, z: &LatentCode<T>, beauty: T, identity: &[T]) -> Result<ImageBuffer<T>>;

    /// Returns `(∂/∂z, ∂/∂beauty, ∂/∂identity)` of `upstream · G`.
    fn vjp_raw(&self, z: &LatentCode<T>, beauty: T, identity: &[T], upstream: &[T]) -> Result<(Vec<T>, T, Vec<T>)>;

    fn synthesize(&self, z: &LatentCode<T>, label: &LabelVector<T>) -> Result<ImageBuffer<T>> {
        self.synthesize_raw(z, label.beauty(), label.identity())
    }
}

pub const FD_MAX_DIM: usize = 64;
pub const FD_STEP: f64 = 1e-4;

/// Central-difference vector-Jacobian product, step `1e-4` per coordinate.
pub fn finite_difference_vjp<T, G>(gen: &G, z: &LatentCode<T>, upstream: &[T]) -> Result<Vec<T>>
where
    T: Real,
    G: Generator<T> + ?Sized,
{
    if z.dim() > FD_MAX_DIM {
        return Err(Error::FiniteDifferenceTooLarge {
            dim: z.dim(),
            max: FD_MAX_DIM,
        });
    }
    let (w, h, c) = gen.output_shape();
    check_dim(w * h * c, upstream.len())?;
    let step = T::lit(FD_STEP);
    let mut probe = z.values().to_vec();
    let mut out = Vec::with_capacity(z.dim());
    for i in 0..z.dim() {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = gen.synthesize(&z.with_values(probe.clone())?)?;
        probe[i] = orig - step;
        let down = gen.synthesize(&z.with_values(probe.clone())?)?;
        probe[i] = orig;
        let mut s = T::zero();
        for ((&g, &a), &b) in upstream.iter().zip(up.pixels()).zip(down.pixels()) {
            s += g * (a - b);
        }
        out.push(s / (step + step));
    }
    Ok(out)
}

/// Keeps `x` when it lies in `[lo, hi]`, otherwise redraws it uniformly from the range.
pub fn stochastic_clip<T: Real, R: Rng + ?Sized>(x: T, lo: T, hi: T, rng: &mut R) -> Result<T> {
    if !(lo < hi) {
        return Err(Error::arg(format!("clip range needs lo < hi (got [{lo}, {hi}])")));
    }
    if x >= lo && x <= hi {
        return Ok(x);
    }
    let u: f64 = rng.random();
    Ok(lo + (hi - lo) * T::lit(u))
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitMode<T> {
    Zero,
    /// Start from `RecoveryConfig::z_avg`.
    Average,
    Explicit(LatentCode<T>),
    /// Standard normal draw from the config seed.
    SeededRandom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipPolicy {
    pub beauty_range: (f64, f64),
    pub renormalize_identity: bool,
}

impl Default for ClipPolicy {
    fn default() -> Self {
        Self {
            beauty_range: (0.0, 1.0),
            renormalize_identity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig<T> {
    pub weights: LossWeights,
    /// Learning rate; zero is allowed and freezes the iterate.
    pub eta: f64,
    pub max_steps: usize,
    /// `None` picks `Average` when `z_avg` is set, else `Zero`.
    pub init: Option<InitMode<T>>,
    /// Average latent: penalty anchor and `Average` start point.
    pub z_avg: Option<LatentCode<T>>,
    pub clip: ClipPolicy,
    pub stop_tolerance: f64,
    /// Steps over which improvement is measured for convergence.
    pub stop_window: usize,
    /// MS-SSIM levels; `None` uses as many as fit, up to five.
    pub msssim_levels: Option<usize>,
    pub seed: u64,
}

impl<T: Real> Default for RecoveryConfig<T> {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            eta: 0.05,
            max_steps: 2000,
            init: None,
            z_avg: None,
            clip: ClipPolicy::default(),
            stop_tolerance: 1e-7,
            stop_window: 50,
            msssim_levels: None,
            seed: 0,
        }
    }
}

impl<T: Real> RecoveryConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !self.eta.is_finite() || self.eta < 0.0 {
            return Err(Error::invariant(format!(
                "eta must be finite and >= 0 (got {})",
                self.eta
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::invariant("max_steps must be >= 1"));
        }
        let (lo, hi) = self.clip.beauty_range;
        if !(lo < hi) || lo < 0.0 || hi > 1.0 {
            return Err(Error::invariant(format!(
                "beauty clip range must satisfy 0 <= lo < hi <= 1 (got [{lo}, {hi}])"
            )));
        }
        if !(self.stop_tolerance >= 0.0) {
            return Err(Error::invariant("stop_tolerance must be >= 0"));
        }
        if self.stop_window == 0 {
            return Err(Error::invariant("stop_window must be >= 1"));
        }
        Ok(())
    }

    pub fn resolved_init(&self) -> InitMode<T> {
        match &self.init {
            Some(m) => m.clone(),
            None if self.z_avg.is_some() => InitMode::Average,
            None => InitMode::Zero,
        }
    }
}

/// Pluggable networks for the feature, perceptual and critic terms.
#[derive(Clone, Copy, Default)]
pub struct Plugins<'a, T: Real> {
    pub extractor: Option<&'a dyn FeatureExtractor<T>>,
    pub perceptual: Option<&'a dyn PerceptualMetric<T>>,
    pub critic: Option<&'a dyn Critic<T>>,
}

impl<'a, T: Real> Plugins<'a, T> {
    pub fn none() -> Self {
        Self {
            extractor: None,
            perceptual: None,
            critic: None,
        }
    }
}

/// Dependency-free default plug-ins.
#[derive(Debug, Clone)]
pub struct BuiltinPlugins {
    pub extractor: ConvBankExtractor,
    pub perceptual: PyramidPerceptual,
}

impl BuiltinPlugins {
    pub fn new(seed: u64, channels: usize) -> Result<Self> {
        Ok(Self {
            extractor: ConvBankExtractor::new(seed, channels)?,
            perceptual: PyramidPerceptual::default(),
        })
    }

    pub fn plugins<T: Real>(&self) -> Plugins<'_, T> {
        Plugins {
            extractor: Some(&self.extractor),
            perceptual: Some(&self.perceptual),
            critic: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxSteps,
}

impl StopReason {
    pub fn tag(&self) -> &'static str {
        match self {
            StopReason::Converged => "CONVERGED",
            StopReason::MaxSteps => "MAX_STEPS",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub total: f64,
    pub terms: Vec<(Term, f64)>,
    pub grad_norm: f64,
    /// Conditional runs: beauty iterate evaluated at this step.
    pub beauty: Option<f64>,
    /// Conditional runs: identity norm of the iterate evaluated at this step.
    pub identity_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryTrace {
    pub records: Vec<StepRecord>,
    pub stop: StopReason,
    /// Index into `records` of the returned iterate.
    pub best_step: usize,
}

impl RecoveryTrace {
    pub fn steps(&self) -> usize {
        self.records.len()
    }

    pub fn best_total(&self) -> f64 {
        self.records[self.best_step].total
    }
}

/// Objective value and gradients at one iterate.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub total: T,
    pub terms: Vec<(Term, T)>,
    pub latent_grad: Vec<T>,
    pub label_grad: Option<Vec<T>>,
    pub image: ImageBuffer<T>,
    /// Combined image-space gradient before the generator pullback.
    pub image_grad: Vec<T>,
}

fn nonzero(w: f64) -> bool {
    w != 0.0
}

/// Image-space terms shared by both objectives.
fn image_terms<T: Real>(
    pred: &ImageBuffer<T>,
    target: &ImageBuffer<T>,
    cfg: &RecoveryConfig<T>,
    plugins: &Plugins<'_, T>,
    with_critic: bool,
) -> Result<Vec<(Term, Loss<T>)>> {
    let w = &cfg.weights;
    let mut terms = Vec::new();
    if nonzero(w.lambda1) {
        terms.push((Term::Pixel, pixel_logcosh(pred, target)?));
    }
    if nonzero(w.lambda2) {
        let ex = plugins.extractor.ok_or(Error::MissingPlugin("lambda2"))?;
        terms.push((Term::Feature, feature_l1(pred, target, ex)?));
    }
    if nonzero(w.lambda3) {
        let (pw, ph, _) = pred.shape();
        let levels = cfg
            .msssim_levels
            .unwrap_or_else(|| max_msssim_levels(pw, ph).clamp(1, 5));
        terms.push((
            Term::MsSsim,
            msssim_loss(pred, target, &MsSsimConfig::with_levels(levels))?,
        ));
    }
    if nonzero(w.lambda4) {
        let m = plugins.perceptual.ok_or(Error::MissingPlugin("lambda4"))?;
        terms.push((Term::Perceptual, perceptual_loss(pred, target, m)?));
    }
    if with_critic && nonzero(w.lambda6) {
        let c = plugins.critic.ok_or(Error::MissingPlugin("lambda6"))?;
        let mut l = critic_loss(std::slice::from_ref(pred), c)?;
        terms.push((
            Term::Critic,
            Loss {
                value: l.value,
                grad: l.grads.remove(0),
            },
        ));
    }
    Ok(terms)
}

fn check_plugins<T: Real>(cfg: &RecoveryConfig<T>, plugins: &Plugins<'_, T>, conditional: bool) -> Result<()> {
    let w = &cfg.weights;
    if nonzero(w.lambda2) && plugins.extractor.is_none() {
        return Err(Error::MissingPlugin("lambda2"));
    }
    if nonzero(w.lambda4) && plugins.perceptual.is_none() {
        return Err(Error::MissingPlugin("lambda4"));
    }
    if !conditional {
        if nonzero(w.lambda6) && plugins.critic.is_none() {
            return Err(Error::MissingPlugin("lambda6"));
        }
        if nonzero(w.lambda5) && cfg.z_avg.is_none() {
            return Err(Error::MissingPlugin("lambda5 (z_avg)"));
        }
    }
    Ok(())
}

fn combine<T: Real>(
    terms: Vec<(Term, Loss<T>)>,
    weights: &LossWeights,
    image_len: usize,
) -> Result<(T, Vec<(Term, T)>, Vec<T>, Option<Vec<T>>, Option<Vec<T>>)> {
    let agg = aggregate_recovery_loss(&terms, weights)?;
    let values = terms.iter().map(|(t, l)| (*t, l.value)).collect();
    let image_grad = agg.image_grad.unwrap_or_else(|| vec![T::zero(); image_len]);
    Ok((agg.value, values, image_grad, agg.latent_grad, agg.label_grad))
}

/// Unconditional objective and its latent gradient at `z`.
pub fn recovery_objective<T: Real>(
    target: &ImageBuffer<T>,
    gen: &dyn Generator<T>,
    z: &LatentCode<T>,
    cfg: &RecoveryConfig<T>,
    plugins: &Plugins<'_, T>,
) -> Result<Evaluation<T>> {
    let pred = gen.synthesize(z)?;
    target.check_same_shape(&pred)?;
    let mut terms = image_terms(&pred, target, cfg, plugins, true)?;
    if nonzero(cfg.weights.lambda5) {
        let avg = cfg.z_avg.as_ref().ok_or(Error::MissingPlugin("lambda5 (z_avg)"))?;
        terms.push((Term::Penalty, latent_penalty(z, avg)?));
    }
    let (total, values, image_grad, latent_extra, _) = combine(terms, &cfg.weights, pred.len())?;
    let mut latent_grad = gen.vjp(z, &image_grad)?;
    check_dim(z.dim(), latent_grad.len())?;
    if let Some(extra) = latent_extra {
        for (g, e) in latent_grad.iter_mut().zip(extra) {
            *g += e;
        }
    }
    Ok(Evaluation {
        total,
        terms: values,
        latent_grad,
        label_grad: None,
        image: pred,
        image_grad,
    })
}

fn initial_latent<T: Real>(cfg: &RecoveryConfig<T>, dim: usize) -> Result<LatentCode<T>> {
    let z = match cfg.resolved_init() {
        InitMode::Zero => LatentCode::zeros(dim, LatentSpace::Z)?,
        InitMode::Average => cfg
            .z_avg
            .clone()
            .ok_or_else(|| Error::arg("AVERAGE init requires z_avg"))?,
        InitMode::Explicit(z) => z,
        InitMode::SeededRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(1);
            let v = (0..dim).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect();
            LatentCode::from_vec(v)?
        }
    };
    check_dim(dim, z.dim())?;
    if let Some(avg) = &cfg.z_avg {
        check_dim(dim, avg.dim())?;
    }
    Ok(z)
}

fn check_finite<T: Real>(step: usize, total: T, grad: &[T]) -> Result<()> {
    if !total.is_finite() {
        return Err(Error::NonFiniteLoss {
            step,
            detail: format!("total loss is {total}"),
        });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss {
            step,
            detail: format!("gradient entry {i} is not finite"),
        });
    }
    Ok(())
}

fn converged(records: &[StepRecord], window: usize, tol: f64) -> bool {
    let n = records.len();
    n > window && records[n - 1 - window].total - records[n - 1].total < tol
}

/// Recovers a latent code whose synthesis matches `target`.
///
/// Returns the evaluated iterate with the lowest total loss, which is not
/// necessarily the last one.
pub fn recover<T: Real>(
    target: &ImageBuffer<T>,
    gen: &dyn Generator<T>,
    cfg: &RecoveryConfig<T>,
    plugins: &Plugins<'_, T>,
) -> Result<(LatentCode<T>, RecoveryTrace)> {
    cfg.validate()?;
    if gen.output_shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            expected: gen.output_shape(),
            actual: target.shape(),
        });
    }
    check_plugins(cfg, plugins, false)?;
    let eta = T::lit(cfg.eta);
    let mut z = initial_latent(cfg, gen.latent_dim())?;
    let mut records = Vec::new();
    let mut best: Option<(LatentCode<T>, T, usize)> = None;
    let mut stop = StopReason::MaxSteps;
    for step in 0..cfg.max_steps {
        let ev = recovery_objective(target, gen, &z, cfg, plugins)?;
        check_finite(step, ev.total, &ev.latent_grad)?;
        records.push(StepRecord {
            step,
            total: ev.total.as_f64(),
            terms: ev.terms.iter().map(|(t, v)| (*t, v.as_f64())).collect(),
            grad_norm: norm2(&ev.latent_grad).as_f64(),
            beauty: None,
            identity_norm: None,
        });
        if best.as_ref().is_none_or(|b| ev.total < b.1) {
            best = Some((z.clone(), ev.total, step));
        }
        if converged(&records, cfg.stop_window, cfg.stop_tolerance) {
            stop = StopReason::Converged;
            break;
        }
        if step + 1 == cfg.max_steps {
            break;
        }
        let next = z
            .values()
            .iter()
            .zip(&ev.latent_grad)
            .map(|(&v, &g)| v - eta * g)
            .collect();
        z = z.with_values(next).map_err(|e| Error::NonFiniteLoss {
            step,
            detail: e.to_string(),
        })?;
    }
    let (z, _, best_step) = best.expect("max_steps >= 1");
    Ok((
        z,
        RecoveryTrace {
            records,
            stop,
            best_step,
        },
    ))
}

/// Seeded starting label: beauty uniform over the clip range, identity a
/// normalized Gaussian draw.
pub fn initial_label<T: Real>(cfg: &RecoveryConfig<T>, identity_dim: usize) -> (T, Vec<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    let (lo, hi) = cfg.clip.beauty_range;
    let beauty = T::lit(rng.random_range(lo..=hi));
    let mut identity: Vec<T> = (0..identity_dim)
        .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let n = norm2(&identity);
    if n > T::zero() {
        identity.iter_mut().for_each(|v| *v /= n);
    }
    (beauty, identity)
}

/// Conditional objective and its gradients at `(z, beauty, identity)`.
pub fn conditional_objective<T: Real>(
    target: &ImageBuffer<T>,
    label_target: &LabelVector<T>,
    cgen: &dyn ConditionalGenerator<T>,
    z: &LatentCode<T>,
    beauty: T,
    identity: &[T],
    cfg: &RecoveryConfig<T>,
    plugins: &Plugins<'_, T>,
) -> Result<Evaluation<T>> {
    let pred = cgen.synthesize_raw(z, beauty, identity)?;
    target.check_same_shape(&pred)?;
    let mut terms = image_terms(&pred, target, cfg, plugins, false)?;
    if nonzero(cfg.weights.lambda_label) {
        let mut cur = Vec::with_capacity(1 + identity.len());
        cur.push(beauty);
        cur.extend_from_slice(identity);
        terms.push((Term::Label, label_l1_values(&cur, &label_target.concat())?));
    }
    let (total, values, image_grad, _, label_extra) = combine(terms, &cfg.weights, pred.len())?;
    let (gz, gb, gi) = cgen.vjp_raw(z, beauty, identity, &image_grad)?;
    let mut label_grad = Vec::with_capacity(1 + gi.len());
    label_grad.push(gb);
    label_grad.extend(gi);
    if let Some(extra) = label_extra {
        for (g, e) in label_grad.iter_mut().zip(extra) {
            *g += e;
        }
    }
    Ok(Evaluation {
        total,
        terms: values,
        latent_grad: gz,
        label_grad: Some(label_grad),
        image: pred,
        image_grad,
    })
}

/// Joint recovery of `(z, beauty, identity)` under the conditional objective.
pub fn recover_conditional<T: Real>(
    target: &ImageBuffer<T>,
    label_target: &LabelVector<T>,
    cgen: &dyn ConditionalGenerator<T>,
    cfg: &RecoveryConfig<T>,
    plugins: &Plugins<'_, T>,
) -> Result<(LatentCode<T>, LabelVector<T>, RecoveryTrace)> {
    cfg.validate()?;
    if cgen.output_shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            expected: cgen.output_shape(),
            actual: target.shape(),
        });
    }
    if label_target.identity().len() != cgen.identity_dim() {
        return Err(Error::arg(format!(
            "label target identity has {} entries, generator expects {}",
            label_target.identity().len(),
            cgen.identity_dim()
        )));
    }
    check_plugins(cfg, plugins, true)?;
    let eta = T::lit(cfg.eta);
    let (lo, hi) = (T::lit(cfg.clip.beauty_range.0), T::lit(cfg.clip.beauty_range.1));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(3);

    let mut z = initial_latent(cfg, cgen.latent_dim())?;
    let (mut beauty, mut identity) = initial_label(cfg, cgen.identity_dim());
    let mut records = Vec::new();
    let mut best: Option<(LatentCode<T>, T, Vec<T>, T, usize)> = None;
    let mut stop = StopReason::MaxSteps;
    for step in 0..cfg.max_steps {
        let ev = conditional_objective(target, label_target, cgen, &z, beauty, &identity, cfg, plugins)?;
        let lg = ev.label_grad.as_deref().unwrap_or(&[]);
        check_finite(step, ev.total, &ev.latent_grad)?;
        check_finite(step, ev.total, lg)?;
        let gnorm = (norm2(&ev.latent_grad).powi(2) + norm2(lg).powi(2)).sqrt();
        records.push(StepRecord {
            step,
            total: ev.total.as_f64(),
            terms: ev.terms.iter().map(|(t, v)| (*t, v.as_f64())).collect(),
            grad_norm: gnorm.as_f64(),
            beauty: Some(beauty.as_f64()),
            identity_norm: Some(norm2(&identity).as_f64()),
        });
        if best.as_ref().is_none_or(|b| ev.total < b.3) {
            best = Some((z.clone(), beauty, identity.clone(), ev.total, step));
        }
        if converged(&records, cfg.stop_window, cfg.stop_tolerance) {
            stop = StopReason::Converged;
            break;
        }
        if step + 1 == cfg.max_steps {
            break;
        }
        let next = z
            .values()
            .iter()
            .zip(&ev.latent_grad)
            .map(|(&v, &g)| v - eta * g)
            .collect();
        z = z.with_values(next).map_err(|e| Error::NonFiniteLoss {
            step,
            detail: e.to_string(),
        })?;
        beauty = stochastic_clip(beauty - eta * lg[0], lo, hi, &mut rng)?;
        for (b, &g) in identity.iter_mut().zip(&lg[1..]) {
            *b -= eta * g;
        }
        if cfg.clip.renormalize_identity {
            let n = norm2(&identity);
            if n > T::zero() {
                identity.iter_mut().for_each(|v| *v /= n);
            }
        }
    }
    let (z, beauty, identity, _, best_step) = best.expect("max_steps >= 1");
    let label = if cfg.clip.renormalize_identity {
        LabelVector::new(beauty, identity)?
    } else {
        LabelVector::normalized(beauty, identity)?
    };
    Ok((
        z,
        label,
        RecoveryTrace {
            records,
            stop,
            best_step,
        },
    ))
}
