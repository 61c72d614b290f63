use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{Hyperplane, LatentCode, LatentSpace, TrainStats};
use crate::losses::{LabelVector, LossWeights};
use crate::recovery::{ClipPolicy, InitMode, RecoveryConfig};
use crate::scalar::Real;
use crate::trainer::ScoredSample;

pub(crate) fn parse_json<D: DeserializeOwned>(what: &str, text: &str) -> Result<D> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        what: what.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn from_f64<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

fn pretty<S: Serialize>(v: &S) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct LatentJson {
    dim: usize,
    space: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layers: Option<usize>,
    values: Vec<f64>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

impl LatentJson {
    pub(crate) fn from_code<T: Real>(z: &LatentCode<T>) -> Self {
        let layers = match z.space() {
            LatentSpace::Layered(k) => Some(k),
            _ => None,
        };
        Self {
            dim: z.dim(),
            space: z.space().tag().to_string(),
            layers,
            values: to_f64(z.values()),
            meta: z.meta.clone(),
        }
    }

    pub(crate) fn into_code<T: Real>(self) -> Result<LatentCode<T>> {
        if self.dim != self.values.len() {
            return Err(Error::invariant(format!(
                "latent `dim` is {} but {} values were given",
                self.dim,
                self.values.len()
            )));
        }
        let space = match (self.space.as_str(), self.layers) {
            ("Z", None) => LatentSpace::Z,
            ("W", None) => LatentSpace::W,
            ("LAYERED", Some(k)) => LatentSpace::Layered(k),
            ("LAYERED", None) => return Err(Error::invariant("LAYERED latent needs `layers`")),
            ("Z" | "W", Some(_)) => return Err(Error::invariant("`layers` is only valid for LAYERED latents")),
            (other, _) => return Err(Error::UnknownTag(other.to_string())),
        };
        let mut z = LatentCode::new(from_f64(&self.values), space)?;
        z.meta = self.meta;
        Ok(z)
    }
}

pub fn latent_to_json<T: Real>(z: &LatentCode<T>) -> String {
    pretty(&LatentJson::from_code(z))
}

pub fn latent_from_json<T: Real>(text: &str) -> Result<LatentCode<T>> {
    parse_json::<LatentJson>("latent code", text)?.into_code()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HyperplaneJson {
    dim: usize,
    normal: Vec<f64>,
    bias: f64,
    attribute: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    val_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rem_accuracy: Option<f64>,
}

pub fn hyperplane_to_json<T: Real>(h: &Hyperplane<T>) -> String {
    pretty(&HyperplaneJson {
        dim: h.dim(),
        normal: to_f64(h.normal()),
        bias: h.bias().as_f64(),
        attribute: h.attribute.clone(),
        val_accuracy: h.train_stats.val_accuracy,
        rem_accuracy: h.train_stats.rem_accuracy,
    })
}

pub fn hyperplane_from_json<T: Real>(text: &str) -> Result<Hyperplane<T>> {
    let j: HyperplaneJson = parse_json("hyperplane", text)?;
    if j.dim != j.normal.len() {
        return Err(Error::invariant(format!(
            "hyperplane `dim` is {} but the normal has {} entries",
            j.dim,
            j.normal.len()
        )));
    }
    let mut h = Hyperplane::new(from_f64(&j.normal), T::lit(j.bias), j.attribute)?;
    h.train_stats = TrainStats {
        val_accuracy: j.val_accuracy,
        rem_accuracy: j.rem_accuracy,
    };
    Ok(h)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SampleJson {
    index: usize,
    latent: LatentJson,
    score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_ref: Option<String>,
}

/// One compact JSON line, no trailing newline.
pub fn sample_to_json_line<T: Real>(s: &ScoredSample<T>) -> String {
    serde_json::to_string(&SampleJson {
        index: s.index,
        latent: LatentJson::from_code(&s.latent),
        score: s.score.as_f64(),
        image_ref: s.image_ref.clone(),
    })
    .expect("serializable")
}

pub fn sample_from_json<T: Real>(text: &str) -> Result<ScoredSample<T>> {
    let j: SampleJson = parse_json("scored sample", text)?;
    if !j.score.is_finite() {
        return Err(Error::invariant("sample `score` must be finite"));
    }
    Ok(ScoredSample {
        index: j.index,
        latent: j.latent.into_code()?,
        score: T::lit(j.score),
        image_ref: j.image_ref,
    })
}

/// Parses one sample per non-blank line; errors carry the file line.
pub fn samples_from_jsonl<T: Real>(text: &str) -> Result<Vec<ScoredSample<T>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            sample_from_json(l).map_err(|e| match e {
                Error::Parse {
                    what, column, message, ..
                } => Error::Parse {
                    what,
                    line: i + 1,
                    column,
                    message,
                },
                other => Error::invariant(format!("line {}: {other}", i + 1)),
            })
        })
        .collect()
}

pub fn samples_to_jsonl<T: Real>(samples: &[ScoredSample<T>]) -> String {
    samples.iter().map(|s| sample_to_json_line(s) + "\n").collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct WeightsJson {
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    lambda4: f64,
    lambda5: f64,
    lambda6: f64,
    lambda_label: f64,
    lambda_ip: f64,
}

impl Default for WeightsJson {
    fn default() -> Self {
        LossWeights::default().into()
    }
}

impl From<LossWeights> for WeightsJson {
    fn from(w: LossWeights) -> Self {
        Self {
            lambda1: w.lambda1,
            lambda2: w.lambda2,
            lambda3: w.lambda3,
            lambda4: w.lambda4,
            lambda5: w.lambda5,
            lambda6: w.lambda6,
            lambda_label: w.lambda_label,
            lambda_ip: w.lambda_ip,
        }
    }
}

impl From<WeightsJson> for LossWeights {
    fn from(w: WeightsJson) -> Self {
        Self {
            lambda1: w.lambda1,
            lambda2: w.lambda2,
            lambda3: w.lambda3,
            lambda4: w.lambda4,
            lambda5: w.lambda5,
            lambda6: w.lambda6,
            lambda_label: w.lambda_label,
            lambda_ip: w.lambda_ip,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ClipJson {
    beauty_range: [f64; 2],
    renormalize_identity: bool,
}

impl Default for ClipJson {
    fn default() -> Self {
        let c = ClipPolicy::default();
        Self {
            beauty_range: [c.beauty_range.0, c.beauty_range.1],
            renormalize_identity: c.renormalize_identity,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ConfigJson {
    weights: WeightsJson,
    eta: f64,
    max_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    init: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    init_latent: Option<LatentJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z_avg: Option<LatentJson>,
    clip: ClipJson,
    stop_tolerance: f64,
    stop_window: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    msssim_levels: Option<usize>,
    seed: u64,
}

impl Default for ConfigJson {
    fn default() -> Self {
        let d = RecoveryConfig::<f64>::default();
        Self {
            weights: d.weights.into(),
            eta: d.eta,
            max_steps: d.max_steps,
            init: None,
            init_latent: None,
            z_avg: None,
            clip: ClipJson::default(),
            stop_tolerance: d.stop_tolerance,
            stop_window: d.stop_window,
            msssim_levels: d.msssim_levels,
            seed: d.seed,
        }
    }
}

/// Missing keys take their defaults. `init` is one of `ZERO`, `AVERAGE`,
/// `EXPLICIT` (with `init_latent`) or `SEEDED_RANDOM`.
pub fn config_from_json<T: Real>(text: &str) -> Result<RecoveryConfig<T>> {
    let j: ConfigJson = parse_json("recovery config", text)?;
    let init = match (j.init.as_deref(), j.init_latent) {
        (None, None) => None,
        (Some("ZERO"), None) => Some(InitMode::Zero),
        (Some("AVERAGE"), None) => Some(InitMode::Average),
        (Some("SEEDED_RANDOM"), None) => Some(InitMode::SeededRandom),
        (Some("EXPLICIT") | None, Some(l)) => Some(InitMode::Explicit(l.into_code()?)),
        (Some("EXPLICIT"), None) => return Err(Error::invariant("EXPLICIT init needs `init_latent`")),
        (Some(t @ ("ZERO" | "AVERAGE" | "SEEDED_RANDOM")), Some(_)) => {
            return Err(Error::invariant(format!("`init_latent` conflicts with init {t}")))
        }
        (Some(other), _) => return Err(Error::UnknownTag(other.to_string())),
    };
    if matches!(init, Some(InitMode::Average)) && j.z_avg.is_none() {
        return Err(Error::invariant("AVERAGE init needs `z_avg`"));
    }
    let cfg = RecoveryConfig {
        weights: j.weights.into(),
        eta: j.eta,
        max_steps: j.max_steps,
        init,
        z_avg: j.z_avg.map(LatentJson::into_code).transpose()?,
        clip: ClipPolicy {
            beauty_range: (j.clip.beauty_range[0], j.clip.beauty_range[1]),
            renormalize_identity: j.clip.renormalize_identity,
        },
        stop_tolerance: j.stop_tolerance,
        stop_window: j.stop_window,
        msssim_levels: j.msssim_levels,
        seed: j.seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn config_to_json<T: Real>(cfg: &RecoveryConfig<T>) -> String {
    let (init, init_latent) = match &cfg.init {
        None => (None, None),
        Some(InitMode::Zero) => (Some("ZERO"), None),
        Some(InitMode::Average) => (Some("AVERAGE"), None),
        Some(InitMode::SeededRandom) => (Some("SEEDED_RANDOM"), None),
        Some(InitMode::Explicit(z)) => (Some("EXPLICIT"), Some(LatentJson::from_code(z))),
    };
    pretty(&ConfigJson {
        weights: cfg.weights.into(),
        eta: cfg.eta,
        max_steps: cfg.max_steps,
        init: init.map(str::to_string),
        init_latent,
        z_avg: cfg.z_avg.as_ref().map(LatentJson::from_code),
        clip: ClipJson {
            beauty_range: [cfg.clip.beauty_range.0, cfg.clip.beauty_range.1],
            renormalize_identity: cfg.clip.renormalize_identity,
        },
        stop_tolerance: cfg.stop_tolerance,
        stop_window: cfg.stop_window,
        msssim_levels: cfg.msssim_levels,
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LabelJson {
    beauty: f64,
    #[serde(default)]
    identity: Vec<f64>,
}

pub fn label_to_json<T: Real>(l: &LabelVector<T>) -> String {
    pretty(&LabelJson {
        beauty: l.beauty().as_f64(),
        identity: to_f64(l.identity()),
    })
}

pub fn label_from_json<T: Real>(text: &str) -> Result<LabelVector<T>> {
    let j: LabelJson = parse_json("label", text)?;
    LabelVector::new(T::lit(j.beauty), from_f64(&j.identity))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code() -> LatentCode<f64> {
        LatentCode::new(vec![0.1, -1.0 / 3.0, 2e-17, 5.5], LatentSpace::Layered(2))
            .unwrap()
            .with_meta("source", "test")
    }

    #[test]
    fn latent_round_trip_is_exact() {
        let z = code();
        let text = latent_to_json(&z);
        assert_eq!(latent_from_json::<f64>(&text).unwrap(), z);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["space"], "LAYERED");
        assert_eq!(v["layers"], 2);
        assert_eq!(v["dim"], 4);
        let plain = LatentCode::from_vec(vec![1.0f32, 2.5]).unwrap();
        assert_eq!(latent_from_json::<f32>(&latent_to_json(&plain)).unwrap(), plain);
    }

    #[test]
    fn latent_reader_checks_invariants() {
        let bad_dim = r#"{"dim": 3, "space": "Z", "values": [1, 2]}"#;
        assert!(latent_from_json::<f64>(bad_dim)
            .unwrap_err()
            .to_string()
            .contains("dim"));
        assert!(
            latent_from_json::<f64>(r#"{"dim": 3, "space": "LAYERED", "layers": 2, "values": [1, 2, 3]}"#).is_err()
        );
        assert!(matches!(
            latent_from_json::<f64>(r#"{"dim": 1, "space": "Q", "values": [1]}"#),
            Err(Error::UnknownTag(_))
        ));
        let e = latent_from_json::<f64>("{\n  \"dim\": 1,\n  \"space\": \"Z\"\n  \"values\": [1]\n}").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e}");
    }

    #[test]
    fn hyperplane_round_trip() {
        let mut h = Hyperplane::from_unnormalized(&[3.0, -4.0, 0.1], 0.25, "beauty").unwrap();
        h.train_stats.val_accuracy = Some(0.94125);
        let back: Hyperplane<f64> = hyperplane_from_json(&hyperplane_to_json(&h)).unwrap();
        assert_eq!(back, h);
        assert!(hyperplane_from_json::<f64>(r#"{"dim":2,"normal":[1,1],"bias":0,"attribute":"a"}"#).is_err());
        assert!(hyperplane_from_json::<f64>(r#"{"dim":3,"normal":[1,0],"bias":0,"attribute":"a"}"#).is_err());
    }

    #[test]
    fn samples_round_trip_and_report_lines() {
        let s = vec![
            ScoredSample {
                index: 0,
                latent: LatentCode::from_vec(vec![0.5, 1.5]).unwrap(),
                score: 0.3,
                image_ref: Some("images/000000.pgm".into()),
            },
            ScoredSample {
                index: 1,
                latent: LatentCode::from_vec(vec![-0.5, 0.25]).unwrap(),
                score: -1.0,
                image_ref: None,
            },
        ];
        let text = samples_to_jsonl(&s);
        assert_eq!(text.lines().count(), 2);
        assert_eq!(samples_from_jsonl::<f64>(&text).unwrap(), s);
        let broken = format!("{}{{\"index\": 2,\n", text);
        assert!(matches!(
            samples_from_jsonl::<f64>(&broken),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn config_defaults_and_round_trip() {
        let cfg: RecoveryConfig<f64> = config_from_json("{}").unwrap();
        assert_eq!(cfg, RecoveryConfig::default());
        let custom = RecoveryConfig {
            weights: LossWeights::pixel_only(),
            eta: 0.0,
            max_steps: 7,
            init: Some(InitMode::Explicit(LatentCode::from_vec(vec![0.1, 0.2]).unwrap())),
            z_avg: Some(LatentCode::from_vec(vec![0.0, 1.0]).unwrap()),
            msssim_levels: Some(2),
            seed: 9,
            ..Default::default()
        };
        assert_eq!(config_from_json::<f64>(&config_to_json(&custom)).unwrap(), custom);
        assert!(config_from_json::<f64>(r#"{"eta": -1}"#).is_err());
        assert!(config_from_json::<f64>(r#"{"init": "AVERAGE"}"#).is_err());
        assert!(config_from_json::<f64>(r#"{"init": "RESNET"}"#).is_err());
        assert!(config_from_json::<f64>(r#"{"clip": {"beauty_range": [1, 0]}}"#).is_err());
        let w: RecoveryConfig<f64> = config_from_json(r#"{"weights": {"lambda2": 0}}"#).unwrap();
        assert_eq!(w.weights.lambda2, 0.0);
        assert_eq!(w.weights.lambda1, 1.0);
    }

    #[test]
    fn label_round_trip() {
        let l = LabelVector::normalized(0.3, vec![1.0, 2.0, 2.0]).unwrap();
        assert_eq!(label_from_json::<f64>(&label_to_json(&l)).unwrap(), l);
        assert!(label_from_json::<f64>(r#"{"beauty": 1.5}"#).is_err());
        assert!(label_from_json::<f64>(r#"{"beauty": 0.5, "identity": [1, 1]}"#).is_err());
    }
}
