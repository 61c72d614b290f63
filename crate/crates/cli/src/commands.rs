use std::fs;
use std::path::{Path, PathBuf};

use latent_edit::editing::{beautify_conditional, conditional_alphas, sweep_latents};
use latent_edit::io::{
    pnm_extension, read_config, read_dataset, read_featset, read_hyperplane, read_image, read_label, read_latent,
    write_dataset, write_hyperplane, write_image, write_label, write_latent,
};
use latent_edit::metrics::{brisque_features, brisque_score, BrisqueModel, Embedder};
use latent_edit::recovery::{BuiltinPlugins, Plugins, RecoveryTrace};
use latent_edit::toy::{BlobGenerator, ToyConditionalGenerator, ToyCritic, ToyEmbedder, ToyModel, ToySpec};
use latent_edit::trainer::{accuracy, protocol_split, sample_one, train_svm};
use latent_edit::{
    advisory_range, distance, frechet_distance, gaussian_stats, ConditionalGenerator, EditMethod, FeatureSet,
    Generator, ImageBuffer, LatentCode, LatentSpace, RecoveryConfig, Scorer, SvmConfig,
};
use rayon::prelude::*;
use serde_json::json;

use crate::fail::{input, output, usage, write_err, Fail};

type Res<T = ()> = Result<T, Fail>;

const IMAGE_EXTENSIONS: &[&str] = &["pgm", "ppm", "pnm", "png"];

fn model(spec: &str) -> Res<ToyModel> {
    let parsed: ToySpec = spec.parse().map_err(|e| usage(format!("model spec `{spec}`: {e}")))?;
    parsed.build().map_err(|e| usage(format!("model spec `{spec}`: {e}")))
}

fn blob_generator(spec: &str) -> Res<BlobGenerator> {
    match model(spec)? {
        ToyModel::Blob(g) => Ok(g),
        _ => Err(usage(format!(
            "`{spec}` is not an unconditional generator (expected blob:...)"
        ))),
    }
}

fn conditional_generator(spec: &str) -> Res<ToyConditionalGenerator> {
    match model(spec)? {
        ToyModel::CondBlob(g) => Ok(g),
        _ => Err(usage(format!(
            "`{spec}` is not a conditional generator (expected condblob:...)"
        ))),
    }
}

fn scorer(spec: &str) -> Res<Box<dyn Scorer<f64>>> {
    match model(spec)? {
        ToyModel::LatentLinear(s) => Ok(Box::new(s)),
        ToyModel::Brightness(s) => Ok(Box::new(s)),
        _ => Err(usage(format!(
            "`{spec}` is not a scorer (expected latentlinear:... or brightness)"
        ))),
    }
}

fn pool(jobs: usize) -> Res<rayon::ThreadPool> {
    if jobs == 0 {
        return Err(usage("--jobs must be >= 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Fail::Runtime(e.into()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Res {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| write_err(path, e))
}

fn create_dir(dir: &Path) -> Res {
    fs::create_dir_all(dir).map_err(|e| write_err(dir, e))
}

pub fn sample_dataset(gen: &str, scorer_spec: &str, n: usize, seed: u64, out: &Path, images: bool, jobs: usize) -> Res {
    if n == 0 {
        return Err(usage("-n must be >= 1"));
    }
    let gen = blob_generator(gen)?;
    let scorer = scorer(scorer_spec)?;
    let drawn = pool(jobs)?.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| sample_one::<f64>(&gen, scorer.as_ref(), seed, i))
            .collect::<latent_edit::Result<Vec<_>>>()
    })?;
    let (samples, imgs): (Vec<_>, Vec<_>) = drawn.into_iter().unzip();
    output(out, write_dataset(out, &samples, images.then_some(&imgs[..])))?;
    println!("wrote {n} samples to {}", out.display());
    Ok(())
}

pub fn train_hyperplane(dataset: &Path, cfg: &SvmConfig, attribute: &str, out: &Path) -> Res {
    let samples = input(dataset, read_dataset::<f64>)?;
    cfg.validate()?;
    cfg.check_counts(samples.len())?;
    let split = protocol_split(&samples, cfg)?;
    let mut h = train_svm(&split.train, cfg)?;
    h.attribute = attribute.to_string();
    let val = accuracy(&h, &split.validation)?;
    let rem = if split.remaining.is_empty() {
        None
    } else {
        Some(accuracy(&h, &split.remaining)?)
    };
    h.train_stats.val_accuracy = Some(val);
    h.train_stats.rem_accuracy = rem;
    output(out, write_hyperplane(out, &h))?;
    println!("val_accuracy {val:.4}");
    match rem {
        Some(r) => println!("rem_accuracy {r:.4}"),
        None => println!("rem_accuracy n/a"),
    }
    Ok(())
}

pub struct RecoverArgs {
    pub image: PathBuf,
    pub generator: String,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub trace: Option<PathBuf>,
    pub eta: Option<f64>,
    pub max_steps: Option<usize>,
    pub seed: Option<u64>,
    pub z_avg: Option<PathBuf>,
    pub label_target: Option<PathBuf>,
    pub label_out: Option<PathBuf>,
}

fn write_trace(path: &Path, trace: &RecoveryTrace) -> Res {
    let mut text = String::new();
    for r in &trace.records {
        let terms: serde_json::Map<_, _> = r.terms.iter().map(|(t, v)| (t.name().to_string(), json!(v))).collect();
        let mut line = json!({ "step": r.step, "total": r.total, "grad_norm": r.grad_norm, "terms": terms });
        if let Some(b) = r.beauty {
            line["beauty"] = json!(b);
        }
        text.push_str(&line.to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| write_err(path, e))
}

pub fn recover(a: RecoverArgs) -> Res {
    let target = input(&a.image, read_image::<f64>)?;
    let mut cfg = match &a.config {
        Some(p) => input(p, read_config::<f64>)?,
        None => RecoveryConfig::default(),
    };
    if let Some(eta) = a.eta {
        cfg.eta = eta;
    }
    if let Some(m) = a.max_steps {
        cfg.max_steps = m;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(p) = &a.z_avg {
        cfg.z_avg = Some(input(p, read_latent::<f64>)?);
    }
    let gen = model(&a.generator)?;
    if cfg.z_avg.is_none() && cfg.weights.lambda5 != 0.0 {
        // toy latents are drawn from N(0, I)
        let dim = match &gen {
            ToyModel::Blob(g) => Generator::<f64>::latent_dim(g),
            ToyModel::CondBlob(g) => ConditionalGenerator::<f64>::latent_dim(g),
            _ => return Err(usage(format!("`{}` is not a generator", a.generator))),
        };
        cfg.z_avg = Some(LatentCode::zeros(dim, LatentSpace::Z)?);
    }
    cfg.validate().map_err(usage)?;
    let builtin = BuiltinPlugins::new(cfg.seed, target.channels())?;
    let critic = ToyCritic;
    let plugins = Plugins {
        critic: (cfg.weights.lambda6 != 0.0).then_some(&critic as _),
        ..builtin.plugins::<f64>()
    };
    let trace = match gen {
        ToyModel::Blob(gen) => {
            if a.label_target.is_some() {
                return Err(usage("--label-target needs a conditional generator"));
            }
            let (z, trace) = latent_edit::recover(&target, &gen, &cfg, &plugins)?;
            output(&a.out, write_latent(&a.out, &z))?;
            trace
        }
        ToyModel::CondBlob(cgen) => {
            let (Some(lt), Some(lo)) = (&a.label_target, &a.label_out) else {
                return Err(usage("a conditional generator needs --label-target and --label-out"));
            };
            let label_target = input(lt, read_label::<f64>)?;
            let (z, label, trace) = latent_edit::recover_conditional(&target, &label_target, &cgen, &cfg, &plugins)?;
            output(&a.out, write_latent(&a.out, &z))?;
            output(lo, write_label(lo, &label))?;
            println!("beauty {:.6}", label.beauty());
            trace
        }
        _ => return Err(usage(format!("`{}` is not a generator", a.generator))),
    };
    if let Some(p) = &a.trace {
        write_trace(p, &trace)?;
    }
    println!(
        "loss {:.6e} steps {} stop {}",
        trace.best_total(),
        trace.steps(),
        trace.stop.tag()
    );
    Ok(())
}

fn frame_name(k: usize, alpha: f64, channels: usize) -> String {
    format!("frame_{k:03}_alpha_{alpha:.3}.{}", pnm_extension(channels))
}

pub fn edit(latent: &Path, hyperplane: &Path, range: (f64, f64, f64), gen: &str, out: &Path, jobs: usize) -> Res {
    let z = input(latent, read_latent::<f64>)?;
    let h = input(hyperplane, read_hyperplane::<f64>)?;
    let gen = blob_generator(gen)?;
    let (start, end, step) = range;
    let latents = sweep_latents(&z, &h, start, end, step)?;
    let limit = advisory_range(EditMethod::Hyperplane);
    if latents.iter().any(|(a, _)| a.abs() > limit) {
        eprintln!("warning: edit distances beyond {limit} may leave the realistic range");
    }
    let images = pool(jobs)?.install(|| {
        latents
            .par_iter()
            .map(|(_, l)| Generator::<f64>::synthesize(&gen, l))
            .collect::<latent_edit::Result<Vec<_>>>()
    })?;
    create_dir(out)?;
    let mut frames = Vec::new();
    for (k, ((alpha, l), img)) in latents.iter().zip(&images).enumerate() {
        let name = frame_name(k, *alpha, img.channels());
        let path = out.join(&name);
        output(&path, write_image(&path, img))?;
        frames.push(json!({ "index": k, "alpha": alpha, "distance": distance(&h, l)?, "file": name }));
    }
    write_json(
        &out.join("manifest.json"),
        &json!({ "method": "hyperplane", "attribute": h.attribute, "start": start, "end": end, "step": step, "frames": frames }),
    )?;
    println!("wrote {} frames to {}", frames.len(), out.display());
    Ok(())
}

pub fn beautify(latent: &Path, label: &Path, alpha_step: f64, frames: usize, gen: &str, out: &Path) -> Res {
    let z = input(latent, read_latent::<f64>)?;
    let label = input(label, read_label::<f64>)?;
    let cgen = conditional_generator(gen)?;
    let (alphas, capped) = conditional_alphas(label.beauty(), alpha_step, frames)?;
    if capped {
        eprintln!("warning: beauty offsets above 1.0 were truncated to 1.0");
    }
    let limit = advisory_range(EditMethod::Conditional);
    if alphas.last().is_some_and(|a| a - label.beauty() > limit + 1e-12) {
        eprintln!("warning: beauty increases beyond {limit} may leave the realistic range");
    }
    let images = beautify_conditional(&z, label.beauty(), label.identity(), &alphas, &cgen)?;
    create_dir(out)?;
    let mut listed = Vec::new();
    for (k, (alpha, img)) in alphas.iter().zip(&images).enumerate() {
        let name = frame_name(k, *alpha, img.channels());
        let path = out.join(&name);
        output(&path, write_image(&path, img))?;
        listed.push(json!({ "index": k, "alpha": alpha, "file": name }));
    }
    write_json(
        &out.join("manifest.json"),
        &json!({ "method": "conditional", "alpha_hat": label.beauty(), "alpha_step": alpha_step, "truncated": capped, "frames": listed }),
    )?;
    println!("wrote {} frames to {}", listed.len(), out.display());
    Ok(())
}

fn image_files(dir: &Path) -> Res<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| usage(format!("cannot list {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| IMAGE_EXTENSIONS.contains(&x.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(usage(format!("no images in {}", dir.display())));
    }
    Ok(files)
}

/// Image files under a path: the path itself, or the sorted images in a directory.
fn images_at(path: &Path) -> Res<Vec<(PathBuf, ImageBuffer<f64>)>> {
    let files = if path.is_dir() {
        image_files(path)?
    } else {
        vec![path.to_path_buf()]
    };
    files
        .into_iter()
        .map(|f| input(&f, read_image::<f64>).map(|img| (f, img)))
        .collect()
}

/// Feature rows from a FeatureSet file, or toy embeddings of a directory's images.
fn features_at(path: &Path) -> Res<FeatureSet<f64>> {
    if path.is_dir() {
        let rows = images_at(path)?
            .iter()
            .map(|(_, img)| ToyEmbedder.embed(img))
            .collect::<latent_edit::Result<Vec<_>>>()?;
        Ok(FeatureSet::from_rows(&rows)?)
    } else {
        input(path, read_featset::<f64>)
    }
}

fn finish(metric: &str, value: f64, report: Option<&Path>, extra: serde_json::Value) -> Res {
    println!("{value:.10}");
    if let Some(p) = report {
        let mut doc = json!({ "metric": metric, "value": value });
        if let (Some(d), Some(e)) = (doc.as_object_mut(), extra.as_object()) {
            d.extend(e.clone());
        }
        write_json(p, &doc)?;
    }
    Ok(())
}

pub fn fid(a: &Path, b: &Path, report: Option<&Path>) -> Res {
    let (fa, fb) = (features_at(a)?, features_at(b)?);
    if fa.dim() != fb.dim() {
        return Err(usage(format!("feature dims differ: {} vs {}", fa.dim(), fb.dim())));
    }
    let v = frechet_distance(&gaussian_stats(&fa), &gaussian_stats(&fb))?;
    finish(
        "fid",
        v,
        report,
        json!({ "n_a": fa.count(), "n_b": fb.count(), "dim": fa.dim() }),
    )
}

pub fn brisque(image: &Path, model_path: &Path, report: Option<&Path>) -> Res {
    let model: BrisqueModel = input(model_path, |p| {
        let text = fs::read_to_string(p)?;
        serde_json::from_str(&text).map_err(|e| latent_edit::Error::Parse {
            what: "BRISQUE model".into(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    })?;
    model
        .validate()
        .map_err(|e| usage(format!("{}: {e}", model_path.display())))?;
    let mut per = Vec::new();
    let mut total = 0.0;
    for (file, img) in images_at(image)? {
        let f = brisque_features(&img)?;
        let s = brisque_score(&f, &model)?;
        total += s;
        per.push(json!({ "file": file.display().to_string(), "score": s, "features": f }));
    }
    let mean = total / per.len() as f64;
    finish("brisque", mean, report, json!({ "images": per }))
}

pub fn identity_distance(a: &Path, b: &Path, report: Option<&Path>) -> Res {
    let is_image = |p: &Path| {
        p.is_dir()
            || p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| IMAGE_EXTENSIONS.contains(&x.to_ascii_lowercase().as_str()))
    };
    let distances: Vec<f64> = if is_image(a) && is_image(b) {
        let (ia, ib) = (images_at(a)?, images_at(b)?);
        if ia.len() != ib.len() {
            return Err(usage(format!("image counts differ: {} vs {}", ia.len(), ib.len())));
        }
        ia.iter()
            .zip(&ib)
            .map(|((_, x), (_, y))| identity_distance_of(x, y))
            .collect::<Res<_>>()?
    } else {
        let (fa, fb) = (input(a, read_featset::<f64>)?, input(b, read_featset::<f64>)?);
        if fa.count() != fb.count() || fa.dim() != fb.dim() {
            return Err(usage(format!(
                "feature sets differ in shape: {}x{} vs {}x{}",
                fa.count(),
                fa.dim(),
                fb.count(),
                fb.dim()
            )));
        }
        (0..fa.count())
            .map(|i| {
                fa.row(i)
                    .iter()
                    .zip(fb.row(i))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    };
    let mean = distances.iter().sum::<f64>() / distances.len() as f64;
    finish(
        "identity_distance",
        mean,
        report,
        json!({ "pairs": distances.len(), "distances": distances }),
    )
}

fn identity_distance_of(x: &ImageBuffer<f64>, y: &ImageBuffer<f64>) -> Res<f64> {
    Ok(latent_edit::metrics::identity_distance(x, y, &ToyEmbedder)?)
}
