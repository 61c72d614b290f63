use std::fs;
use std::path::{Path, PathBuf};

use super::json::{sample_to_json_line, samples_from_jsonl};
use super::pnm::{encode_pnm, pnm_extension};
use crate::error::Result;
use crate::image::ImageBuffer;
use crate::scalar::Real;
use crate::trainer::ScoredSample;

pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const IMAGES_DIR: &str = "images";

/// Relative path of a dataset image, e.g. `images/000042.pgm`.
pub fn image_ref(index: usize, channels: usize) -> String {
    format!("{IMAGES_DIR}/{index:06}.{}", pnm_extension(channels))
}

/// Writes `samples.jsonl` and, when images are given, `images/NNNNNN.*`
/// alongside; each sample's `image_ref` is set to its image path.
pub fn write_dataset<T: Real>(
    dir: impl AsRef<Path>,
    samples: &[ScoredSample<T>],
    images: Option<&[ImageBuffer<T>]>,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut lines = String::new();
    if let Some(images) = images {
        fs::create_dir_all(dir.join(IMAGES_DIR))?;
        for (s, img) in samples.iter().zip(images) {
            let rel = image_ref(s.index, img.channels());
            fs::write(dir.join(&rel), encode_pnm(img))?;
            let mut s = s.clone();
            s.image_ref = Some(rel);
            lines.push_str(&sample_to_json_line(&s));
            lines.push('\n');
        }
    } else {
        for s in samples {
            lines.push_str(&sample_to_json_line(s));
            lines.push('\n');
        }
    }
    fs::write(dir.join(SAMPLES_FILE), lines)?;
    Ok(())
}

pub fn read_dataset<T: Real>(dir: impl AsRef<Path>) -> Result<Vec<ScoredSample<T>>> {
    samples_from_jsonl(&fs::read_to_string(dir.as_ref().join(SAMPLES_FILE))?)
}

/// Resolves a sample's `image_ref` against the dataset directory.
pub fn image_path<T>(dir: impl AsRef<Path>, s: &ScoredSample<T>) -> Option<PathBuf> {
    s.image_ref.as_ref().map(|r| dir.as_ref().join(r))
}
