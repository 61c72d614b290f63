//! Readers and writers for every on-disk artifact: PGM/PPM images (PNG on
//! read), latent codes, hyperplanes, scored datasets, feature sets, recovery
//! configs and labels. Writers produce exactly what their readers accept.

mod dataset;
mod featset;
mod json;
mod pnm;

pub use dataset::{image_path, image_ref, read_dataset, write_dataset, IMAGES_DIR, SAMPLES_FILE};
pub use featset::{
    featset_from_jsonl, featset_from_text, featset_to_jsonl, featset_to_text, read_featset, write_featset,
};
pub use json::{
    config_from_json, config_to_json, hyperplane_from_json, hyperplane_to_json, label_from_json, label_to_json,
    latent_from_json, latent_to_json, sample_from_json, sample_to_json_line, samples_from_jsonl, samples_to_jsonl,
};
pub use pnm::{decode_png, decode_pnm, encode_pnm, pnm_extension, quantize, read_image, write_image};

use std::path::Path;

use crate::error::Result;
use crate::latent::{Hyperplane, LatentCode};
use crate::losses::LabelVector;
use crate::recovery::RecoveryConfig;
use crate::scalar::Real;

pub fn read_latent<T: Real>(path: impl AsRef<Path>) -> Result<LatentCode<T>> {
    latent_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_latent<T: Real>(path: impl AsRef<Path>, z: &LatentCode<T>) -> Result<()> {
    Ok(std::fs::write(path, latent_to_json(z))?)
}

pub fn read_hyperplane<T: Real>(path: impl AsRef<Path>) -> Result<Hyperplane<T>> {
    hyperplane_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_hyperplane<T: Real>(path: impl AsRef<Path>, h: &Hyperplane<T>) -> Result<()> {
    Ok(std::fs::write(path, hyperplane_to_json(h))?)
}

pub fn read_config<T: Real>(path: impl AsRef<Path>) -> Result<RecoveryConfig<T>> {
    config_from_json(&std::fs::read_to_string(path)?)
}

pub fn read_label<T: Real>(path: impl AsRef<Path>) -> Result<LabelVector<T>> {
    label_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_label<T: Real>(path: impl AsRef<Path>, l: &LabelVector<T>) -> Result<()> {
    Ok(std::fs::write(path, label_to_json(l))?)
}
