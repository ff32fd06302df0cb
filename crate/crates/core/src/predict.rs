//! Applying a trained generator checkpoint to new satellite images.

use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    denormalize, list_images, load_rgb, normalize, resize_image, save_rgb, ImageFormat,
    PixelDomain, PixelTensor,
};
use crate::error::{Error, Result};
use crate::model::{ArchitectureSpec, Generator};
use crate::nn::{derive_seed, seeded_rng, Rng};
use crate::train::CheckpointRecord;

/// Decodes an image of any size, resizes it to `size`×`size` and scales it
/// into `[-1, 1]`.
pub fn load_image(path: &Path, size: usize) -> Result<PixelTensor> {
    let raw = PixelTensor::from_rgb(&load_rgb(path)?);
    normalize(&resize_image(&raw, size, size)?)
}

/// Inference-time dropout policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dropout {
    /// Dropout stays active; each image gets its own stream derived from
    /// this seed and the image's file name.
    Seeded(u64),
    Disabled,
}

impl Dropout {
    pub fn rng_for(&self, file_name: &str) -> Option<Rng> {
        match *self {
            Dropout::Seeded(seed) => {
                Some(seeded_rng(derive_seed(seed, &format!("predict:{file_name}"), 0)))
            }
            Dropout::Disabled => None,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match *self {
            Dropout::Seeded(seed) => Some(seed),
            Dropout::Disabled => None,
        }
    }
}

/// Provenance written next to every mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskMeta {
    pub checkpoint_epoch: usize,
    pub architecture_hash: String,
    pub input_path: PathBuf,
    pub dropout_seed: Option<u64>,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRequest {
    pub image_path: PathBuf,
    pub checkpoint: CheckpointRecord,
    pub output_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub mask_path: PathBuf,
    pub sidecar_path: PathBuf,
}

/// `mask.png` → `mask.meta.json`.
pub fn sidecar_path(mask: &Path) -> PathBuf {
    mask.with_extension("meta.json")
}

/// A loaded checkpoint, reusable across images.
pub struct Predictor {
    generator: Generator,
    record: CheckpointRecord,
    dropout: Dropout,
    format: ImageFormat,
}

impl Predictor {
    /// Fails if the checkpoint was not trained with `arch`.
    pub fn load(record: &CheckpointRecord, arch: &ArchitectureSpec, dropout: Dropout) -> Result<Self> {
        Ok(Self {
            generator: record.load_generator(arch)?,
            record: record.clone(),
            dropout,
            format: ImageFormat::Png,
        })
    }

    pub fn with_format(mut self, format: ImageFormat) -> Self {
        self.format = format;
        self
    }

    pub fn input_size(&self) -> usize {
        self.generator.spec().input_size
    }

    /// Runs the generator once on a normalised image and returns the mask in
    /// `[0, 255]`.
    pub fn translate(&mut self, image: &PixelTensor, rng: Option<&mut Rng>) -> Result<RgbImage> {
        if image.domain() != PixelDomain::Normalized {
            return Err(Error::Domain("predictor input must be normalized".into()));
        }
        let out = self.generator.forward(&image.to_tensor(), rng, false)?;
        denormalize(&PixelTensor::from_tensor(&out, 0, PixelDomain::Normalized)?)?.to_rgb()
    }

    /// Predicts one file and writes the mask plus its sidecar. On failure
    /// neither file is left behind.
    pub fn predict_file(&mut self, input: &Path, output: &Path) -> Result<Prediction> {
        let image = load_image(input, self.input_size())?;
        let file_name = input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut rng = self.dropout.rng_for(&file_name);
        let mask = self.translate(&image, rng.as_mut())?;
        save_rgb(&mask, output, self.format)?;
        let meta = MaskMeta {
            checkpoint_epoch: self.record.epoch,
            architecture_hash: self.record.meta.architecture_hash.clone(),
            input_path: input.to_path_buf(),
            dropout_seed: self.dropout.seed(),
            timestamp: humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string(),
        };
        let sidecar = sidecar_path(output);
        let mut json = serde_json::to_string_pretty(&meta).expect("metadata serialises");
        json.push('\n');
        if let Err(e) = crate::write_atomic(&sidecar, json.as_bytes()) {
            let _ = std::fs::remove_file(output);
            return Err(e);
        }
        Ok(Prediction {
            mask_path: output.to_path_buf(),
            sidecar_path: sidecar,
        })
    }
}

/// Single-image prediction.
pub fn predict(req: &PredictionRequest, arch: &ArchitectureSpec, dropout: Dropout) -> Result<Prediction> {
    Predictor::load(&req.checkpoint, arch, dropout)?.predict_file(&req.image_path, &req.output_path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageResult {
    pub input: PathBuf,
    pub outcome: std::result::Result<Prediction, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub results: Vec<ImageResult>,
}

impl BatchReport {
    pub fn succeeded(&self) -> usize {
        self.results.iter().filter(|r| r.outcome.is_ok()).count()
    }

    pub fn failures(&self) -> impl Iterator<Item = (&Path, &str)> {
        self.results.iter().filter_map(|r| match &r.outcome {
            Err(e) => Some((r.input.as_path(), e.as_str())),
            Ok(_) => None,
        })
    }

    pub fn summary(&self) -> String {
        format!(
            "{} images: {} masks written, {} failed",
            self.results.len(),
            self.succeeded(),
            self.results.len() - self.succeeded()
        )
    }
}

/// Predicts every image in `dir` into `out_dir/<stem>.<ext>`. A failing
/// image is recorded and does not affect the others.
pub fn predict_batch(
    dir: &Path,
    checkpoint: &CheckpointRecord,
    arch: &ArchitectureSpec,
    out_dir: &Path,
    dropout: Dropout,
    format: ImageFormat,
) -> Result<BatchReport> {
    let inputs = list_images(dir)?;
    if inputs.is_empty() {
        return Err(Error::Data(format!("no images found in {}", dir.display())));
    }
    let mut predictor = Predictor::load(checkpoint, arch, dropout)?.with_format(format);
    let results = inputs
        .into_iter()
        .map(|input| {
            let stem = input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let output = out_dir.join(format!("{stem}.{}", format.extension()));
            let outcome = predictor.predict_file(&input, &output).map_err(|e| {
                log::warn!("{}: {e}", input.display());
                e.to_string()
            });
            ImageResult { input, outcome }
        })
        .collect();
    Ok(BatchReport { results })
}
