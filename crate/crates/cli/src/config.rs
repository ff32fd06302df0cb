//! The optional TOML configuration file. Every key is optional; a value
//! given on the command line or through the environment wins over the file,
//! and the file wins over built-in defaults. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub dataset: DatasetSection,
    pub train: TrainSection,
    pub evaluate: EvaluateSection,
    pub predict: PredictSection,
    pub synth: SynthSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub source_dir: Option<PathBuf>,
    pub target_dir: Option<PathBuf>,
    pub satellite_csv: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub seed: Option<u64>,
    pub fractions: Option<String>,
    pub lossless: Option<bool>,
    pub size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub dataset_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub arch: Option<PathBuf>,
    pub size: Option<usize>,
    pub width_divisor: Option<usize>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f32>,
    pub adam_beta1: Option<f32>,
    pub lambda_l1: Option<f32>,
    pub checkpoint_every: Option<usize>,
    pub seed: Option<u64>,
    pub progress_samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateSection {
    pub threshold_luminance: Option<f64>,
    pub threshold_fraction: Option<f64>,
    pub paper_compat: Option<bool>,
    pub compare_samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictSection {
    pub arch: Option<PathBuf>,
    pub seed: Option<u64>,
    pub no_dropout: Option<bool>,
    pub jpeg: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub count: Option<usize>,
    pub size: Option<usize>,
    pub seed: Option<u64>,
    pub min_blobs: Option<usize>,
    pub max_blobs: Option<usize>,
    pub satellite_weights: Option<[f64; 4]>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("config file {}", path.display()))
    }
}

/// Picks the first present value: command line or environment, then file,
/// then `default`.
pub fn pick<T>(cli: Option<T>, file: Option<T>, default: T) -> T {
    cli.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<FileConfig>("[train]\nepocs = 3\n").unwrap_err();
        assert!(err.to_string().contains("epocs"));
        assert!(toml::from_str::<FileConfig>("[trian]\n").is_err());
    }

    #[test]
    fn sections_are_optional() {
        let cfg: FileConfig = toml::from_str("[train]\nepochs = 3\n").unwrap();
        assert_eq!(cfg.train.epochs, Some(3));
        assert_eq!(cfg.synth.count, None);
    }

    #[test]
    fn precedence() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None, None, 3), 3);
    }
}
