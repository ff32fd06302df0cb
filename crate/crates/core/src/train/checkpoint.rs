use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::model::{build_generator, ArchitectureSpec, Discriminator, Generator};
use crate::nn::{load_tensors, save_tensors, Adam, NamedParams};
use crate::write_atomic;

pub const CHECKPOINT_DIR: &str = "checkpoints";
const RESUME_FILE: &str = "resume.state";

/// Sidecar describing a generator weights file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub input_size: usize,
    pub normalization: String,
    pub architecture_hash: String,
    pub seed: u64,
    /// RFC 3339, UTC.
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointRecord {
    pub epoch: usize,
    pub weights_path: PathBuf,
    pub meta: CheckpointMeta,
}

pub fn weights_path(out_dir: &Path, epoch: usize) -> PathBuf {
    out_dir
        .join(CHECKPOINT_DIR)
        .join(format!("model_epoch_{epoch}.weights"))
}

/// `model_epoch_N.weights` → `model_epoch_N.meta.json`.
pub fn meta_path(weights: &Path) -> PathBuf {
    weights.with_extension("meta.json")
}

impl CheckpointRecord {
    /// Reads the sidecar next to a weights file.
    pub fn open(weights: &Path) -> Result<Self> {
        let sidecar = meta_path(weights);
        let text = std::fs::read_to_string(&sidecar)
            .context(|| format!("reading checkpoint metadata {}", sidecar.display()))?;
        let meta: CheckpointMeta = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", sidecar.display())))?;
        if !weights.is_file() {
            return Err(Error::Checkpoint(format!(
                "weights file {} is missing",
                weights.display()
            )));
        }
        Ok(Self {
            epoch: meta.epoch,
            weights_path: weights.to_path_buf(),
            meta,
        })
    }

    /// Rebuilds the generator stored in this checkpoint. `arch` must be the
    /// architecture the checkpoint was trained with.
    pub fn load_generator(&self, arch: &ArchitectureSpec) -> Result<Generator> {
        let hash = arch.hash();
        if self.meta.architecture_hash != hash {
            return Err(Error::Checkpoint(format!(
                "{} was trained with architecture {} but the requested architecture hashes to {hash}",
                self.weights_path.display(),
                self.meta.architecture_hash
            )));
        }
        if self.meta.normalization != crate::NORMALIZATION_ID {
            return Err(Error::Checkpoint(format!(
                "{} expects normalization {:?}, this build uses {:?}",
                self.weights_path.display(),
                self.meta.normalization,
                crate::NORMALIZATION_ID
            )));
        }
        let (tensors, _) = load_tensors(&self.weights_path)?;
        let mut generator = build_generator(&arch.generator, self.meta.seed)?;
        generator.import_params("", &tensors)?;
        Ok(generator)
    }
}

fn timestamp() -> String {
    humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string()
}

/// Writes the generator weights, then the sidecar. A checkpoint counts as
/// durable once both files exist.
pub fn save_checkpoint(
    out_dir: &Path,
    epoch: usize,
    generator: &Generator,
    arch: &ArchitectureSpec,
    seed: u64,
) -> Result<CheckpointRecord> {
    let meta = CheckpointMeta {
        epoch,
        input_size: arch.input_size(),
        normalization: crate::NORMALIZATION_ID.into(),
        architecture_hash: arch.hash(),
        seed,
        timestamp: timestamp(),
    };
    let mut tensors = BTreeMap::new();
    generator.export_params("", false, &mut tensors);
    let info = BTreeMap::from([
        ("epoch".to_string(), epoch.to_string()),
        (
            "architecture_hash".to_string(),
            meta.architecture_hash.clone(),
        ),
    ]);
    let path = weights_path(out_dir, epoch);
    save_tensors(&path, &tensors, &info)?;
    let mut json = serde_json::to_string_pretty(&meta).expect("metadata serialises");
    json.push('\n');
    write_atomic(&meta_path(&path), json.as_bytes())?;
    Ok(CheckpointRecord {
        epoch,
        weights_path: path,
        meta,
    })
}

/// Every durable checkpoint under `out_dir`, ordered by epoch.
pub fn list_checkpoints(out_dir: &Path) -> Result<Vec<CheckpointRecord>> {
    let dir = out_dir.join(CHECKPOINT_DIR);
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut records = Vec::new();
    for entry in std::fs::read_dir(&dir).context(|| format!("listing {}", dir.display()))? {
        let path = entry
            .context(|| format!("listing {}", dir.display()))?
            .path();
        let is_weights = path.extension().is_some_and(|e| e == "weights")
            && path
                .file_name()
                .is_some_and(|n| n.to_string_lossy().starts_with("model_epoch_"));
        if is_weights && meta_path(&path).is_file() {
            records.push(CheckpointRecord::open(&path)?);
        }
    }
    records.sort_by_key(|r| r.epoch);
    Ok(records)
}

/// Optimiser bookkeeping restored alongside the model weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ResumePoint {
    pub epoch: usize,
}

pub(crate) fn resume_path(out_dir: &Path) -> PathBuf {
    out_dir.join(CHECKPOINT_DIR).join(RESUME_FILE)
}

/// Full training state (both networks plus Adam moments and step counts).
pub(crate) fn save_resume_state(
    out_dir: &Path,
    epoch: usize,
    generator: &Generator,
    discriminator: &Discriminator,
    g_opt: &Adam,
    d_opt: &Adam,
    arch: &ArchitectureSpec,
) -> Result<()> {
    let mut tensors = BTreeMap::new();
    generator.export_params("g.", true, &mut tensors);
    discriminator.export_params("d.", true, &mut tensors);
    let info = BTreeMap::from([
        ("epoch".to_string(), epoch.to_string()),
        ("g_steps".to_string(), g_opt.steps().to_string()),
        ("d_steps".to_string(), d_opt.steps().to_string()),
        ("architecture_hash".to_string(), arch.hash()),
    ]);
    save_tensors(&resume_path(out_dir), &tensors, &info)
}

pub(crate) fn load_resume_state(
    out_dir: &Path,
    generator: &mut Generator,
    discriminator: &mut Discriminator,
    g_opt: &mut Adam,
    d_opt: &mut Adam,
    arch: &ArchitectureSpec,
) -> Result<ResumePoint> {
    let path = resume_path(out_dir);
    let (tensors, info) = load_tensors(&path)?;
    let field = |key: &str| -> Result<&String> {
        info.get(key)
            .ok_or_else(|| Error::Checkpoint(format!("{} lacks {key}", path.display())))
    };
    let number = |key: &str| -> Result<u64> {
        field(key)?
            .parse()
            .map_err(|_| Error::Checkpoint(format!("{}: bad {key}", path.display())))
    };
    if field("architecture_hash")? != &arch.hash() {
        return Err(Error::Checkpoint(format!(
            "{} belongs to a different architecture",
            path.display()
        )));
    }
    generator.import_params("g.", &tensors)?;
    discriminator.import_params("d.", &tensors)?;
    g_opt.set_steps(number("g_steps")?);
    d_opt.set_steps(number("d_steps")?);
    Ok(ResumePoint {
        epoch: number("epoch")? as usize,
    })
}
