//! The adversarial training loop: per iteration the discriminator is updated
//! on a real batch and then on a generated batch, after which the composite
//! updates the generator. Metrics are appended to `metrics.csv` every epoch;
//! every `checkpoint_every` epochs the discriminator is scored on the
//! validation pairs and the generator is checkpointed.

mod checkpoint;
mod metrics;
mod progress;
mod samples;

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

pub use checkpoint::{
    list_checkpoints, meta_path, save_checkpoint, weights_path, CheckpointMeta, CheckpointRecord,
    CHECKPOINT_DIR,
};
pub use metrics::{
    append_metrics, metrics_to_csv, read_metrics, EpochMetrics, METRICS_FILE, METRIC_COLUMNS,
};
pub use progress::{generate_images, image_grid, summarize_progress, triptych, PROGRESS_DIR};
pub use samples::{
    discriminator_step, make_fake_samples, make_real_samples, score_real_pairs, DiscriminatorScore,
    FakeSamples, RealSamples, DISCRIMINATOR_LOSS_WEIGHT,
};

use crate::dataset::{load_split, ImagePair, Split, SplitManifest};
use crate::error::{Error, IoContext, Result};
use crate::model::{build_composite, build_discriminator, build_generator, ArchitectureSpec};
use crate::nn::{derive_seed, seeded_rng, Adam};

pub const ARCHITECTURE_FILE: &str = "architecture.json";
const LOCK_FILE: &str = ".train.lock";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub adam_beta1: f32,
    pub adam_beta2: f32,
    pub lambda_l1: f32,
    pub checkpoint_every: usize,
    pub seed: u64,
    /// Prepared dataset: `train/`, `val/`, `test/` and `manifest.json`.
    pub dataset_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Continue from the state saved with the latest checkpoint.
    pub resume: bool,
    /// Pairs shown in each progress grid.
    pub progress_samples: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 1,
            learning_rate: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            lambda_l1: 100.0,
            checkpoint_every: 10,
            seed: 0,
            dataset_dir: PathBuf::from("prepared"),
            out_dir: PathBuf::from("run"),
            resume: false,
            progress_samples: 3,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint interval must be at least 1 epoch".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("Adam {name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.lambda_l1.is_finite() && self.lambda_l1 >= 0.0) {
            return bad(format!("λ must be non-negative, got {}", self.lambda_l1));
        }
        Ok(())
    }

    /// Epochs at which a checkpoint is written: every interval, plus the
    /// final epoch when the interval does not divide it.
    pub fn checkpoint_epochs(&self) -> Vec<usize> {
        (1..=self.epochs)
            .filter(|&e| self.is_checkpoint_epoch(e))
            .collect()
    }

    pub fn is_checkpoint_epoch(&self, epoch: usize) -> bool {
        self.is_validation_epoch(epoch) || epoch == self.epochs
    }

    pub fn is_validation_epoch(&self, epoch: usize) -> bool {
        epoch.is_multiple_of(self.checkpoint_every)
    }
}

/// Everything a finished (or resumed and finished) run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub checkpoints: Vec<CheckpointRecord>,
    /// Rows written by this invocation.
    pub metrics: Vec<EpochMetrics>,
}

struct RunLock(PathBuf);

impl RunLock {
    fn acquire(out_dir: &Path) -> Result<Self> {
        let path = out_dir.join(LOCK_FILE);
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    Error::Runtime(format!(
                        "{} exists: another training run owns this directory (remove the file if that run is dead)",
                        path.display()
                    ))
                } else {
                    Error::io(format!("creating {}", path.display()), e)
                }
            })?;
        writeln!(file, "{}", std::process::id())
            .context(|| format!("writing {}", path.display()))?;
        Ok(Self(path))
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

/// Keeps the rows up to and including `last_epoch`, dropping anything an
/// interrupted run appended after its last checkpoint.
fn truncate_metrics(path: &Path, last_epoch: usize) -> Result<()> {
    let rows: Vec<EpochMetrics> = if path.is_file() {
        read_metrics(path)?
            .into_iter()
            .filter(|r| r.epoch <= last_epoch)
            .collect()
    } else {
        Vec::new()
    };
    crate::write_atomic(path, &metrics_to_csv(&rows)?)
}

fn mean(total: f64, count: usize) -> f32 {
    (total / count.max(1) as f64) as f32
}

/// Trains the architecture on the prepared dataset described by `manifest`.
pub fn train(
    config: &TrainingConfig,
    manifest: &SplitManifest,
    arch: &ArchitectureSpec,
) -> Result<TrainingRun> {
    config.validate()?;
    arch.validate()?;
    crate::fsutil::ensure_dir(&config.out_dir)?;
    let _lock = RunLock::acquire(&config.out_dir)?;
    let metrics_path = config.out_dir.join(METRICS_FILE);
    let resume_file = checkpoint::resume_path(&config.out_dir);
    if !config.resume && (metrics_path.exists() || resume_file.exists()) {
        return Err(Error::InvalidArgument(format!(
            "{} already holds a training run; resume it or pick a fresh output directory",
            config.out_dir.display()
        )));
    }

    let size = arch.input_size();
    let load = |split| -> Result<Vec<ImagePair>> {
        let pairs = load_split(&config.dataset_dir, manifest, split)?;
        if let Some(p) = pairs.iter().find(|p| p.size() != size) {
            return Err(Error::Data(format!(
                "pair {:?} is {}×{} but the architecture expects {size}×{size}",
                p.id,
                p.size(),
                p.size()
            )));
        }
        pairs.iter().map(ImagePair::normalized).collect()
    };
    let train_pairs = load(Split::Train)?;
    let val_pairs = load(Split::Val)?;
    if train_pairs.is_empty() && config.epochs > 0 {
        return Err(Error::Data("the training split is empty".into()));
    }

    let mut generator = build_generator(&arch.generator, config.seed)?;
    let mut discriminator = build_discriminator(&arch.discriminator, config.seed)?;
    let mut g_opt = Adam::new(config.learning_rate, config.adam_beta1, config.adam_beta2);
    let mut d_opt = Adam::new(config.learning_rate, config.adam_beta1, config.adam_beta2);
    let mut first_epoch = 1;
    if config.resume && resume_file.exists() {
        let point = checkpoint::load_resume_state(
            &config.out_dir,
            &mut generator,
            &mut discriminator,
            &mut g_opt,
            &mut d_opt,
            arch,
        )?;
        first_epoch = point.epoch + 1;
        truncate_metrics(&metrics_path, point.epoch)?;
        log::info!("resuming after epoch {}", point.epoch);
    } else if config.resume {
        log::info!(
            "no saved state in {}; starting fresh",
            config.out_dir.display()
        );
    }
    arch.write(&config.out_dir.join(ARCHITECTURE_FILE))?;

    let patch = discriminator.spec().patch_size();
    let progress_pairs: Vec<ImagePair> = if val_pairs.is_empty() {
        &train_pairs
    } else {
        &val_pairs
    }
    .iter()
    .take(config.progress_samples)
    .cloned()
    .collect();
    let mut run = TrainingRun {
        checkpoints: Vec::new(),
        metrics: Vec::new(),
    };

    for epoch in first_epoch..=config.epochs {
        let mut rng = seeded_rng(derive_seed(config.seed, "epoch", epoch as u64));
        let mut order: Vec<usize> = (0..train_pairs.len()).collect();
        order.shuffle(&mut rng);

        let mut sums = [0.0f64; 6];
        let mut batches = 0;
        for (iteration, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<ImagePair> = chunk.iter().map(|&i| train_pairs[i].clone()).collect();
            let real = make_real_samples(&batch, patch)?;
            let d_real = discriminator_step(
                &mut discriminator,
                &mut d_opt,
                &real.sources,
                &real.targets,
                1.0,
            )?;
            let fake = make_fake_samples(&mut generator, &real.sources, patch, Some(&mut rng))?;
            let d_fake = discriminator_step(
                &mut discriminator,
                &mut d_opt,
                &real.sources,
                &fake.generated,
                0.0,
            )?;
            let g = build_composite(&mut generator, &mut discriminator, config.lambda_l1)?
                .train_step(&real.sources, &real.targets, &mut g_opt, Some(&mut rng))?;
            log::debug!(
                "epoch {epoch} iteration {}: d_real {:.4} d_fake {:.4} g {:.4}",
                iteration + 1,
                d_real.loss,
                d_fake.loss,
                g.total
            );
            for (s, v) in sums.iter_mut().zip([
                d_real.loss,
                d_fake.loss,
                d_real.accuracy,
                d_fake.accuracy,
                g.total,
                g.l1,
            ]) {
                *s += v as f64;
            }
            batches += 1;
        }

        let val = if config.is_validation_epoch(epoch) {
            let score = score_real_pairs(&mut discriminator, &val_pairs)?;
            if score.is_none() {
                log::warn!("validation split is empty; skipping validation at epoch {epoch}");
            }
            score
        } else {
            None
        };
        let row = EpochMetrics {
            epoch,
            d_loss_train_real: mean(sums[0], batches),
            d_loss_train_fake: mean(sums[1], batches),
            d_acc_train_real: mean(sums[2], batches),
            d_acc_train_fake: mean(sums[3], batches),
            g_loss: mean(sums[4], batches),
            g_l1: mean(sums[5], batches),
            d_loss_val_real: val.map(|s| s.loss),
            d_acc_val_real: val.map(|s| s.accuracy),
        };
        if let Some(stream) = row.first_non_finite() {
            return Err(Error::Divergence(format!(
                "{stream} is not finite at epoch {epoch}; last durable checkpoint: {}",
                run.checkpoints
                    .last()
                    .map_or("none".to_string(), |c| c.weights_path.display().to_string())
            )));
        }
        append_metrics(&metrics_path, &row)?;
        log::info!(
            "epoch {epoch}/{}: d_real {:.4} d_fake {:.4} g {:.4} (l1 {:.4})",
            config.epochs,
            row.d_loss_train_real,
            row.d_loss_train_fake,
            row.g_loss,
            row.g_l1
        );
        run.metrics.push(row);

        if config.is_checkpoint_epoch(epoch) {
            let record = save_checkpoint(&config.out_dir, epoch, &generator, arch, config.seed)?;
            checkpoint::save_resume_state(
                &config.out_dir,
                epoch,
                &generator,
                &discriminator,
                &g_opt,
                &d_opt,
                arch,
            )?;
            log::info!("checkpoint {}", record.weights_path.display());
            run.checkpoints.push(record);
            if !progress_pairs.is_empty() {
                let mut rng = seeded_rng(derive_seed(config.seed, "progress", epoch as u64));
                if let Err(e) = summarize_progress(
                    &mut generator,
                    &progress_pairs,
                    epoch,
                    &config.out_dir,
                    Some(&mut rng),
                ) {
                    log::warn!("progress grid for epoch {epoch} not written: {e}");
                }
            }
        }
    }
    Ok(run)
}
