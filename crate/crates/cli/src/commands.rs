//! Subcommand handlers: resolve settings, log them, call the core library,
//! and print a short human-readable result on stdout.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ashgan_core::dataset::{
    discover_pairs, load_split, prepare_dataset, read_satellite_csv, split_dataset, ImageFormat,
    PrepareOptions, RawPair, Satellite, Split, SplitFractions, SplitManifest, MANIFEST_FILE,
};
use ashgan_core::eval::{
    compare_checkpoints, compute_metrics, evaluate_masks, plot_history, read_truth_csv,
    write_evaluation, AshThresholds, ConfusionMatrix,
};
use ashgan_core::model::{audit_model, ArchitectureSpec};
use ashgan_core::predict::{predict, predict_batch, Dropout, PredictionRequest};
use ashgan_core::synth::{generate, SynthConfig};
use ashgan_core::train::{
    list_checkpoints, train, CheckpointRecord, TrainingConfig, ARCHITECTURE_FILE, METRICS_FILE,
};

use crate::args::{
    ArchArgs, AuditArgs, Cli, Command, EvaluateArgs, PredictArgs, PredictBatchArgs, PredictCommon,
    PrepareArgs, SplitArgs, SynthArgs, TrainArgs,
};
use crate::config::{pick, FileConfig};

pub fn dispatch(cli: &Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    if let Some(path) = &cli.config {
        log::info!("config file: {}", path.display());
    }
    match &cli.command {
        Command::Prepare(a) => prepare(a, &file),
        Command::Split(a) => split(a, &file),
        Command::Train(a) => train_cmd(a, &file),
        Command::Evaluate(a) => evaluate(a, &file),
        Command::Predict(a) => predict_cmd(a, &file),
        Command::PredictBatch(a) => predict_batch_cmd(a, &file),
        Command::Synth(a) => synth(a, &file),
        Command::Audit(a) => audit(a),
    }
}

/// Logs the settings a command actually runs with.
fn log_settings(command: &str, settings: &[(&str, String)]) {
    log::info!("{command} settings:");
    for (key, value) in settings {
        log::info!("  {key} = {value}");
    }
}

fn show(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "-".into())
}

fn required(value: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    value.ok_or_else(|| anyhow!("{flag} is required (flag, environment, or config file)"))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| anyhow!("{what}: cannot parse {s:?}: {e}"))
        })
        .collect()
}

fn resolve_arch(path: Option<PathBuf>, size: Option<usize>, divisor: Option<usize>) -> Result<ArchitectureSpec> {
    match path {
        Some(path) => {
            if size.is_some() || divisor.is_some() {
                bail!("--arch cannot be combined with --size or --width-divisor");
            }
            Ok(ArchitectureSpec::read(&path)?)
        }
        None if size.is_none() && divisor.is_none() => Ok(ArchitectureSpec::standard()),
        None => Ok(ArchitectureSpec::scaled(
            size.unwrap_or(ArchitectureSpec::standard().input_size()),
            divisor.unwrap_or(1),
        )?),
    }
}

fn arch_from_args(a: &ArchArgs, file_arch: Option<PathBuf>, file_size: Option<usize>, file_div: Option<usize>) -> Result<ArchitectureSpec> {
    // A flag-level choice replaces the file-level one wholesale so that the
    // two ways of naming an architecture never mix.
    if a.arch.is_some() || a.size.is_some() || a.width_divisor.is_some() {
        resolve_arch(a.arch.clone(), a.size, a.width_divisor)
    } else {
        resolve_arch(file_arch, file_size, file_div)
    }
}

fn fractions(cli: &Option<String>, file: &Option<String>) -> Result<SplitFractions> {
    match cli.as_ref().or(file.as_ref()) {
        Some(text) => Ok(text.parse()?),
        None => Ok(SplitFractions::default()),
    }
}

fn discover(
    source: Option<PathBuf>,
    target: Option<PathBuf>,
    satellite_csv: &Option<PathBuf>,
) -> Result<Vec<RawPair>> {
    let source = required(source, "--source-dir")?;
    let target = required(target, "--target-dir")?;
    let mapping = satellite_csv
        .as_deref()
        .map(read_satellite_csv)
        .transpose()?;
    Ok(discover_pairs(&source, &target, mapping.as_ref())?)
}

fn print_split_table(manifest: &SplitManifest) {
    println!("{:<12} {:>6} {:>6} {:>6} {:>6}", "satellite", "train", "val", "test", "total");
    for (sat, c) in &manifest.per_satellite_counts {
        println!(
            "{:<12} {:>6} {:>6} {:>6} {:>6}",
            sat.tag(),
            c.train,
            c.val,
            c.test,
            c.total()
        );
    }
    let t = manifest.totals();
    println!("{:<12} {:>6} {:>6} {:>6} {:>6}", "total", t.train, t.val, t.test, t.total());
}

fn prepare(a: &PrepareArgs, file: &FileConfig) -> Result<()> {
    let f = &file.dataset;
    let source_dir = a.source_dir.clone().or(f.source_dir.clone());
    let target_dir = a.target_dir.clone().or(f.target_dir.clone());
    let satellite_csv = a.satellite_csv.clone().or(f.satellite_csv.clone());
    let manifest_path = a.manifest.clone().or(f.manifest.clone());
    let out_dir = pick(a.out_dir.clone(), f.out_dir.clone(), PathBuf::from("prepared"));
    let seed = pick(a.seed, f.seed, 0);
    let fractions = fractions(&a.fractions, &f.fractions)?;
    let lossless = pick(a.lossless, f.lossless, false);
    let size = pick(a.size, f.size, PrepareOptions::default().size);
    log_settings(
        "prepare",
        &[
            ("source_dir", show(&source_dir)),
            ("target_dir", show(&target_dir)),
            ("satellite_csv", show(&satellite_csv)),
            ("manifest", show(&manifest_path)),
            ("out_dir", out_dir.display().to_string()),
            ("seed", seed.to_string()),
            ("fractions", format!("{},{},{}", fractions.train, fractions.val, fractions.test)),
            ("lossless", lossless.to_string()),
            ("size", size.to_string()),
        ],
    );
    let pairs = discover(source_dir, target_dir, &satellite_csv)?;
    let manifest = match &manifest_path {
        Some(path) => SplitManifest::read(path)?,
        None => split_dataset(&pairs, fractions, seed)?,
    };
    let format = if lossless {
        ImageFormat::Png
    } else {
        ImageFormat::DATASET_JPEG
    };
    let report = prepare_dataset(&pairs, &manifest, &out_dir, PrepareOptions { size, format })?;
    print_split_table(&manifest);
    println!("manifest: {}", report.manifest_path.display());
    Ok(())
}

fn parse_strata(text: &str) -> Result<Vec<RawPair>> {
    let mut pairs = Vec::new();
    for item in text.split(',') {
        let (name, count) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("--strata entries look like GOES16=148, got {item:?}"))?;
        let sat: Satellite = name.trim().parse()?;
        let count: usize = count
            .trim()
            .parse()
            .with_context(|| format!("--strata count for {}", sat.tag()))?;
        pairs.extend(
            (0..count).map(|i| RawPair::placeholder(format!("{}_{i:04}", sat.prefix()), sat)),
        );
    }
    Ok(pairs)
}

fn split(a: &SplitArgs, file: &FileConfig) -> Result<()> {
    let f = &file.dataset;
    let seed = pick(a.seed, f.seed, 0);
    let fractions = fractions(&a.fractions, &f.fractions)?;
    let satellite_csv = a.satellite_csv.clone().or(f.satellite_csv.clone());
    let pairs = match &a.strata {
        Some(strata) => {
            log_settings(
                "split",
                &[
                    ("strata", strata.clone()),
                    ("seed", seed.to_string()),
                    ("fractions", format!("{},{},{}", fractions.train, fractions.val, fractions.test)),
                    ("out", show(&a.out)),
                ],
            );
            parse_strata(strata)?
        }
        None => {
            let source_dir = a.source_dir.clone().or(f.source_dir.clone());
            let target_dir = a.target_dir.clone().or(f.target_dir.clone());
            log_settings(
                "split",
                &[
                    ("source_dir", show(&source_dir)),
                    ("target_dir", show(&target_dir)),
                    ("satellite_csv", show(&satellite_csv)),
                    ("seed", seed.to_string()),
                    ("fractions", format!("{},{},{}", fractions.train, fractions.val, fractions.test)),
                    ("out", show(&a.out)),
                ],
            );
            discover(source_dir, target_dir, &satellite_csv)?
        }
    };
    let manifest = split_dataset(&pairs, fractions, seed)?;
    match &a.out {
        Some(path) => {
            manifest.write(path)?;
            print_split_table(&manifest);
            println!("manifest: {}", path.display());
        }
        None => print!("{}", manifest.to_json()),
    }
    Ok(())
}

fn train_cmd(a: &TrainArgs, file: &FileConfig) -> Result<()> {
    let f = &file.train;
    let d = TrainingConfig::default();
    let arch = arch_from_args(&a.arch, f.arch.clone(), f.size, f.width_divisor)?;
    let config = TrainingConfig {
        epochs: pick(a.epochs, f.epochs, d.epochs),
        batch_size: pick(a.batch_size, f.batch_size, d.batch_size),
        learning_rate: pick(a.lr, f.learning_rate, d.learning_rate),
        adam_beta1: pick(a.adam_beta1, f.adam_beta1, d.adam_beta1),
        adam_beta2: d.adam_beta2,
        lambda_l1: pick(a.lambda_l1, f.lambda_l1, d.lambda_l1),
        checkpoint_every: pick(a.checkpoint_every, f.checkpoint_every, d.checkpoint_every),
        seed: pick(a.seed, f.seed, d.seed),
        dataset_dir: pick(a.dataset_dir.clone(), f.dataset_dir.clone(), d.dataset_dir.clone()),
        out_dir: pick(a.out_dir.clone(), f.out_dir.clone(), d.out_dir.clone()),
        resume: a.resume.unwrap_or(false),
        progress_samples: pick(a.progress_samples, f.progress_samples, d.progress_samples),
    };
    log_settings(
        "train",
        &[
            ("dataset_dir", config.dataset_dir.display().to_string()),
            ("out_dir", config.out_dir.display().to_string()),
            ("architecture", format!("input {} hash {}", arch.input_size(), arch.hash())),
            ("epochs", config.epochs.to_string()),
            ("batch_size", config.batch_size.to_string()),
            ("learning_rate", config.learning_rate.to_string()),
            ("adam_beta1", config.adam_beta1.to_string()),
            ("adam_beta2", config.adam_beta2.to_string()),
            ("lambda_l1", config.lambda_l1.to_string()),
            ("checkpoint_every", config.checkpoint_every.to_string()),
            ("seed", config.seed.to_string()),
            ("resume", config.resume.to_string()),
            ("progress_samples", config.progress_samples.to_string()),
        ],
    );
    let manifest = SplitManifest::read(&config.dataset_dir.join(MANIFEST_FILE))?;
    let run = train(&config, &manifest, &arch)?;
    if let Some(last) = run.metrics.last() {
        println!(
            "epoch {}: d_real {:.4} d_fake {:.4} g_loss {:.4} g_l1 {:.4}",
            last.epoch, last.d_loss_train_real, last.d_loss_train_fake, last.g_loss, last.g_l1
        );
    }
    for c in &run.checkpoints {
        println!("checkpoint epoch {}: {}", c.epoch, c.weights_path.display());
    }
    Ok(())
}

fn parse_confusion(text: &str) -> Result<ConfusionMatrix> {
    let v: Vec<usize> = parse_list(text, "--confusion")?;
    match v.as_slice() {
        &[tp, fp, fn_, tn] => Ok(ConfusionMatrix::new(tp, fp, fn_, tn)),
        _ => bail!("--confusion takes four counts TP,FP,FN,TN, got {}", v.len()),
    }
}

/// The architecture a run was trained with: an explicit file, else the
/// run's own `architecture.json`, else the full-size default.
fn run_arch(explicit: Option<PathBuf>, run_dir: Option<&Path>) -> Result<ArchitectureSpec> {
    if let Some(path) = explicit {
        return Ok(ArchitectureSpec::read(&path)?);
    }
    if let Some(path) = run_dir.map(|d| d.join(ARCHITECTURE_FILE)).filter(|p| p.is_file()) {
        log::info!("using architecture {}", path.display());
        return Ok(ArchitectureSpec::read(&path)?);
    }
    log::info!("using the default architecture");
    Ok(ArchitectureSpec::standard())
}

fn evaluate(a: &EvaluateArgs, file: &FileConfig) -> Result<()> {
    let f = &file.evaluate;
    let defaults = AshThresholds::default();
    let thresholds = AshThresholds {
        luminance: pick(a.threshold_luminance, f.threshold_luminance, defaults.luminance),
        fraction: pick(a.threshold_fraction, f.threshold_fraction, defaults.fraction),
    };
    let paper_compat = pick(a.paper_compat, f.paper_compat, false);
    let compare_samples = pick(a.compare_samples, f.compare_samples, 3);
    let seed = a.seed.or(f.seed);
    let out_dir = a.out_dir.clone().unwrap_or_else(|| match &a.run_dir {
        Some(run) => run.join("evaluation"),
        None => PathBuf::from("evaluation"),
    });
    log_settings(
        "evaluate",
        &[
            ("run_dir", show(&a.run_dir)),
            ("dataset_dir", show(&a.dataset_dir)),
            ("masks", show(&a.masks)),
            ("truth", show(&a.truth)),
            ("confusion", a.confusion.clone().unwrap_or_else(|| "-".into())),
            ("out_dir", out_dir.display().to_string()),
            ("threshold_luminance", thresholds.luminance.to_string()),
            ("threshold_fraction", thresholds.fraction.to_string()),
            ("paper_compat", paper_compat.to_string()),
            ("compare_samples", compare_samples.to_string()),
            ("seed", seed.map(|s| s.to_string()).unwrap_or_else(|| "none (dropout off)".into())),
        ],
    );
    let mut did_something = false;

    if let Some(text) = &a.confusion {
        did_something = true;
        let cm = parse_confusion(text)?;
        println!("TP {} FP {} FN {} TN {}", cm.tp, cm.fp, cm.fn_, cm.tn);
        print!("{}", compute_metrics(&cm).to_text(paper_compat));
    }

    if let Some(run_dir) = &a.run_dir {
        did_something = true;
        let csv = run_dir.join(METRICS_FILE);
        if csv.is_file() {
            let plots = plot_history(&csv, &out_dir)?;
            for path in &plots.images {
                println!("plot: {}", path.display());
            }
            println!("series: {}", plots.series_path.display());
        } else {
            log::warn!("{} not found; skipping plots", csv.display());
        }
        let checkpoints = list_checkpoints(run_dir)?;
        match (&a.dataset_dir, checkpoints.is_empty()) {
            (_, true) => log::warn!("no checkpoints in {}", run_dir.display()),
            (None, false) => log::info!("no --dataset-dir; skipping checkpoint comparison"),
            (Some(dataset_dir), false) => {
                let manifest = SplitManifest::read(&dataset_dir.join(MANIFEST_FILE))?;
                let split = [Split::Test, Split::Val, Split::Train]
                    .into_iter()
                    .find(|s| !manifest.ids(*s).is_empty())
                    .ok_or_else(|| anyhow!("manifest lists no pairs"))?;
                let mut pairs = load_split(dataset_dir, &manifest, split)?;
                pairs.truncate(compare_samples);
                let arch = run_arch(a.arch.clone(), Some(run_dir))?;
                let cmp = compare_checkpoints(&checkpoints, &arch, &pairs, &out_dir, seed)?;
                for (epoch, path) in &cmp.grids {
                    println!("compare epoch {epoch}: {}", path.display());
                }
                for (path, why) in &cmp.skipped {
                    println!("skipped {}: {why}", path.display());
                }
            }
        }
    }

    match (&a.masks, &a.truth) {
        (Some(masks), Some(truth)) => {
            did_something = true;
            let truth = read_truth_csv(truth)?;
            let evaluation = evaluate_masks(masks, &truth, &thresholds)?;
            let path = write_evaluation(&evaluation, &out_dir, paper_compat)?;
            let cm = evaluation.confusion;
            println!("TP {} FP {} FN {} TN {}", cm.tp, cm.fp, cm.fn_, cm.tn);
            print!("{}", evaluation.metrics.to_text(paper_compat));
            println!("confusion: {}", path.display());
        }
        (None, None) => {}
        _ => bail!("--masks and --truth must be given together"),
    }

    if !did_something {
        bail!("nothing to evaluate: give --run-dir, --masks with --truth, or --confusion");
    }
    Ok(())
}

struct PredictSettings {
    arch: ArchitectureSpec,
    dropout: Dropout,
    format: ImageFormat,
}

fn predict_settings(c: &PredictCommon, checkpoint: &Path, file: &FileConfig) -> Result<PredictSettings> {
    let f = &file.predict;
    // checkpoints/model_epoch_N.weights → <run>/architecture.json
    let run_dir = checkpoint.parent().and_then(Path::parent);
    let arch = run_arch(c.arch.clone().or(f.arch.clone()), run_dir)?;
    let no_dropout = pick(c.no_dropout, f.no_dropout, false);
    let seed = pick(c.seed, f.seed, 0);
    let dropout = if no_dropout {
        Dropout::Disabled
    } else {
        Dropout::Seeded(seed)
    };
    let format = if pick(c.jpeg, f.jpeg, false) {
        ImageFormat::DATASET_JPEG
    } else {
        ImageFormat::Png
    };
    Ok(PredictSettings { arch, dropout, format })
}

fn predict_cmd(a: &PredictArgs, file: &FileConfig) -> Result<()> {
    let s = predict_settings(&a.common, &a.checkpoint, file)?;
    log_settings(
        "predict",
        &[
            ("image", a.image.display().to_string()),
            ("checkpoint", a.checkpoint.display().to_string()),
            ("out", a.out.display().to_string()),
            ("dropout", format!("{:?}", s.dropout)),
        ],
    );
    if s.format != ImageFormat::Png {
        log::warn!("predict writes the format implied by --out; --jpeg only affects predict-batch");
    }
    let record = CheckpointRecord::open(&a.checkpoint)?;
    let req = PredictionRequest {
        image_path: a.image.clone(),
        checkpoint: record,
        output_path: a.out.clone(),
    };
    let p = predict(&req, &s.arch, s.dropout)?;
    println!("mask: {}", p.mask_path.display());
    println!("metadata: {}", p.sidecar_path.display());
    Ok(())
}

fn predict_batch_cmd(a: &PredictBatchArgs, file: &FileConfig) -> Result<()> {
    let s = predict_settings(&a.common, &a.checkpoint, file)?;
    log_settings(
        "predict-batch",
        &[
            ("dir", a.dir.display().to_string()),
            ("checkpoint", a.checkpoint.display().to_string()),
            ("out_dir", a.out_dir.display().to_string()),
            ("dropout", format!("{:?}", s.dropout)),
            ("format", s.format.extension().to_string()),
        ],
    );
    let record = CheckpointRecord::open(&a.checkpoint)?;
    let report = predict_batch(&a.dir, &record, &s.arch, &a.out_dir, s.dropout, s.format)?;
    for (input, why) in report.failures() {
        println!("failed {}: {why}", input.display());
    }
    println!("{}", report.summary());
    let failed = report.results.len() - report.succeeded();
    if failed > 0 {
        return Err(ashgan_core::Error::Data(format!("{failed} image(s) could not be processed")).into());
    }
    Ok(())
}

fn synth(a: &SynthArgs, file: &FileConfig) -> Result<()> {
    let f = &file.synth;
    let d = SynthConfig::default();
    let weights = match &a.satellite_weights {
        Some(text) => {
            let v: Vec<f64> = parse_list(text, "--satellite-weights")?;
            <[f64; 4]>::try_from(v.as_slice())
                .map_err(|_| anyhow!("--satellite-weights takes four numbers, got {}", v.len()))?
        }
        None => f.satellite_weights.unwrap_or(d.satellite_weights),
    };
    let config = SynthConfig {
        count: pick(a.count, f.count, d.count),
        size: pick(a.size, f.size, d.size),
        blob_count_range: (
            pick(a.min_blobs, f.min_blobs, d.blob_count_range.0),
            pick(a.max_blobs, f.max_blobs, d.blob_count_range.1),
        ),
        seed: pick(a.seed, f.seed, d.seed),
        satellite_weights: weights,
    };
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("synth"));
    log_settings(
        "synth",
        &[
            ("count", config.count.to_string()),
            ("size", config.size.to_string()),
            ("blobs", format!("{}..={}", config.blob_count_range.0, config.blob_count_range.1)),
            ("seed", config.seed.to_string()),
            ("satellite_weights", format!("{:?}", config.satellite_weights)),
            ("out", out.display().to_string()),
        ],
    );
    let data = generate(&config, &out)?;
    let ash = data.truth.iter().filter(|t| t.has_ash).count();
    println!(
        "{} pairs ({} with ash, {} ash-free) in {}",
        data.pairs.len(),
        ash,
        data.pairs.len() - ash,
        out.display()
    );
    println!("truth: {}", data.truth_path.display());
    Ok(())
}

fn audit(a: &AuditArgs) -> Result<()> {
    let arch = arch_from_args(&a.arch, None, None, None)?;
    let reports = audit_model(&arch)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    } else {
        for r in &reports {
            println!("{}", r.to_text());
        }
        println!(
            "discriminator patch {0}×{0}, architecture hash {1}",
            arch.discriminator.patch_size(),
            arch.hash()
        );
    }
    if let Some(path) = &a.write_arch {
        arch.write(path)?;
        log::info!("architecture written to {}", path.display());
    }
    Ok(())
}
