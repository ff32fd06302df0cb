use std::path::Path;

use ashgan_core::dataset::{
    denormalize, resize_image, save_rgb, ImageFormat, ImagePair, PixelDomain, PixelTensor,
};
use ashgan_core::eval::{
    ash_presence, compare_checkpoints, evaluate_masks, plot_history, read_truth_csv,
    AshThresholds, ConfusionMatrix,
};
use ashgan_core::model::{build_generator, ArchitectureSpec};
use ashgan_core::predict::{load_image, predict, predict_batch, Dropout, PredictionRequest};
use ashgan_core::synth::{generate, plan_sample, render_sample, SynthConfig};
use ashgan_core::train::{
    append_metrics, generate_images, save_checkpoint, CheckpointRecord, EpochMetrics,
};
use image::{Rgb, RgbImage};

const SIZE: usize = 32;

fn arch() -> ArchitectureSpec {
    ArchitectureSpec::scaled(SIZE, 8).unwrap()
}

fn checkpoint(dir: &Path, epoch: usize) -> CheckpointRecord {
    let spec = arch();
    let g = build_generator(&spec.generator, epoch as u64).unwrap();
    save_checkpoint(dir, epoch, &g, &spec, epoch as u64).unwrap()
}

fn noise_image(w: u32, h: u32, seed: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        let v = (x * 31 + y * 17 + seed * 101) % 256;
        Rgb([v as u8, (255 - v) as u8, ((v * 7) % 256) as u8])
    })
}

#[test]
fn load_image_resizes_and_scales() {
    let dir = tempfile::tempdir().unwrap();
    let big = dir.path().join("big.jpg");
    save_rgb(&noise_image(1024, 768, 1), &big, ImageFormat::DATASET_JPEG).unwrap();
    let t = load_image(&big, 256).unwrap();
    assert_eq!((t.height(), t.width()), (256, 256));
    assert!(t.data().iter().all(|v| (-1.0..=1.0).contains(v)));

    let white = dir.path().join("white.png");
    save_rgb(&RgbImage::from_pixel(256, 256, Rgb([255; 3])), &white, ImageFormat::Png).unwrap();
    assert!(load_image(&white, 256).unwrap().data().iter().all(|&v| v == 1.0));

    let src = noise_image(512, 512, 2);
    let large = dir.path().join("large.png");
    save_rgb(&src, &large, ImageFormat::Png).unwrap();
    let shrunk = resize_image(&PixelTensor::from_rgb(&src), 256, 256).unwrap();
    let small = dir.path().join("small.png");
    save_rgb(&shrunk.to_rgb().unwrap(), &small, ImageFormat::Png).unwrap();
    assert_eq!(load_image(&large, 256).unwrap(), load_image(&small, 256).unwrap());

    let corrupt = dir.path().join("corrupt.png");
    std::fs::write(&corrupt, b"not an image").unwrap();
    let err = load_image(&corrupt, 256).unwrap_err().to_string();
    assert!(err.contains("corrupt.png"), "{err}");
}

#[test]
fn predictions_are_reproducible_and_guarded() {
    let dir = tempfile::tempdir().unwrap();
    let record = checkpoint(dir.path(), 90);
    let input = dir.path().join("goes16_sangay.png");
    save_rgb(&noise_image(48, 40, 3), &input, ImageFormat::Png).unwrap();
    let req = |out: &str| PredictionRequest {
        image_path: input.clone(),
        checkpoint: record.clone(),
        output_path: dir.path().join(out),
    };
    let a = predict(&req("a.png"), &arch(), Dropout::Seeded(4)).unwrap();
    let b = predict(&req("b.png"), &arch(), Dropout::Seeded(4)).unwrap();
    assert_eq!(std::fs::read(&a.mask_path).unwrap(), std::fs::read(&b.mask_path).unwrap());
    let mask = image::open(&a.mask_path).unwrap();
    assert_eq!((mask.width(), mask.height()), (SIZE as u32, SIZE as u32));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&a.sidecar_path).unwrap()).unwrap();
    assert_eq!(meta["checkpoint_epoch"], 90);
    assert_eq!(meta["architecture_hash"], arch().hash());

    let other = ArchitectureSpec::scaled(SIZE, 4).unwrap();
    assert!(predict(&req("c.png"), &other, Dropout::Seeded(4)).is_err());
    assert!(!dir.path().join("c.png").exists());
    assert!(!dir.path().join("c.meta.json").exists());
}

#[test]
fn prediction_matches_the_training_path() {
    let dir = tempfile::tempdir().unwrap();
    let record = checkpoint(dir.path(), 10);
    let source = noise_image(SIZE as u32, SIZE as u32, 5);
    let target = RgbImage::from_pixel(SIZE as u32, SIZE as u32, Rgb([255; 3]));
    let pair = ImagePair::new(
        "goes17_x",
        None,
        PixelTensor::from_rgb(&source),
        PixelTensor::from_rgb(&target),
    )
    .unwrap()
    .normalized()
    .unwrap();
    let left = dir.path().join("goes17_x.png");
    save_rgb(&source, &left, ImageFormat::Png).unwrap();

    let dropout = Dropout::Seeded(8);
    let out = dir.path().join("out.png");
    predict(
        &PredictionRequest {
            image_path: left,
            checkpoint: record.clone(),
            output_path: out.clone(),
        },
        &arch(),
        dropout,
    )
    .unwrap();
    let mut g = record.load_generator(&arch()).unwrap();
    let mut rng = dropout.rng_for("goes17_x.png");
    let generated = generate_images(&mut g, &[pair], rng.as_mut()).unwrap();
    let expected = denormalize(&generated[0]).unwrap().to_rgb().unwrap();
    assert_eq!(image::open(out).unwrap().to_rgb8(), expected);
}

#[test]
fn batch_prediction_isolates_failures() {
    let dir = tempfile::tempdir().unwrap();
    let record = checkpoint(dir.path(), 10);
    let inputs = dir.path().join("in");
    std::fs::create_dir_all(&inputs).unwrap();
    for i in 0..2 {
        save_rgb(&noise_image(40, 40, i), &inputs.join(format!("ok{i}.png")), ImageFormat::Png).unwrap();
    }
    std::fs::write(inputs.join("broken.jpg"), b"\xff\xd8 garbage").unwrap();
    let out = dir.path().join("masks");
    let report =
        predict_batch(&inputs, &record, &arch(), &out, Dropout::Disabled, ImageFormat::Png).unwrap();
    assert_eq!(report.results.len(), 3);
    assert_eq!(report.succeeded(), 2);
    assert_eq!(report.failures().count(), 1);
    assert!(!out.join("broken.png").exists());
    assert!(out.join("ok0.png").is_file() && out.join("ok1.png").is_file());

    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    assert!(predict_batch(&empty, &record, &arch(), &out, Dropout::Disabled, ImageFormat::Png).is_err());
}

#[test]
fn checkpoint_comparison_grids() {
    let dir = tempfile::tempdir().unwrap();
    let records = vec![checkpoint(dir.path(), 10), checkpoint(dir.path(), 90)];
    let pairs: Vec<ImagePair> = (0..3)
        .map(|i| {
            let s = PixelTensor::from_rgb(&noise_image(SIZE as u32, SIZE as u32, i));
            let t = PixelTensor::from_rgb(&noise_image(SIZE as u32, SIZE as u32, i + 10));
            ImagePair::new(format!("p{i}"), None, s, t).unwrap()
        })
        .collect();
    let out = dir.path().join("eval");
    let cmp = compare_checkpoints(&records, &arch(), &pairs, &out, Some(1)).unwrap();
    assert_eq!(cmp.grids.iter().map(|g| g.0).collect::<Vec<_>>(), [10, 90]);
    let grid = image::open(&cmp.grids[1].1).unwrap().to_rgb8();
    for (i, pair) in pairs.iter().enumerate() {
        let cell = image::imageops::crop_imm(
            &grid,
            (i * SIZE) as u32,
            2 * SIZE as u32,
            SIZE as u32,
            SIZE as u32,
        )
        .to_image();
        assert_eq!(cell, pair.target().to_rgb().unwrap());
    }
    assert!(compare_checkpoints(&[], &arch(), &pairs, &out, None).is_err());

    std::fs::write(&records[0].weights_path, b"truncated").unwrap();
    let cmp = compare_checkpoints(&records, &arch(), &pairs, &out, None).unwrap();
    assert_eq!(cmp.grids.len(), 1);
    assert_eq!(cmp.skipped.len(), 1);
    let index = std::fs::read_to_string(cmp.index_path).unwrap();
    assert!(index.contains("SKIPPED"));
}

fn metrics_row(epoch: usize) -> EpochMetrics {
    let val = epoch.is_multiple_of(10);
    EpochMetrics {
        epoch,
        d_loss_train_real: 0.3,
        d_loss_train_fake: 0.4,
        d_acc_train_real: 0.5,
        d_acc_train_fake: 0.6,
        g_loss: 10.0 / epoch as f32,
        g_l1: 0.1 / epoch as f32,
        d_loss_val_real: val.then_some(0.35),
        d_acc_val_real: val.then_some(0.55),
    }
}

#[test]
fn history_plots() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("metrics.csv");
    for e in 1..=100 {
        append_metrics(&csv, &metrics_row(e)).unwrap();
    }
    let report = plot_history(&csv, dir.path()).unwrap();
    assert_eq!(report.images.len(), 8);
    assert!(report.images.iter().all(|p| p.is_file()));
    let epochs = |s: &str| report.history[s].iter().map(|p| p.0).collect::<Vec<_>>();
    assert_eq!(epochs("g_loss"), (1..=100).collect::<Vec<_>>());
    assert_eq!(epochs("d_acc_val_real"), (1..=10).map(|k| 10 * k).collect::<Vec<_>>());
    assert!(report.series_path.is_file());

    let one = dir.path().join("one.csv");
    append_metrics(&one, &metrics_row(1)).unwrap();
    let single = plot_history(&one, &dir.path().join("single")).unwrap();
    assert_eq!(single.images.len(), 6);
    assert!(single.history.values().all(|v| v.len() <= 1));

    let bad = dir.path().join("bad.csv");
    let mut text = std::fs::read_to_string(&one).unwrap();
    text.push_str("2,x\n");
    std::fs::write(&bad, text).unwrap();
    let err = plot_history(&bad, dir.path()).unwrap_err().to_string();
    assert!(err.contains("row 3"), "{err}");
}

#[test]
fn synthetic_sets_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        count: 16,
        size: 64,
        seed: 7,
        ..SynthConfig::default()
    };
    let a = generate(&cfg, &dir.path().join("a")).unwrap();
    let b = generate(&cfg, &dir.path().join("b")).unwrap();
    assert_eq!(a.truth, b.truth);
    for (pa, pb) in a.pairs.iter().zip(&b.pairs) {
        assert_eq!(std::fs::read(&pa.source_path).unwrap(), std::fs::read(&pb.source_path).unwrap());
        assert_eq!(std::fs::read(&pa.target_path).unwrap(), std::fs::read(&pb.target_path).unwrap());
    }
    assert_eq!(std::fs::read(&a.truth_path).unwrap(), std::fs::read(&b.truth_path).unwrap());
    assert_eq!(read_truth_csv(&a.truth_path).unwrap().len(), 16);
}

#[test]
fn plume_of_five_percent_reads_as_ash() {
    let cfg = SynthConfig {
        count: 200,
        size: 128,
        blob_count_range: (1, 1),
        seed: 2,
        ..SynthConfig::default()
    };
    let total = 128 * 128;
    let mut checked = 0;
    for i in 0..cfg.count {
        let plan = plan_sample(&cfg, i).unwrap();
        let area = plan.mask(128).iter().filter(|&&m| m).count();
        if (area as f64 / total as f64 - 0.05).abs() < 0.01 {
            let (_, target) = render_sample(&plan, 128);
            assert!(ash_presence(&target, &AshThresholds::default()));
            checked += 1;
        }
    }
    assert!(checked > 0, "no plume near 5% of the image");
}

#[test]
fn mask_evaluation_against_truth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        count: 12,
        size: 32,
        seed: 1,
        ..SynthConfig::default()
    };
    let set = generate(&cfg, dir.path()).unwrap();
    let truth = read_truth_csv(&set.truth_path).unwrap();
    // The targets themselves are perfect masks.
    let eval = evaluate_masks(&dir.path().join("target"), &truth, &AshThresholds::default()).unwrap();
    let ash = set.truth.iter().filter(|t| t.has_ash).count();
    assert_eq!(eval.confusion, ConfusionMatrix::new(ash, 0, 0, 12 - ash));
    let json: serde_json::Value = serde_json::from_str(&eval.to_json(false)).unwrap();
    assert_eq!(json["counts"]["fn"], 0);
    assert_eq!(json["thresholds"]["luminance"], 128.0);

    let unknown = dir.path().join("unknown");
    std::fs::create_dir_all(&unknown).unwrap();
    save_rgb(&RgbImage::new(8, 8), &unknown.join("nobody.png"), ImageFormat::Png).unwrap();
    assert!(evaluate_masks(&unknown, &truth, &AshThresholds::default()).is_err());
}

#[test]
fn denormalized_outputs_stay_in_range() {
    let spec = arch();
    let mut g = build_generator(&spec.generator, 3).unwrap();
    let img = PixelTensor::filled(SIZE, SIZE, 0.3, PixelDomain::Normalized).unwrap();
    let pair = ImagePair::new("x", None, img.clone(), img).unwrap();
    let out = generate_images(&mut g, &[pair], None).unwrap();
    assert!(out[0].data().iter().all(|v| (-1.0..=1.0).contains(v)));
}
