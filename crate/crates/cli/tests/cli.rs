use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ashgan(args: &[&str]) -> Output {
    ashgan_env(args, &[])
}

fn ashgan_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ashgan"));
    cmd.args(args).env_remove("ASHGAN_CONFIG").env_remove("RUST_LOG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn ashgan")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    let out = ashgan(&["--version"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("architecture spec v1"));
    assert_eq!(code(&ashgan(&["train", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&ashgan(&[])), 1);
    assert_eq!(code(&ashgan(&["train", "--epochs", "many"])), 1);
    assert_eq!(code(&ashgan(&["evaluate"])), 1);
    assert_eq!(code(&ashgan(&["evaluate", "--confusion", "1,2,3"])), 1);
    let out = ashgan(&["prepare", "--target-dir", "/tmp"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--source-dir is required"));
}

#[test]
fn confusion_metrics_from_counts() {
    let out = ashgan(&["-q", "evaluate", "--confusion", "23,0,7,0"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("accuracy: 0.7667"), "{text}");
    assert!(text.contains("specificity: undefined"), "{text}");
    let compat = stdout(&ashgan(&["-q", "evaluate", "--confusion", "23,0,7,0", "--paper-compat"]));
    assert!(compat.contains("specificity: 0.0000"), "{compat}");
}

#[test]
fn split_strata_prints_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    let out = ashgan(&[
        "-q", "split", "--strata", "GOES16=148,GOES17=401,HIMAWARI8=16,METEOSAT11=35",
        "--out", s(&manifest),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.split_whitespace().eq(["total", "478", "92", "30", "600"])), "{text}");
    let json: serde_json::Value = serde_json::from_slice(&fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(json["train"].as_array().unwrap().len(), 478);
}

#[test]
fn audit_json_lists_both_networks() {
    let out = ashgan(&["-q", "audit", "--json"]);
    assert_eq!(code(&out), 0);
    let reports: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(reports[0]["output_shape"], serde_json::json!([256, 256, 3]));
    assert_eq!(reports[1]["output_shape"], serde_json::json!([16, 16, 1]));
}

#[test]
fn config_file_env_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.toml");
    fs::write(&config, "[synth]\ncount = 3\nsize = 32\nseed = 5\n").unwrap();
    let out_dir = dir.path().join("a");
    let out = ashgan(&["-q", "--config", s(&config), "synth", "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).starts_with("3 pairs"));

    let out_dir = dir.path().join("b");
    let out = ashgan_env(
        &["-q", "synth", "--count", "2", "--out", s(&out_dir)],
        &[("ASHGAN_CONFIG", s(&config)), ("ASHGAN_SIZE", "16")],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).starts_with("2 pairs"));
    let img = image::open(out_dir.join("source").read_dir().unwrap().next().unwrap().unwrap().path())
        .unwrap();
    assert_eq!(img.width(), 16, "environment beats the config file");

    fs::write(&config, "[synth]\ncont = 3\n").unwrap();
    let out = ashgan(&["--config", s(&config), "synth"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("cont"));
}

#[test]
fn effective_settings_are_logged_as_json() {
    let out = ashgan(&["--log-format", "json", "evaluate", "--confusion", "1,1,1,1"]);
    assert_eq!(code(&out), 0);
    let lines: Vec<serde_json::Value> = stderr(&out)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(lines.iter().any(|l| l["message"] == "  threshold_luminance = 128"));
}

#[test]
fn error_kinds_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    let tgt = dir.path().join("tgt");
    fs::create_dir_all(&src).unwrap();
    fs::create_dir_all(&tgt).unwrap();
    fs::write(src.join("goes16_a.png"), b"not a png").unwrap();
    let out = ashgan(&["-q", "prepare", "--source-dir", s(&src), "--target-dir", s(&tgt)]);
    assert_eq!(code(&out), 2, "missing target is a data error: {}", stderr(&out));
    assert!(stderr(&out).starts_with("error[data]"));

    let out = ashgan(&[
        "-q", "predict", "--image", "x.png", "--checkpoint", s(&dir.path().join("none.weights")),
        "--out", s(&dir.path().join("o.png")),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn train_predict_and_evaluate_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let synth = root.join("synth");
    let prepared = root.join("prepared");
    let run = root.join("run");
    let ok = |args: &[&str]| {
        let out = ashgan(args);
        assert_eq!(code(&out), 0, "ashgan {args:?}: {}", stderr(&out));
        stdout(&out)
    };
    ok(&["-q", "synth", "--count", "16", "--size", "32", "--out", s(&synth)]);
    ok(&[
        "-q", "prepare", "--source-dir", s(&synth.join("source")), "--target-dir",
        s(&synth.join("target")), "--size", "32", "--lossless", "--out-dir", s(&prepared),
    ]);
    let arch = root.join("arch.json");
    ok(&["-q", "audit", "--size", "32", "--width-divisor", "8", "--write-arch", s(&arch)]);
    ok(&[
        "-q", "train", "--dataset-dir", s(&prepared), "--out-dir", s(&run), "--arch", s(&arch),
        "--epochs", "2", "--checkpoint-every", "1",
    ]);
    let out = ashgan(&["-q", "train", "--dataset-dir", s(&prepared), "--out-dir", s(&run), "--arch", s(&arch)]);
    assert_eq!(code(&out), 1, "a used output directory needs --resume: {}", stderr(&out));

    // The architecture is picked up from the run directory.
    let ckpt = run.join("checkpoints/model_epoch_2.weights");
    let inputs = root.join("inputs");
    fs::create_dir_all(&inputs).unwrap();
    for name in ["a.png", "b.png"] {
        fs::copy(synth.join("source").read_dir().unwrap().next().unwrap().unwrap().path(), inputs.join(name))
            .unwrap();
    }
    fs::write(inputs.join("broken.png"), b"nope").unwrap();
    let masks = root.join("masks");
    let out = ashgan(&[
        "-q", "predict-batch", "--dir", s(&inputs), "--checkpoint", s(&ckpt), "--out-dir", s(&masks),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stdout(&out).contains("3 images: 2 masks written, 1 failed"));
    assert!(masks.join("a.png").is_file() && masks.join("b.png").is_file());
    assert!(masks.join("a.meta.json").is_file());

    let single = root.join("single.png");
    ok(&["-q", "predict", "--image", s(&inputs.join("a.png")), "--checkpoint", s(&ckpt), "--out", s(&single)]);
    assert_eq!(fs::read(&single).unwrap(), fs::read(masks.join("a.png")).unwrap());

    let eval = root.join("eval");
    let text = ok(&[
        "-q", "evaluate", "--run-dir", s(&run), "--dataset-dir", s(&prepared), "--out-dir", s(&eval),
        "--seed", "1",
    ]);
    assert!(text.contains("compare epoch 2"), "{text}");
    assert!(eval.join("plots/g_l1.png").is_file());
}
