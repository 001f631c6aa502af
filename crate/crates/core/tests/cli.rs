use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn freqfusion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqfusion"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

fn generate(dir: &Path, name: &str, n: &str) -> String {
    let out = path(dir, name);
    let o = freqfusion(&["generate", "--out", &out, "--n-subjects", n, "--seed", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn generate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a", "6");
    let b = generate(dir.path(), "b", "6");
    let (fa, fb) = (files(Path::new(&a)), files(Path::new(&b)));
    // manifest, config and one CSV per subject
    assert_eq!(fa.len(), 8);
    assert_eq!(fa, fb);
}

#[test]
fn invalid_fraction_is_a_usage_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = freqfusion(&[
        "generate",
        "--out",
        &path(dir.path(), "d"),
        "--positive-fraction",
        "1.5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("positive_fraction"));
}

#[test]
fn unknown_flag_exits_2_and_help_lists_defaults() {
    assert_eq!(
        freqfusion(&["train", "--no-such-flag"]).status.code(),
        Some(2)
    );
    let help = freqfusion(&["train", "--help"]);
    assert!(help.status.success());
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in [
        "--config",
        "--out",
        "--epochs",
        "--batch-size",
        "--lr",
        "--seed",
        "--folds",
        "--threads",
    ] {
        assert!(text.contains(flag), "train --help lacks {flag}");
    }
    assert!(text.contains("[default: out]"));
    assert!(text.contains("config default: 100"));
}

#[test]
fn extract_writes_biomarkers_and_priors_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "data", "4");
    for out in ["x1", "x2"] {
        let o = freqfusion(&[
            "--threads",
            "1",
            "extract",
            "--dataset",
            &data,
            "--k",
            "8",
            "--out",
            &path(dir.path(), out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let x1 = files(&dir.path().join("x1"));
    assert_eq!(x1, files(&dir.path().join("x2")));
    let biomarkers = x1
        .iter()
        .filter(|(p, _)| p.starts_with("biomarkers"))
        .count();
    let priors: Vec<_> = x1.iter().filter(|(p, _)| p.starts_with("priors")).collect();
    assert_eq!(biomarkers, 4);
    assert_eq!(priors.len(), 18);
    for (_, bytes) in priors {
        assert!(String::from_utf8_lossy(bytes).starts_with("# config-sha256: "));
    }
    assert!(x1
        .iter()
        .all(|(p, _)| !p.to_string_lossy().contains(".tmp")));
}

#[test]
fn extract_rejects_k_beyond_the_half_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "data", "2");
    let o = freqfusion(&[
        "extract",
        "--dataset",
        &data,
        "--k",
        "400",
        "--out",
        &path(dir.path(), "x"),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = freqfusion(&[
        "extract",
        "--dataset",
        &path(dir.path(), "nowhere"),
        "--out",
        &path(dir.path(), "x"),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn analyze_writes_nine_bounded_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "data", "12");
    let out = path(dir.path(), "pb");
    let o = freqfusion(&[
        "analyze",
        "--dataset",
        &data,
        "--out",
        &out,
        "--proportions",
        "0.4,0.7,1.0",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let heatmaps: Vec<_> = files(Path::new(&out))
        .into_iter()
        .filter(|(p, _)| p.to_string_lossy().starts_with("pb_heatmap_"))
        .collect();
    assert_eq!(heatmaps.len(), 9);
    for (_, bytes) in heatmaps {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(bytes.as_slice());
        for record in reader.records() {
            for v in record.unwrap().iter().skip(1) {
                let r: f64 = v.parse().unwrap();
                assert!((-1.0..=1.0).contains(&r), "{r}");
            }
        }
    }
}

#[test]
fn train_then_report_from_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[synthetic]\nn_subjects = 12\n[model]\nd_k = 4\ngru_hidden = 4\ngru_layers = 1\n[train]\nepochs = 2\n",
    )
    .unwrap();
    let out = path(dir.path(), "run");
    let o = freqfusion(&[
        "--threads",
        "1",
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--epochs",
        "1",
        "--out",
        &out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let written: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("run/config.json")).unwrap()).unwrap();
    assert_eq!(written["train"]["epochs"], 1);
    assert_eq!(written["model"]["d_k"], 4);
    let metrics = fs::read_to_string(dir.path().join("run/metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert!(lines[0].starts_with("# config-sha256: "));
    assert_eq!(lines.len(), 1 + 1 + 4 + 1);
    assert!(lines[6].starts_with("mean,"));
    for f in 0..4 {
        assert!(dir.path().join(format!("run/roc_fold{f}.csv")).exists());
        assert!(dir
            .path()
            .join(format!("run/checkpoints/fold{f}.ckpt"))
            .exists());
    }
    let o = freqfusion(&["report", "--run", &out]);
    assert!(o.status.success());
    assert!(fs::read_to_string(dir.path().join("run/summary.txt"))
        .unwrap()
        .contains("cross-validation (4 folds)"));
}

#[test]
fn report_without_results_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        freqfusion(&["report", "--run", &path(dir.path(), "empty")])
            .status
            .code(),
        Some(3)
    );
}
