use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maqp_core::net::checkpoint::encode_checkpoint;
use maqp_core::{DepthEncoding, QualityNet};

fn maqp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maqp"))
        .args(args)
        .env("MAQP_THREADS", "1")
        .output()
        .expect("spawn maqp")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn assert_fails(out: &Output, code: i32) {
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(code), "stderr: {stderr}");
    let lines: Vec<&str> = stderr.lines().filter(|l| l.starts_with("maqp: error")).collect();
    assert_eq!(lines.len(), 1, "stderr: {stderr}");
    assert!(
        lines[0].starts_with(&format!("maqp: error code={code} kind=")),
        "{}",
        lines[0]
    );
    assert!(!lines[0].contains('\n'));
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

const SMALL: &[&str] = &[
    "--scenes",
    "10",
    "--epochs",
    "2",
    "--aqp-epochs",
    "2",
    "--canvas",
    "32x32",
    "--aqp-batch",
    "4",
];

fn synth(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    let mut args = vec!["synth", "--seed", "1", "--out", p(&data)];
    args.extend_from_slice(SMALL);
    assert_ok(&maqp(&args));
    data
}

fn pipeline(dir: &Path) -> PathBuf {
    let data = synth(dir);
    let run = dir.join("run");
    let step = |cmd: &str, extra: &[&str]| {
        let mut args = vec![cmd, "--seed", "1", "--out", p(&run), "--data", p(&data)];
        args.extend_from_slice(SMALL);
        args.extend_from_slice(extra);
        assert_ok(&maqp(&args));
    };
    step("train", &[]);
    let model = run.join("model.maqn");
    step("gen-patch", &["--model", p(&model)]);
    let patch = run.join("patch.maqp");
    step("adapt", &["--model", p(&model), "--patch", p(&patch)]);
    step("eval", &["--model", p(&model), "--patch", p(&patch)]);
    run
}

fn tree_bytes(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn help_lists_every_key_with_its_default() {
    let out = maqp(&["train", "--help"]);
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    for key in [
        "seed",
        "epochs",
        "lr",
        "aqp-epochs",
        "sigma-p",
        "alpha",
        "beta",
        "gamma",
        "epsilon",
        "lambda",
        "update-mode",
        "gc-tol",
    ] {
        assert!(text.contains(&format!("--{key}")), "missing --{key}");
    }
    assert!(text.contains("[default: 8/255]"));
    assert!(text.contains("[default: 224x224]"));
}

#[test]
fn usage_errors_exit_1() {
    assert_fails(&maqp(&[]), 1);
    assert_fails(&maqp(&["train", "--bogus", "3"]), 1);
    let dir = tempfile::tempdir().unwrap();
    assert_fails(
        &maqp(&["synth", "--out", p(dir.path()), "--sigma-p", "0", "--scenes", "2"]),
        1,
    );
    assert_fails(
        &maqp(&["synth", "--out", p(dir.path()), "--update-mode", "sideways"]),
        1,
    );
}

#[test]
fn unknown_config_file_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# comment\nepochs = 3\nlearning_rate = 0.1\n").unwrap();
    let out = maqp(&["synth", "--config", p(&cfg), "--out", p(&dir.path().join("o"))]);
    assert_fails(&out, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("`learning_rate`"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "scenes = 7\nheight = 80\n").unwrap();
    let out = dir.path().join("o");
    assert_ok(&maqp(&[
        "synth",
        "--config",
        p(&cfg),
        "--scenes",
        "3",
        "--out",
        p(&out),
    ]));
    let resolved = fs::read_to_string(out.join("resolved_config.txt")).unwrap();
    assert!(resolved.contains("scenes = 3"));
    assert!(resolved.contains("height = 80"));
    assert!(resolved.contains("epsilon = 8/255"));
}

#[test]
fn missing_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_fails(
        &maqp(&["train", "--data", "/nonexistent/maqp", "--out", p(dir.path())]),
        2,
    );
}

#[test]
fn corrupt_patch_exits_3_and_divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let run = dir.path().join("run");
    assert_ok(&maqp(&["train", "--data", p(&data), "--out", p(&run), "--epochs", "0"]));
    let bad = dir.path().join("bad.maqp");
    fs::write(&bad, b"not a patch bundle").unwrap();
    let model = run.join("model.maqn");
    assert_fails(
        &maqp(&[
            "eval",
            "--data",
            p(&data),
            "--model",
            p(&model),
            "--patch",
            p(&bad),
            "--out",
            p(&run),
        ]),
        3,
    );

    let out = maqp(&[
        "train",
        "--data",
        p(&data),
        "--out",
        p(&run),
        "--epochs",
        "2",
        "--lr",
        "1e308",
    ]);
    assert_fails(&out, 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch 1"));
}

#[test]
fn zero_epochs_writes_the_initialized_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let run = dir.path().join("run");
    assert_ok(&maqp(&[
        "train",
        "--seed",
        "1",
        "--data",
        p(&data),
        "--out",
        p(&run),
        "--epochs",
        "0",
    ]));
    let bytes = fs::read(run.join("model.maqn")).unwrap();
    assert_eq!(bytes, encode_checkpoint(&QualityNet::init(1, DepthEncoding::MinMax)));
}

#[test]
fn gradcheck_passes_on_fresh_model_and_fails_at_absurd_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gc");
    assert_ok(&maqp(&["gradcheck", "--out", p(&out)]));
    let text = fs::read_to_string(out.join("gradcheck.txt")).unwrap();
    assert!(text.contains("result = pass"), "{text}");
    assert_fails(&maqp(&["gradcheck", "--out", p(&out), "--gc-tol", "1e-30"]), 5);
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = pipeline(a.path());
    let rb = pipeline(b.path());
    for f in [
        "model.maqn",
        "patch.maqp",
        "results.txt",
        "patch_trace.csv",
        "train_trace.csv",
    ] {
        assert!(ra.join(f).is_file(), "missing {f}");
    }
    let results = fs::read_to_string(ra.join("results.txt")).unwrap();
    assert!(results.contains("q_acc = "));
    let ta = tree_bytes(&ra);
    let tb = tree_bytes(&rb);
    assert!(ta.iter().any(|(f, _)| f.starts_with("adapted")));
    assert_eq!(ta.len(), tb.len());
    for ((fa, ba), (fb, bb)) in ta.iter().zip(&tb) {
        assert_eq!(fa, fb);
        assert!(ba == bb, "{} differs between runs", fa.display());
    }
}
