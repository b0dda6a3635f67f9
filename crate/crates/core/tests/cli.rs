use std::path::Path;
use std::process::{Command, Output};

fn eegid(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eegid"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = eegid(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn full_command_line_flow() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    ok(
        dir,
        &[
            "synth",
            "--subjects",
            "3",
            "--duration",
            "30",
            "--out",
            "ds",
        ],
    );
    assert!(dir.join("ds/subject_2/session_0.csv").exists());

    let out = ok(dir, &["extract", "--in", "ds", "--out", "feats.csv"]);
    assert!(out.contains("222 windows"), "{out}");
    let header = std::fs::read_to_string(dir.join("feats.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap().split(',').count(), 2 + 80);

    ok(
        dir,
        &["preprocess", "--in", "ds", "--out", "clean", "--no-asr"],
    );
    assert!(dir.join("clean/subject_0/session_0.csv").exists());

    let out = ok(dir, &["train", "--in", "ds", "--model", "m.txt"]);
    assert!(out.contains("accuracy: 1.0000"), "{out}");
    let model = std::fs::read_to_string(dir.join("m.txt")).unwrap();
    assert!(model.starts_with("eegid-model 1\n"));

    // training the same data twice writes the same bytes
    ok(dir, &["train", "--in", "ds", "--model", "m2.txt"]);
    assert_eq!(model, std::fs::read_to_string(dir.join("m2.txt")).unwrap());

    let out = ok(dir, &["evaluate", "--model", "m.txt", "--in", "ds"]);
    assert!(out.contains("accuracy:"), "{out}");

    let out = ok(
        dir,
        &[
            "identify",
            "--model",
            "m.txt",
            "--in",
            "ds/subject_1/session_0.csv",
        ],
    );
    assert!(out.contains("subject: 1"), "{out}");

    ok(
        dir,
        &[
            "grid",
            "--features",
            "feats.csv",
            "--kernels",
            "rbf,linear",
            "--out",
            "g.csv",
        ],
    );
    let grid = std::fs::read_to_string(dir.join("g.csv")).unwrap();
    let mut lines = grid.lines();
    assert_eq!(
        lines.next().unwrap(),
        "kernel,c,gamma,degree,coef0,accuracy,error"
    );
    assert_eq!(lines.count(), 9 + 4);
}

#[test]
fn failures_exit_nonzero_with_a_stage_tag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = eegid(
        tmp.path(),
        &["identify", "--model", "missing.txt", "--in", "missing.csv"],
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: ["), "{err}");

    std::fs::write(
        tmp.path().join("bad.txt"),
        "eegid-model 99\nchecksum sha256=00\n",
    )
    .unwrap();
    let out = eegid(tmp.path(), &["evaluate", "--model", "bad.txt", "--in", "."]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[model]"));

    let out = eegid(
        tmp.path(),
        &[
            "train",
            "--in",
            ".",
            "--model",
            "m.txt",
            "--train-fraction",
            "1.5",
        ],
    );
    assert!(!out.status.success());
}
