use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bitext(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bitext"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = bitext(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

/// Small toy corpus with vocabularies, shared layout for all tests.
fn workspace() -> (tempfile::TempDir, PathBuf) {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().to_path_buf();
    ok(&d, &["gen-toy", "--out-dir", "toy", "--train", "300", "--test", "200", "--heldout", "200", "--seed", "4"]);
    ok(&d, &["build-vocab", "--input", "toy/train.src", "--output", "sv.txt"]);
    ok(&d, &["build-vocab", "--input", "toy/train.tgt", "--output", "tv.txt"]);
    (t, d)
}

const TINY: &[&str] = &[
    "--src", "toy/train.src", "--tgt", "toy/train.tgt", "--src-vocab", "sv.txt", "--tgt-vocab", "tv.txt",
    "--d-e", "8", "--d-h", "8", "--d-f", "4", "--batch", "64", "--lr", "0.002",
];

fn train(d: &Path, extra: &[&str]) -> String {
    let mut args = vec!["train"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    ok(d, &args)
}

#[test]
fn build_vocab_outcomes() {
    let (_t, d) = workspace();
    let v = fs::read_to_string(d.join("sv.txt")).unwrap();
    assert!(v.starts_with("<pad>\n<unk>\n"));

    let out = bitext(&d, &["build-vocab", "--input", "missing.txt", "--output", "x.txt"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));

    let out = bitext(&d, &["build-vocab", "--input", "toy/train.src", "--output", "small.txt", "--max-size", "2"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert_eq!(fs::read_to_string(d.join("small.txt")).unwrap(), "<pad>\n<unk>\n");
}

#[test]
fn training_is_reproducible() {
    let (_t, d) = workspace();
    train(&d, &["--epochs", "1", "--out", "a.btxm"]);
    train(&d, &["--epochs", "1", "--out", "b.btxm"]);
    assert_eq!(fs::read(d.join("a.btxm")).unwrap(), fs::read(d.join("b.btxm")).unwrap());
    let log = fs::read_to_string(d.join("a.btxm.log.csv")).unwrap();
    assert!(log.starts_with("epoch,mean_loss,wall_seconds,negatives_seed\n"));
    train(&d, &["--epochs", "1", "--seed", "9", "--out", "c.btxm"]);
    assert_ne!(fs::read(d.join("a.btxm")).unwrap(), fs::read(d.join("c.btxm")).unwrap());
}

#[test]
fn resume_matches_uninterrupted_run() {
    let (_t, d) = workspace();
    train(&d, &["--epochs", "2", "--out", "straight.btxm"]);
    train(&d, &["--epochs", "1", "--out", "half.btxm", "--checkpoint", "half.ckpt"]);
    train(&d, &["--epochs", "2", "--out", "resumed.btxm", "--resume", "half.ckpt"]);
    assert_eq!(
        fs::read(d.join("straight.btxm")).unwrap(),
        fs::read(d.join("resumed.btxm")).unwrap()
    );
}

#[test]
fn config_file_and_overrides() {
    let (_t, d) = workspace();
    fs::write(d.join("run.cfg"), "epochs = 4\nd_e = 8\n# comment\n").unwrap();
    let mut args = vec!["train", "--config", "run.cfg", "--epochs", "1"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--out", "cfg.btxm"]);
    let out = bitext(&d, &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("epochs: 1"), "{stderr}");
    assert_eq!(fs::read_to_string(d.join("cfg.btxm.log.csv")).unwrap().lines().count(), 2);

    fs::write(d.join("bad.cfg"), "no-such-flag = 1\n").unwrap();
    let mut args = vec!["train", "--config", "bad.cfg"];
    args.extend_from_slice(TINY);
    assert_eq!(code(&bitext(&d, &args)), 2);
}

#[test]
fn negatives_need_two_pairs() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    fs::write(d.join("s.txt"), "a b\n").unwrap();
    fs::write(d.join("t.txt"), "x y\n").unwrap();
    ok(d, &["build-vocab", "--input", "s.txt", "--output", "sv.txt"]);
    ok(d, &["build-vocab", "--input", "t.txt", "--output", "tv.txt"]);
    let base = [
        "train", "--src", "s.txt", "--tgt", "t.txt", "--src-vocab", "sv.txt", "--tgt-vocab", "tv.txt",
        "--d-e", "4", "--d-h", "4", "--d-f", "2", "--epochs", "1",
    ];
    let mut a = base.to_vec();
    a.extend_from_slice(&["--m", "0"]);
    assert_eq!(code(&bitext(d, &a)), 0);
    let mut b = base.to_vec();
    b.extend_from_slice(&["--m", "1"]);
    assert_eq!(code(&bitext(d, &b)), 2);
}

#[test]
fn extract_selection_rules() {
    let (_t, d) = workspace();
    train(&d, &["--epochs", "1", "--out", "m.btxm"]);
    let common = [
        "extract", "--model", "m.btxm", "--src-vocab", "sv.txt", "--tgt-vocab", "tv.txt",
        "--src", "toy/test.src", "--tgt", "toy/test.tgt",
    ];
    let mut both = common.to_vec();
    both.extend_from_slice(&["--rho", "0.5", "--top-k", "3", "--out-dir", "x"]);
    assert_eq!(code(&bitext(&d, &both)), 2);

    let mut top = common.to_vec();
    top.extend_from_slice(&["--top-k", "7", "--out-dir", "top"]);
    let stdout = ok(&d, &top);
    assert!(stdout.contains("400 encoder passes"), "{stdout}");
    let pairs = fs::read_to_string(d.join("top/pairs.tsv")).unwrap();
    assert_eq!(pairs.lines().count(), 7);
    assert_eq!(fs::read_to_string(d.join("top/source.txt")).unwrap().lines().count(), 7);

    let mut never = common.to_vec();
    never.extend_from_slice(&["--rho", "1.0", "--out-dir", "none"]);
    ok(&d, &never);
    assert!(fs::read_to_string(d.join("none/pairs.tsv")).unwrap().is_empty());
}

#[test]
fn evaluation_is_deterministic_and_systems_share_testsets() {
    let (_t, d) = workspace();
    train(&d, &["--epochs", "1", "--out", "m.btxm"]);
    ok(&d, &[
        "synth-noise", "--parallel-src", "toy/test.src", "--parallel-tgt", "toy/test.tgt",
        "--heldout-tgt", "toy/heldout.tgt", "--r", "0.5", "--p", "60", "--seed", "2", "--out-dir", "ts",
    ]);
    assert_eq!(fs::read_to_string(d.join("ts/gold.tsv")).unwrap().lines().count(), 30);
    let eval = |curve: &str| {
        ok(&d, &[
            "evaluate", "--model", "m.btxm", "--src-vocab", "sv.txt", "--tgt-vocab", "tv.txt",
            "--testset-dir", "ts", "--curve-out", curve,
        ])
    };
    eval("c1.csv");
    eval("c2.csv");
    let c1 = fs::read_to_string(d.join("c1.csv")).unwrap();
    assert_eq!(c1, fs::read_to_string(d.join("c2.csv")).unwrap());
    assert!(c1.starts_with("rho,precision,recall,f1,extracted\n"));

    ok(&d, &["baseline-train", "--src", "toy/train.src", "--tgt", "toy/train.tgt", "--iterations", "1", "--out-dir", "base"]);
    let out = ok(&d, &["evaluate", "--baseline", "base", "--testset-dir", "ts", "--curve-out", "cb.csv"]);
    assert!(out.contains("F1="));
    assert!(fs::read_to_string(d.join("cb.csv")).unwrap().starts_with("rho,precision"));

    fs::remove_file(d.join("ts/gold.tsv")).unwrap();
    let out = bitext(&d, &["evaluate", "--baseline", "base", "--testset-dir", "ts"]);
    assert_ne!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("gold.tsv"));
}

#[test]
fn baseline_extract_omits_filtered_pairs() {
    let (_t, d) = workspace();
    ok(&d, &["baseline-train", "--src", "toy/train.src", "--tgt", "toy/train.tgt", "--out-dir", "base"]);
    fs::write(d.join("s.txt"), "s1 s2 s3\ns1\n").unwrap();
    // second target is far too long for either source
    fs::write(d.join("t.txt"), "t1 t2\nt1 t2 t3 t4 t5 t6 t7 t8 t9\n").unwrap();
    ok(&d, &["baseline-extract", "--baseline", "base", "--src", "s.txt", "--tgt", "t.txt", "--rho", "0", "--out-dir", "bx"]);
    let pairs = fs::read_to_string(d.join("bx/pairs.tsv")).unwrap();
    assert!(pairs.lines().all(|l| !l.contains("\t1\t")), "{pairs}");
}

#[test]
fn sweeps_write_one_row_per_setting() {
    let (_t, d) = workspace();
    train(&d, &["--epochs", "1", "--out", "m.btxm"]);
    ok(&d, &[
        "noise-sweep", "--model", "m.btxm", "--src-vocab", "sv.txt", "--tgt-vocab", "tv.txt",
        "--parallel-src", "toy/test.src", "--parallel-tgt", "toy/test.tgt", "--heldout-tgt", "toy/heldout.tgt",
        "--p", "40", "--ratios", "0,0.5,0.9", "--seeds", "1,2", "--out", "noise.csv",
    ]);
    assert_eq!(fs::read_to_string(d.join("noise.csv")).unwrap().lines().count(), 1 + 6);

    ok(&d, &[
        "synth-noise", "--parallel-src", "toy/test.src", "--parallel-tgt", "toy/test.tgt",
        "--heldout-tgt", "toy/heldout.tgt", "--r", "0.5", "--p", "40", "--out-dir", "ts",
    ]);
    let mut args = vec!["m-sweep", "--ms", "1,2", "--epochs", "1", "--testset-dirs", "ts", "--out", "m.csv"];
    args.extend_from_slice(TINY);
    ok(&d, &args);
    let csv = fs::read_to_string(d.join("m.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("1,") && rows[1].starts_with("2,"));
}

#[test]
fn help_documents_formats() {
    let t = tempfile::tempdir().unwrap();
    let out = ok(t.path(), &["--help"]);
    for word in ["vocabulary", "gold.tsv", "rho,precision,recall,f1,extracted", "key=value"] {
        assert!(out.contains(word), "{word}");
    }
}
