use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn imt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imt"))
        .args(args)
        .env_remove("IMT_MODEL_DIR")
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    let out = imt(&["synth-corpus", "--out-src", "a", "--out-tgt", "b"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("--seed"));
    let out = imt(&["evaluate", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("Usage"));
    assert_eq!(imt(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(imt(&["--help"]).status.code(), Some(0));
}

#[test]
fn evaluate_identical_output_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let reference = dir.path().join("ref.txt");
    fs::write(&reference, "Durmamos de momento los dos.\nY después Dios dirá.\n").unwrap();
    let out = imt(&[
        "evaluate",
        "--ref",
        p(&reference),
        "--hyp",
        &format!("same={}", p(&reference)),
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report = text(&out.stdout);
    let row = report.lines().find(|l| l.starts_with("same")).unwrap();
    let cells: Vec<&str> = row.split_whitespace().collect();
    assert_eq!(cells, ["same", "100.0", "0.0"]);
}

#[test]
fn evaluate_rejects_misaligned_files() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("ref.txt");
    let h = dir.path().join("hyp.txt");
    fs::write(&r, "a\nb\n").unwrap();
    fs::write(&h, "a\n").unwrap();
    let out = imt(&["evaluate", "--ref", p(&r), "--hyp", &format!("h={}", p(&h)), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_model_file_reports_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("broken");
    fs::create_dir(&model).unwrap();
    fs::write(model.join("phrase-table.txt"), "").unwrap();
    let input = dir.path().join("in.txt");
    fs::write(&input, "el fijo\n").unwrap();
    let out = imt(&["modernize", "--engine", p(&model), "--input", p(&input)]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains(p(&model.join("lm.arpa"))), "{err}");
}

#[test]
fn pipeline_from_synthetic_corpus_to_effort_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let out = imt(&[
        "synth-corpus", "--seed", "7", "--sentences", "400", "--out-src", p(&d("train.hist")), "--out-tgt",
        p(&d("train.mod")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).starts_with("|S| 400"));
    let out = imt(&[
        "synth-corpus", "--seed", "8", "--sentences", "30", "--out-src", p(&d("test.hist")), "--out-tgt",
        p(&d("test.mod")),
    ]);
    assert_eq!(out.status.code(), Some(0));

    let models = d("models");
    let out = imt(&[
        "train-smt", "--src", p(&d("train.hist")), "--tgt", p(&d("train.mod")), "--out", p(&models.join("smt")),
        "--dev-src", p(&d("test.hist")), "--dev-tgt", p(&d("test.mod")), "--tune-rounds", "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let out = imt(&[
        "train-nmt", "--src", p(&d("train.hist")), "--tgt", p(&d("train.mod")), "--out", p(&models.join("nmt")),
        "--seed", "3", "--merges", "50", "--embed", "8", "--hidden", "8", "--max-updates", "5", "--batch-size", "8",
        "--max-output-len", "40",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));

    let out = imt(&[
        "modernize", "--model-dir", p(&models), "--engine", "smt", "--input", p(&d("test.hist")), "--output",
        p(&d("test.smt")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let hyps = fs::read_to_string(d("test.smt")).unwrap();
    assert_eq!(hyps.lines().count(), 30);
    let out = imt(&["modernize", "--model-dir", p(&models), "--engine", "nmt", "--input", p(&d("test.hist"))]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(text(&out.stdout).lines().count(), 30);

    let out = imt(&[
        "evaluate", "--ref", p(&d("test.mod")), "--hyp", &format!("Baseline={}", p(&d("test.hist"))), "--hyp",
        &format!("SMT={}", p(&d("test.smt"))), "--baseline", "Baseline", "--seed", "1", "--reps", "200",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("BLEU"));

    let test_pair = format!("{},{}", p(&d("test.hist")), p(&d("test.mod")));
    let trace = d("traces.txt");
    let out = imt(&[
        "imt-simulate", "--model-dir", p(&models), "--engine", "smt", "--test", &test_pair, "--seed", "1", "--reps",
        "200", "--trace", p(&trace),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report = text(&out.stdout);
    let header = report.lines().nth(1).unwrap();
    let columns: Vec<&str> = header.split_whitespace().filter(|c| c.chars().all(char::is_alphabetic)).collect();
    assert_eq!(columns, ["System", "WSR", "MAR"]);
    let wsr = |name: &str| -> f64 {
        let row = report.lines().find(|l| l.starts_with(name)).unwrap();
        row.split_whitespace().nth(1).unwrap().trim_end_matches(['†', '‡']).parse().unwrap()
    };
    assert!(wsr("smt") < wsr("Baseline"), "{report}");
    assert!(fs::read_to_string(trace).unwrap().contains("IT-0\t0\t-\t"));

    let out = imt(&["imt-simulate", "--engine", "missing", "--test", &test_pair, "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
}
