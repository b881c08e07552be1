//! End-to-end runs of the `screeval` front end through `main_with`.

use std::fs;
use std::path::Path;

use screeval_cli::core::ingest::{parse_cohort, validate_cohort, CohortPaths};
use screeval_cli::{cmd_evaluate, main_with, RunArgs};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = main_with(std::iter::once("screeval").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn synth(dir: &Path, n_patients: usize, seed: u64) {
    let (code, out, err) = run(&[
        "synth",
        "--out-dir",
        dir.to_str().unwrap(),
        "--n-patients",
        &n_patients.to_string(),
        "--seed",
        &seed.to_string(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with(&format!("patients={n_patients} ")), "{out}");
}

/// Flags for a fast evaluate over `input`.
fn quick<'a>(input: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "--input-dir",
        input,
        "--out-dir",
        out,
        "--bootstrap-resamples",
        "50",
        "--permutations",
        "50",
    ]
}

#[test]
fn clean_cohort_validates() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    synth(&input, 300, 1);
    let out = tmp.path().join("out");
    let (code, stdout, err) = run(&["validate", "--input-dir", input.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("rejected_rows=0 issues=0"), "{stdout}");
    let report = fs::read_to_string(out.join("validation_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1, "{report}");
}

#[test]
fn missing_column_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    synth(&input, 50, 2);
    let scores = input.join("scores.csv");
    let text = fs::read_to_string(&scores).unwrap();
    fs::write(&scores, text.replacen("malignancy_score", "score", 1)).unwrap();
    for cmd in ["validate", "label", "evaluate"] {
        let (code, _, err) = run(&[cmd, "--input-dir", input.to_str().unwrap(), "--out-dir", tmp.path().join("o").to_str().unwrap()]);
        assert_eq!(code, 2, "{cmd}: {err}");
        assert!(err.contains("malignancy_score"), "{err}");
    }
}

#[test]
fn missing_input_file_exits_2() {
    let (code, _, err) = run(&["label"]);
    assert_eq!(code, 2);
    assert!(err.contains("exams"), "{err}");
}

#[test]
fn corrupted_report_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    synth(&input, 400, 13);
    // Knock out some BI-RADS values and duplicate a row.
    let findings = input.join("findings.csv");
    let text = fs::read_to_string(&findings).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let header: Vec<&str> = lines[0].split(',').collect();
    let birads = header.iter().position(|c| *c == "birads").unwrap();
    for line in lines.iter_mut().skip(1).step_by(37) {
        let mut cells: Vec<&str> = line.split(',').collect();
        cells[birads] = "";
        *line = cells.join(",");
    }
    let dup = lines[5].clone();
    lines.push(dup);
    fs::write(&findings, lines.join("\n") + "\n").unwrap();

    let out = tmp.path().join("out");
    let (code, _, err) = run(&["validate", "--input-dir", input.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let expected = tmp.path().join("expected.csv");
    validate_cohort(&parse_cohort(&CohortPaths::in_dir(&input)).unwrap())
        .write_csv(&expected)
        .unwrap();
    let got = fs::read_to_string(out.join("validation_report.csv")).unwrap();
    assert_eq!(got, fs::read_to_string(expected).unwrap());
    assert!(got.contains("MISSING_BIRADS"), "{got}");
    assert!(got.lines().count() > 5);
}

#[test]
fn threshold_zero_catches_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    synth(&input, 2000, 3);
    let (i, o) = (input.to_str().unwrap().to_string(), tmp.path().join("out").to_str().unwrap().to_string());
    let mut args = vec!["evaluate", "--threshold", "0", "--axes", "overall"];
    args.extend(quick(&i, &o));
    let (code, stdout, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains(" recall=1.00 "), "{stdout}");
    assert!(stdout.contains(" fnr=0.00 "), "{stdout}");
}

#[test]
fn no_binary_class_exams_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    let bp = tmp.path().join("bp.toml");
    fs::write(&bp, "n_patients = 40\nseed = 4\n[label_weights]\nINTERVAL_CANCER = 0.0\nSCREEN_NEGATIVE = 0.0\nDIAGNOSTIC_NEGATIVE = 0.0\nBIOPSY_PROVEN_BENIGN = 0.0\nSCREEN_DETECTED_CANCER = 0.0\nEXCLUDED = 1.0\n").unwrap();
    let (code, _, err) = run(&["synth", "--blueprint", bp.to_str().unwrap(), "--out-dir", input.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let (code, _, err) = run(&["evaluate", "--input-dir", input.to_str().unwrap(), "--out-dir", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("no binary-class exams"), "{err}");
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("run.toml");
    fs::write(
        &cfg_path,
        "input_dir = \"/data\"\nthreshold = 0.3\nseed = 9\naxes = [\"overall\", \"race\"]\n[bootstrap]\nn_resamples = 100\n",
    )
    .unwrap();
    let args = RunArgs {
        config: Some(cfg_path.clone()),
        threshold: Some(0.2),
        ..Default::default()
    };
    let cfg = args.resolve().unwrap();
    assert_eq!(cfg.threshold, 0.2);
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.bootstrap.n_resamples, 100);
    assert_eq!(cfg.axes.len(), 2);
    assert_eq!(cfg.input_paths().unwrap().exams, Path::new("/data/exams.csv"));

    fs::write(&cfg_path, "thresold = 0.3\n").unwrap();
    let (code, _, err) = run(&["label", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("thresold"), "{err}");
}

#[test]
fn bad_arguments_exit_2() {
    let (code, _, err) = run(&["evaluate", "--input-dir", "x", "--axes", "overall,shoe_size"]);
    assert_eq!(code, 2);
    assert!(err.contains("shoe_size"), "{err}");
    assert_eq!(run(&["evaluate", "--threshold", "1.5", "--input-dir", "x"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["synth", "--replica", "--n-patients", "5", "--out-dir", "x"]).0, 2);
}

#[test]
fn evaluate_writes_every_table() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    synth(&input, 3000, 5);
    let (i, o) = (input.to_str().unwrap().to_string(), tmp.path().join("out").to_str().unwrap().to_string());
    let mut args = vec!["evaluate"];
    args.extend(quick(&i, &o));
    let (code, stdout, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.starts_with("OVERALL n_neg="), "{stdout}");
    for f in [
        "table_demographics.csv",
        "table_metrics.csv",
        "table_metrics.jsonl",
        "distributions_outcome_label.csv",
        "failure_analysis.csv",
        "descriptor_strata.csv",
        "significance.csv",
        "labels.csv",
        "rejects.csv",
        "schema.txt",
    ] {
        assert!(tmp.path().join("out").join(f).is_file(), "{f}");
    }
    // Library call gives the same line.
    let cfg = RunArgs {
        input_dir: Some(input),
        out_dir: Some(tmp.path().join("out2")),
        bootstrap_resamples: Some(50),
        permutations: Some(50),
        ..Default::default()
    }
    .resolve()
    .unwrap();
    assert_eq!(cmd_evaluate(&cfg).unwrap().stdout + "\n", stdout);
}
