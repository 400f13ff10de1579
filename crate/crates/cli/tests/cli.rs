use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use clot_cli::commands::{calibration_csv, cmd_calibrate, cmd_simulate, cmd_test, TestFileConfig, CALIBRATION_HEADER};
use clot_cli::config::TestSection;
use clot_cli::ingest::write_dataset_csv;
use clot_cli::{cmd_audit, ingest_csv, AuditReport, CliError};
use clot_core::{ColumnRole, Verdict};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clot"))
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn roles(pairs: &[(&str, ColumnRole)]) -> BTreeMap<String, ColumnRole> {
    pairs.iter().map(|(n, r)| (n.to_string(), *r)).collect()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn missing_declared_column_is_named() {
    let tmp = TempDir::new().unwrap();
    let p = write(tmp.path(), "d.csv", "a,b\n1,x\n2,y\n3,z\n");
    let err = ingest_csv(&p, &roles(&[("a", ColumnRole::Observable), ("group", ColumnRole::Sensitive)])).unwrap_err();
    assert!(matches!(&err, CliError::MissingColumn { column, .. } if column == "group"));
    assert!(err.to_string().contains("group"));
}

#[test]
fn rows_with_missing_values_are_dropped_and_counted() {
    let tmp = TempDir::new().unwrap();
    let mut text = String::from("g,x,unused\n");
    for i in 0..100 {
        let x = if i == 10 { String::new() } else { format!("{}", i as f64 / 10.0) };
        let g = if i == 50 { "NA" } else if i % 2 == 0 { "a" } else { "b" };
        text.push_str(&format!("{g},{x},\n"));
    }
    let p = write(tmp.path(), "d.csv", &text);
    let ing = ingest_csv(&p, &roles(&[("g", ColumnRole::Sensitive), ("x", ColumnRole::Observable)])).unwrap();
    assert_eq!(ing.dataset.n_rows(), 98);
    assert_eq!(ing.dropped_rows, 2);
    assert!(ing.dataset.column("x").unwrap().data.is_numeric());
    assert!(!ing.dataset.column("g").unwrap().data.is_numeric());
}

#[test]
fn zero_usable_rows_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let p = write(tmp.path(), "d.csv", "g,x\nNA,1\na,\n");
    let err = ingest_csv(&p, &roles(&[("g", ColumnRole::Sensitive), ("x", ColumnRole::Observable)])).unwrap_err();
    assert!(matches!(err, CliError::NoRows { .. }));
    assert!(matches!(
        ingest_csv(&tmp.path().join("nope.csv"), &BTreeMap::new()),
        Err(CliError::Io { .. })
    ));
}

#[test]
fn ingest_write_ingest_round_trips() {
    let r = roles(&[
        ("group", ColumnRole::Sensitive),
        ("region", ColumnRole::Sensitive),
        ("x1", ColumnRole::Observable),
    ]);
    let first = ingest_csv(&data_dir().join("biased_logistic.csv"), &r).unwrap();
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("again.csv");
    write_dataset_csv(&first.dataset, &out).unwrap();
    let second = ingest_csv(&out, &r).unwrap();
    assert_eq!(first, second);
}

#[test]
fn bundled_example_matches_its_generator() {
    let tmp = TempDir::new().unwrap();
    cmd_simulate("biased-logistic", 1000, 7, 2.0, tmp.path()).unwrap();
    for name in ["biased_logistic.csv", "biased_logistic.toml"] {
        assert_eq!(
            fs::read(tmp.path().join(name)).unwrap(),
            fs::read(data_dir().join(name)).unwrap(),
            "{name}"
        );
    }
}

fn sample_file(dir: &Path, name: &str, values: &[f64]) -> PathBuf {
    let mut text = String::from("y\n");
    for v in values {
        text.push_str(&format!("{v:?}\n"));
    }
    write(dir, name, &text)
}

#[test]
fn test_command_exit_statuses() {
    let tmp = TempDir::new().unwrap();
    let a: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin()).collect();
    let fa = sample_file(tmp.path(), "a.csv", &a);
    let out = bin().args(["test", fa.to_str().unwrap(), fa.to_str().unwrap(), "--epsilon", "0.05"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["outcome"]["statistic"], 0.0);

    let zeros = sample_file(tmp.path(), "z.csv", &[0.0; 30]);
    let tens = sample_file(tmp.path(), "t.csv", &[10.0; 30]);
    let out = bin().args(["test", zeros.to_str().unwrap(), tens.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let short = sample_file(tmp.path(), "s.csv", &[0.0; 29]);
    let out = bin().args(["test", zeros.to_str().unwrap(), short.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shapes differ"));

    let out = bin().args(["test", zeros.to_str().unwrap(), "missing.csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generated_gaussian_shift_is_rejected_under_the_neutral_preset() {
    let tmp = TempDir::new().unwrap();
    let files = cmd_simulate("gaussian-shift", 500, 3, 0.0, tmp.path()).unwrap();
    let run = cmd_test(&files[0], &files[1], &TestFileConfig::default(), &TestSection::default(), Some(tmp.path())).unwrap();
    assert_eq!(run.exit_code(), 1);
    assert!(run.report_path.unwrap().exists());
}

#[test]
fn identity_interventions_audit_fair() {
    let tmp = TempDir::new().unwrap();
    let base = fs::read_to_string(data_dir().join("biased_logistic.toml")).unwrap();
    let text = base.replace("interventions = []\n", "")
        + "\n[[interventions]]\nattribute = \"group\"\noperator = \"identity\"\n\n[[interventions]]\nattribute = \"region\"\noperator = \"identity\"\n";
    let text = text.replace("dataset = \"biased_logistic.csv\"", &format!("dataset = {:?}", data_dir().join("biased_logistic.csv")));
    let cfg = write(tmp.path(), "c.toml", &text);
    let run = cmd_audit(&cfg, &TestSection::default(), None).unwrap();
    assert_eq!(run.report.verdict, Verdict::Fair);
    assert_eq!(run.exit_code(), 0);
}

#[test]
fn bundled_example_is_unfair_on_the_planted_attribute_only() {
    let tmp = TempDir::new().unwrap();
    let out = bin()
        .args(["audit", "--config"])
        .arg(data_dir().join("biased_logistic.toml"))
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("audit_report.json")).unwrap();
    let report: AuditReport = serde_json::from_str(&text).unwrap();
    let rejected: Vec<&str> = report
        .attributes
        .iter()
        .filter(|a| a.outcome.decision.rejected())
        .map(|a| a.attribute.as_str())
        .collect();
    assert_eq!(rejected, vec!["group"]);
    // Lossless round trip, byte for byte.
    assert_eq!(clot_cli::report::to_json(&report).unwrap(), text);
    // Asymptotic mode leaves no replicates to plot.
    assert!(report.histograms.is_empty());
}

#[test]
fn resampling_audits_write_histograms() {
    let tmp = TempDir::new().unwrap();
    let over = TestSection {
        preset: Some(clot_core::SensitivityLevel::Strong),
        replicates: Some(200),
        ..Default::default()
    };
    let run = cmd_audit(&data_dir().join("biased_logistic.toml"), &over, Some(tmp.path())).unwrap();
    assert_eq!(run.report.histograms.len(), 2);
    let hist = fs::read_to_string(tmp.path().join(&run.report.histograms[0])).unwrap();
    assert!(hist.starts_with("value,density\n"));
}

#[test]
fn config_errors_exit_2_with_a_line() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(data_dir().join("biased_logistic.toml")).unwrap() + "\n[extra]\nkey = 1\n";
    let cfg = write(tmp.path(), "bad.toml", &text);
    let out = bin().args(["audit", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line") && err.contains("extra"), "{err}");
}

#[test]
fn calibrate_outputs_and_errors() {
    assert!(cmd_calibrate("gaussian-null", 0, 0, None, None, None).is_err());
    assert!(cmd_calibrate("no-such-scenario", 10, 0, None, None, None).is_err());
    let rows = cmd_calibrate("gaussian-null-2d", 500, 1, None, Some(0.05), None).unwrap();
    assert!(rows[0].rejection_rate <= 0.08, "{rows:?}");
    let far = cmd_calibrate("far-alternative", 50, 1, None, None, None).unwrap();
    assert!(far.last().unwrap().rejection_rate >= 0.95);
    let csv = calibration_csv(&far);
    assert!(csv.starts_with(CALIBRATION_HEADER));
    assert_eq!(csv.lines().count(), far.len() + 1);

    let out = bin().args(["calibrate", "--scenario", "point-mass-null", "--trials", "20"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().nth(1), Some("100,0.05,0.05,0.0,0.0"));
    let out = bin().args(["calibrate", "--scenario", "gaussian-null", "--trials", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_does_not_change_reports() {
    let tmp = TempDir::new().unwrap();
    let run = |threads: &str, sub: &str| {
        let dir = tmp.path().join(sub);
        let out = bin()
            .env("CLOT_THREADS", threads)
            .env("SOURCE_DATE_EPOCH", "0")
            .args(["audit", "--preset", "strong", "--replicates", "150", "--config"])
            .arg(data_dir().join("biased_logistic.toml"))
            .arg("--out")
            .arg(&dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(1));
        fs::read(dir.join("audit_report.json")).unwrap()
    };
    assert_eq!(run("1", "one"), run("3", "three"));
}
