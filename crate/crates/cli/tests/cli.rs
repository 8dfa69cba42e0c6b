use std::fs;
use std::path::Path;
use std::process::Command as Process;

use ftm_cli::{
    cmd_audit, cmd_subsets, cmd_sweep, cmd_train, Command, DatasetSource, EvalSettings, RunSpec, SyntheticParams,
};
use ftm_core::trainer::{Method, TrainConfig};
use serde_json::Value;

fn small_synthetic() -> DatasetSource {
    DatasetSource::Synthetic(SyntheticParams {
        n: 300,
        dim: 3,
        ..SyntheticParams::default()
    })
}

fn spec(command: Command, dataset: DatasetSource, out: &Path) -> RunSpec {
    RunSpec {
        command,
        dataset,
        split_ratio: 0.8,
        minority_frac: None,
        train: TrainConfig {
            epochs: 3,
            batch_size: 64,
            match_batch_size: 32,
            seed: 4,
            ..TrainConfig::default()
        },
        eval: EvalSettings {
            match_batch_size: 32,
            match_batches: 5,
            ..EvalSettings::default()
        },
        out_dir: out.to_path_buf(),
    }
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{name}.schema.json"));
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema_name: &str, instance: &Value) {
    let validator = jsonschema::validator_for(&schema(schema_name)).unwrap();
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_name}: {errors:?}\n{instance}");
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn train_outputs_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_train(&spec(Command::Train, small_synthetic(), a.path())).unwrap();
    cmd_train(&spec(Command::Train, small_synthetic(), b.path())).unwrap();
    for f in ["model.json", "report.json", "train_log.jsonl"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(a.path().join("meta.json").exists());
}

#[test]
fn train_report_and_log_match_schemas() {
    let dir = tempfile::tempdir().unwrap();
    cmd_train(&spec(Command::Train, small_synthetic(), dir.path())).unwrap();
    let report = read_json(&dir.path().join("report.json"));
    assert_valid("report", &report);
    assert_eq!(report["method"], "ftm");
    let log = fs::read_to_string(dir.path().join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert!(!log.contains('\r'));
    for line in log.lines() {
        assert_valid("train_log_record", &serde_json::from_str(line).unwrap());
    }
}

#[test]
fn zero_lambda_equals_unfair_method() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut ftm = spec(Command::Train, small_synthetic(), a.path());
    ftm.train.lambda = 0.0;
    let mut unfair = spec(Command::Train, small_synthetic(), b.path());
    unfair.train.method = Method::Unfair;
    let x = cmd_train(&ftm).unwrap();
    let y = cmd_train(&unfair).unwrap();
    assert_eq!(x.report.metrics, y.report.metrics);
    assert_eq!(
        fs::read(a.path().join("model.json")).unwrap(),
        fs::read(b.path().join("model.json")).unwrap()
    );
}

#[test]
fn sweep_rows_are_sorted_and_valid() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = Command::Sweep {
        lambdas: vec![2.0, 0.0, 0.5],
        jobs: 2,
    };
    let rows = cmd_sweep(&spec(cmd, small_synthetic(), dir.path())).unwrap();
    assert_eq!(rows.iter().map(|r| r.lambda).collect::<Vec<_>>(), vec![0.0, 0.5, 2.0]);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "lambda,acc,dp,dp_bar,wdp,tvdp,ksdp,eo,mdp,transport_cost");
    assert_eq!(lines.len(), 4);
    for k in 0..3 {
        assert_valid(
            "sweep_row",
            &read_json(&dir.path().join(format!("reports/lambda_{k}.json"))),
        );
    }

    let single = tempfile::tempdir().unwrap();
    let one = Command::Sweep {
        lambdas: vec![1.0],
        jobs: 1,
    };
    assert_eq!(
        cmd_sweep(&spec(one, small_synthetic(), single.path())).unwrap().len(),
        1
    );
}

fn grid() -> DatasetSource {
    DatasetSource::Grid { per_group: 256 }
}

#[test]
fn audit_of_step_models() {
    let dir = tempfile::tempdir().unwrap();
    let audit = |checkpoint: &str, reference: Option<&str>| {
        let cmd = Command::Audit {
            checkpoint: checkpoint.into(),
            reference: reference.map(str::to_string),
        };
        let mut s = spec(cmd, grid(), dir.path());
        s.eval.match_batch_size = 128;
        cmd_audit(&s).unwrap()
    };
    let hat = audit("builtin:f_hat", Some("builtin:f_hat"));
    assert!((hat.transport_cost - 0.25).abs() < 0.02);
    assert_eq!(hat.consistency, 0.0);
    assert_eq!(hat.spearman, Some(1.0));
    assert_eq!(hat.flips.unwrap().undesirable_flips, 0);
    assert_valid("audit", &read_json(&dir.path().join("audit.json")));

    let tilde = audit("builtin:f_tilde", Some("builtin:f_hat"));
    assert!(tilde.transport_cost <= 0.02);
    assert_eq!(tilde.consistency, 1.0);
    assert_valid("audit", &read_json(&dir.path().join("audit.json")));
}

#[test]
fn fair_step_model_has_zero_subset_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = Command::Subsets {
        checkpoint: "builtin:f_tilde".into(),
        num_subsets: 50,
    };
    let out = cmd_subsets(&spec(cmd, grid(), dir.path())).unwrap();
    assert!(out.values.iter().filter_map(|(_, v)| *v).all(|v| v == 0.0));
    let csv = fs::read_to_string(dir.path().join("subsets.csv")).unwrap();
    assert_eq!(csv.lines().count(), 51);
    let summary = read_json(&dir.path().join("subsets_summary.json"));
    assert_valid("subsets_summary", &summary);
    assert_eq!(summary["std_label"], "0.0000");
}

#[test]
fn subsets_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cmd = || Command::Subsets {
        checkpoint: "builtin:f_hat".into(),
        num_subsets: 20,
    };
    cmd_subsets(&spec(cmd(), grid(), a.path())).unwrap();
    cmd_subsets(&spec(cmd(), grid(), b.path())).unwrap();
    for f in ["subsets.csv", "subsets_summary.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn binary_trains_into_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let status = Process::new(env!("CARGO_BIN_EXE_ftm"))
        .args(["train", "--dataset", "synthetic", "--n", "1000", "--dim", "2"])
        .args([
            "--epochs",
            "2",
            "--batch-size",
            "100",
            "--lambda",
            "1.0",
            "--alpha",
            "0",
        ])
        .args(["--audit-batch-size", "20", "--num-batches", "2"])
        .env("FTM_OUT_DIR", dir.path())
        .env("RUST_LOG", "warn")
        .status()
        .unwrap();
    assert!(status.success());
    assert_valid("report", &read_json(&dir.path().join("report.json")));
}

#[test]
fn binary_reports_errors_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = Process::new(env!("CARGO_BIN_EXE_ftm"))
        .args(["train", "--dataset", "missing.csv", "--schema", "adult"])
        .args(["--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let out = Process::new(env!("CARGO_BIN_EXE_ftm"))
        .args(["train", "--dataset", "data.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--schema"));
}
