use std::path::Path;
use std::process::{Command, Output};

fn moonshape(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moonshape")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const SMALL_GRID: &str = "[grid]\nlearning_rates = 0.0003, 0.003\nbatch_sizes = 32\nsnapshot_epochs = 1, 3, 10\nseeds = 0, 1\n";

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("exp.cfg");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&moonshape(&["--help"])), 0);
    assert_eq!(code(&moonshape(&["--version"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&moonshape(&["sweep", "--bogus"])), 1);
    assert_eq!(code(&moonshape(&["theory", "--format", "xml"])), 1);
    assert_eq!(code(&moonshape(&[])), 1);
}

#[test]
fn malformed_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[shift]\nn_train = lots\n");
    let out = moonshape(&["gen-data", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn invalid_spec_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[shift]\nd_core = 0\n");
    let out = moonshape(&["gen-data", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn diverging_grid_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[shift]\nsigma_core = 1e150\n[grid]\nlearning_rates = 1e10\nbatch_sizes = full\nsnapshot_epochs = 5\nseeds = 0\n",
    );
    let out = moonshape(&["sweep", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn pipelines_require_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = moonshape(&["sweep", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
    let missing = moonshape(&["sweep", "--config", "/no/such/file.cfg"]);
    assert_eq!(code(&missing), 1);
}

#[test]
fn theory_runs_without_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = moonshape(&["theory", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("roc.csv").exists());
}

#[test]
fn analyze_without_results_exits_five() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_GRID);
    let out = moonshape(&["analyze", "--config", &cfg, "--out", dir.path().join("empty").to_str().unwrap()]);
    assert_eq!(code(&out), 5);
    assert!(String::from_utf8_lossy(&out.stderr).contains("results.csv"));
}

#[test]
fn degenerate_results_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[shift]\nsigma_core = 0.5\n[grid]\nlearning_rates = 0.01\nbatch_sizes = 16\nsnapshot_epochs = 50, 60\nseeds = 0, 1\n",
    );
    let out_dir = dir.path().to_str().unwrap();
    let sweep = moonshape(&["sweep", "--config", &cfg, "--out", out_dir]);
    assert_eq!(code(&sweep), 0);
    assert!(String::from_utf8_lossy(&sweep.stderr).contains("no curve report"));
    assert_eq!(code(&moonshape(&["analyze", "--config", &cfg, "--out", out_dir])), 4);
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_GRID);
    let out_dir = dir.path().join("run");
    let o = out_dir.to_str().unwrap();
    for args in [
        vec!["gen-data"],
        vec!["sweep", "--jobs", "2"],
        vec!["analyze", "--format", "json"],
        vec!["agreement", "--pairs", "30"],
        vec!["plot"],
        vec!["theory", "--format", "json"],
    ] {
        let mut full = args.clone();
        full.extend(["--config", &cfg, "--out", o]);
        let out = moonshape(&full);
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for f in [
        "train.csv",
        "id_test.csv",
        "ood_test.csv",
        "spec.txt",
        "models.csv",
        "weights.csv",
        "results.csv",
        "preds.csv",
        "report.json",
        "moon.svg",
        "agreement.csv",
        "agreement.json",
        "agreement.svg",
        "roc.json",
        "theory.json",
    ] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let analyze = moonshape(&["analyze", "--format", "json", "--config", &cfg, "--out", o]);
    let v: serde_json::Value = serde_json::from_slice(&analyze.stdout).unwrap();
    assert_eq!(v["points"], "12");
}

#[test]
fn series_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_GRID);
    let o = dir.path().join("series");
    let out = moonshape(&["series", "--knob", "sdr", "--values", "0.1,0.3", "--config", &cfg, "--out", o.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(o.join("sdr_0.1/results.csv").exists() && o.join("sdr_0.3/results.csv").exists());
    assert!(o.join("series.json").exists());
    let bad = moonshape(&["series", "--knob", "sdr", "--values", "0.3,0.1", "--config", &cfg, "--out", o.to_str().unwrap()]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn seed_flag_changes_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_GRID);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&moonshape(&["gen-data", "--config", &cfg, "--seed", "1", "--out", a.to_str().unwrap()])), 0);
    assert_eq!(code(&moonshape(&["gen-data", "--config", &cfg, "--seed", "2", "--out", b.to_str().unwrap()])), 0);
    assert_ne!(std::fs::read(a.join("train.csv")).unwrap(), std::fs::read(b.join("train.csv")).unwrap());
}

#[test]
fn shipped_default_config_matches_the_built_in_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.cfg");
    let cfg = moonshape::harness::ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.with_out("out"), moonshape::harness::ExperimentConfig::default());
}

#[test]
fn shipped_configs_all_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = moonshape::harness::ExperimentConfig::load(&path).unwrap();
        cfg.resolved_shift().unwrap().validate().unwrap();
        n += 1;
    }
    assert!(n >= 4);
}
