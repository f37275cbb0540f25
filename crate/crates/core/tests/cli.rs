use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "\
[dataset]
kind = synthetic
preset = set-b
num_users = 200
num_items = 12
biased_impressions = 1200
randomized_impressions = 1000
seed = 3

[run]
models = mf-biased, ips, dr, autodebias
repeats = 2
base_seed = 7
split = 0.2, 0.2, 0.6

[model:*]
latent_dim = 4
max_epochs = 3
all_pairs_sample_rate = 0.2
";

fn debias(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_debias")).args(args).output().unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("tiny.cfg");
    fs::write(&path, CONFIG).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn help_lists_subcommands() {
    let out = debias(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["ingest", "train", "evaluate", "bench", "report"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn unknown_subcommand_prints_usage_and_fails() {
    let out = debias(&["frobnicate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = debias(&["bench", "--no-such-flag"]);
    assert!(!out.status.success());
}

#[test]
fn bench_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let run = debias(&["bench", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    }
    let results_a = fs::read(a.join("results.csv")).unwrap();
    assert_eq!(results_a, fs::read(b.join("results.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("runs.csv")).unwrap(),
        fs::read(b.join("runs.csv")).unwrap()
    );
    let text = String::from_utf8(results_a).unwrap();
    assert!(text.starts_with("dataset,model,metric,mean,ci95,improvement_pct\n"));
    let md = fs::read_to_string(a.join("report.md")).unwrap();
    assert!(md.contains("| AutoDebias"));

    // report re-aggregates the stored runs to the same CSV
    let re = dir.path().join("re");
    let run = debias(&[
        "report",
        "--input",
        a.to_str().unwrap(),
        "--out",
        re.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(fs::read_to_string(re.join("results.csv")).unwrap(), text);
}

#[test]
fn train_then_evaluate_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let ckpt = dir.path().join("ips.ckpt");
    let run = debias(&[
        "train",
        "--config",
        &cfg,
        "--model",
        "ips",
        "--out",
        ckpt.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let run = debias(&["evaluate", "--config", &cfg, "--checkpoint", ckpt.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text.starts_with("model,metric,value\n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn dr_without_randomized_data_fails_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("dr.ckpt");
    let run = debias(&[
        "train",
        "--dataset",
        "synthetic",
        "--preset",
        "set-a",
        "--model",
        "dr",
        "--out",
        ckpt.to_str().unwrap(),
    ]);
    assert!(!run.status.success());
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("requires randomized data"), "{err}");
    assert!(!ckpt.exists());
}

#[test]
fn evaluate_with_missing_checkpoint_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("metrics.csv");
    let run = debias(&[
        "evaluate",
        "--config",
        &cfg,
        "--checkpoint",
        dir.path().join("absent.ckpt").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!run.status.success());
    assert!(run.stdout.is_empty());
    assert!(String::from_utf8_lossy(&run.stderr).starts_with("error:"));
    assert!(!out.exists());
}

#[test]
fn ingest_writes_canonical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("data");
    let run = debias(&["ingest", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let biased = fs::read_to_string(out.join("biased.csv")).unwrap();
    assert!(biased.starts_with("user,item,rating,source\n"));
    assert_eq!(biased.lines().count(), 1201);
    assert!(out.join("randomized.csv").exists() && out.join("ground_truth.csv").exists());
}
