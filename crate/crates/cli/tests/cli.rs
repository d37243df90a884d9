use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_fibpred");

const SMALL: &str = r#"
seed = 11
[synth]
n_sites = 3
seasons = [2019, 2020]
late_starts = {}
[model.tree]
n_estimators = 30
[tune]
budget = 6
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str], code: i32) -> String {
    let out = run(dir, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
    String::from_utf8(out.stderr).unwrap()
}

/// Temp dir holding `run.toml`, a synthetic dataset in `syn/` and its features in `feat/`.
fn fixture(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), config).unwrap();
    ok(dir.path(), &["--config", "run.toml", "--out", "syn", "synth"]);
    ok(dir.path(), &["--config", "run.toml", "--out", "feat", "features", "--samples", "syn/samples.csv", "--env", "syn/env"]);
    dir
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn synth_default_feeds_features() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let stdout = ok(d, &["--out", "a", "synth"]);
    assert!(stdout.contains("S14"));
    assert!(stdout.contains("1670 samples"));
    ok(d, &["--out", "f", "features", "--samples", "a/samples.csv", "--env", "a/env"]);
    let header = read(d.join("f/features.csv")).lines().next().unwrap().to_string();
    assert_eq!(header.split(',').count(), 31);
    assert!(header.starts_with("air_temp,salinity,sea_temp"));
}

#[test]
fn synth_rerun_is_identical() {
    let dir = fixture(SMALL);
    let d = dir.path();
    ok(d, &["--config", "run.toml", "--out", "syn2", "synth"]);
    for f in ["samples.csv", "truth.json", "summary.txt", "env/ghi.csv", "config.resolved.json"] {
        assert_eq!(read(d.join("syn").join(f)), read(d.join("syn2").join(f)), "{f}");
    }
    ok(d, &["--config", "run.toml", "--seed", "12", "--out", "syn3", "synth"]);
    assert_ne!(read(d.join("syn/samples.csv")), read(d.join("syn3/samples.csv")));
}

#[test]
fn single_site_cluster_refuses_spatial_holdout() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.toml"), "[synth]\nn_sites = 1\nseasons = [2020]\nlate_starts = {}\n[eval]\nprotocol = \"spatial\"\nholdout_site = \"S01\"\n").unwrap();
    ok(d, &["--config", "run.toml", "--out", "syn", "synth"]);
    let err = fails(d, &["--config", "run.toml", "eval", "--samples", "syn/samples.csv", "--env", "syn/env"], 2);
    assert!(err.contains("S01"), "{err}");
}

#[test]
fn features_reject_gaps_and_empty_samples() {
    let dir = fixture(SMALL);
    let d = dir.path();
    let ghi = read(d.join("syn/env/ghi.csv"));
    let lines: Vec<&str> = ghi.lines().collect();
    let gapped: Vec<&str> = lines[..100].iter().chain(&lines[110..]).copied().collect();
    std::fs::write(d.join("syn/env/ghi.csv"), gapped.join("\n")).unwrap();
    let err = fails(d, &["--out", "x", "features", "--samples", "syn/samples.csv", "--env", "syn/env"], 2);
    assert!(err.contains("gap between"), "{err}");
    let from = lines[99].split(',').next().unwrap();
    assert!(err.contains(&from[..13]), "{err}");

    std::fs::write(d.join("empty.csv"), "site,timestamp,ec,ent,air_temp,sea_temp,salinity\n").unwrap();
    let err = fails(d, &["--out", "x", "features", "--samples", "empty.csv", "--env", "syn/env"], 2);
    assert!(err.contains("no samples"), "{err}");
    fails(d, &["--out", "x", "features", "--samples", "missing.csv", "--env", "syn/env"], 2);
}

#[test]
fn train_writes_a_loadable_deterministic_model() {
    let dir = fixture(SMALL);
    let d = dir.path();
    ok(d, &["--config", "run.toml", "--out", "m1", "train", "--features", "feat"]);
    ok(d, &["--config", "run.toml", "--out", "m2", "train", "--features", "feat"]);
    assert_eq!(read(d.join("m1/model.json")), read(d.join("m2/model.json")));
    let report: serde_json::Value = serde_json::from_str(&read(d.join("m1/train_report.json"))).unwrap();
    assert_eq!(report["seed"], 11);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(report["model_sha256"].as_str().unwrap().len(), 64);
    let meta: serde_json::Value = serde_json::from_str(&read(d.join("m1/run_meta.json"))).unwrap();
    assert!(meta["phases_ms"]["fit"].as_f64().is_some());

    ok(d, &["--out", "p", "predict", "--model", "m1/model.json", "--matrix", "feat/features.csv"]);
    let preds = read(d.join("p/predictions.csv"));
    assert_eq!(preds.lines().next().unwrap(), "row,log10p,count");
    assert_eq!(preds.lines().count(), 61);
    assert!(preds.lines().skip(1).all(|l| l.split(',').nth(2).unwrap().parse::<u64>().is_ok()));
}

#[test]
fn svr_without_scaling_is_refused() {
    let dir = fixture(&format!("{SMALL}\n[model]\nfamily = \"svr\"\nstandardize = false\n"));
    let err = fails(dir.path(), &["--config", "run.toml", "train", "--features", "feat"], 2);
    assert!(err.contains("standardize"), "{err}");
}

#[test]
fn eval_reports_and_bad_splits() {
    let dir = fixture(SMALL);
    let d = dir.path();
    let stdout = ok(d, &["--config", "run.toml", "--out", "e", "eval", "--features", "feat"]);
    assert!(stdout.contains("10 split(s)"), "{stdout}");
    let report: serde_json::Value = serde_json::from_str(&read(d.join("e/eval_report.json"))).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 10);
    assert!(report["std"]["rmse"].is_number());
    let undefined = report["folds"].as_array().unwrap().iter().any(|f| f["r2"].is_null());
    assert_eq!(report["mean"]["r2"].is_null(), undefined);
    assert_eq!(report["std"]["r2"].is_null(), undefined);

    std::fs::write(d.join("spatial.toml"), format!("{SMALL}\n[eval]\nprotocol = \"spatial\"\nholdout_site = \"S99\"\n")).unwrap();
    let err = fails(d, &["--config", "spatial.toml", "eval", "--features", "feat"], 2);
    assert!(err.contains("S99"), "{err}");

    let temporal = format!("{SMALL}\n[eval]\nprotocol = \"temporal\"\ncutoff_year = 2015\ntest_sites = [\"S01\"]\ntest_year = 2019\n");
    std::fs::write(d.join("temporal.toml"), temporal).unwrap();
    fails(d, &["--config", "temporal.toml", "eval", "--features", "feat"], 2);

    let good = format!("{SMALL}\n[eval]\nprotocol = \"temporal\"\ncutoff_year = 2020\ntest_sites = [\"S01\", \"S02\"]\ntest_year = 2020\n");
    std::fs::write(d.join("good.toml"), good).unwrap();
    ok(d, &["--config", "good.toml", "--out", "t", "eval", "--features", "feat"]);
    let preds = read(d.join("t/predictions.csv"));
    let rows: Vec<Vec<&str>> = preds.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 20);
    let sites: Vec<&str> = rows.iter().map(|r| r[2]).collect();
    assert!(sites[..10].iter().all(|s| *s == "S01") && sites[10..].iter().all(|s| *s == "S02"), "{sites:?}");
    for block in rows.chunks(10) {
        assert!(block.windows(2).all(|w| w[0][3] < w[1][3]));
    }
}

#[test]
fn explain_ranks_tree_models_only() {
    let dir = fixture(SMALL);
    let d = dir.path();
    ok(d, &["--config", "run.toml", "--out", "m", "train", "--features", "feat"]);
    let stdout = ok(d, &["--out", "x", "explain", "--model", "m/model.json", "--matrix", "feat/features.csv", "--dependence", "salinity", "--color", "ghi_lag1"]);
    assert!(stdout.contains("salinity"));
    assert_eq!(read(d.join("x/importance.csv")).lines().count(), 32);
    let dep = read(d.join("x/dependence_salinity_ghi_lag1.csv"));
    assert_eq!(dep.lines().next().unwrap(), "salinity,shap_salinity,ghi_lag1");
    assert!(dep.lines().skip(1).all(|l| l.split(',').count() == 3));

    ok(d, &["--config", "run.toml", "--out", "s", "train", "--features", "feat", "--family", "svr"]);
    let err = fails(d, &["explain", "--model", "s/model.json", "--matrix", "feat/features.csv"], 2);
    assert!(err.contains("tree models only"), "{err}");

    let header = read(d.join("feat/features.csv")).lines().next().unwrap().to_string();
    std::fs::write(d.join("empty.csv"), format!("{header}\n")).unwrap();
    fails(d, &["explain", "--model", "m/model.json", "--matrix", "empty.csv"], 2);
}

#[test]
fn paired_prediction_classifies_zero_counts_excellent() {
    let dir = fixture(SMALL);
    let d = dir.path();
    let targets = read(d.join("feat/targets.csv"));
    let zeroed: Vec<String> = targets
        .lines()
        .enumerate()
        .map(|(i, l)| if i == 0 { l.to_string() } else { l.split(',').take(2).chain(["0", "0"]).collect::<Vec<_>>().join(",") })
        .collect();
    std::fs::write(d.join("feat/targets.csv"), zeroed.join("\n")).unwrap();
    ok(d, &["--out", "ec", "train", "--features", "feat", "--family", "mean"]);
    ok(d, &["--out", "ent", "train", "--features", "feat", "--family", "mean", "--target", "ent"]);
    ok(d, &["--out", "p", "predict", "--ec-model", "ec/model.json", "--ent-model", "ent/model.json", "--matrix", "feat/features.csv"]);
    let preds = read(d.join("p/predictions.csv"));
    assert_eq!(preds.lines().next().unwrap(), "row,ec_log10p,ec,ent_log10p,ent,quality");
    assert!(preds.lines().skip(1).all(|l| l.ends_with(",0,0,excellent")), "{preds}");
    fails(d, &["predict", "--ec-model", "ec/model.json", "--matrix", "feat/features.csv"], 2);
}

#[test]
fn tune_emits_history_and_validates_budget() {
    let dir = fixture(SMALL);
    let d = dir.path();
    ok(d, &["--config", "run.toml", "--out", "t", "tune", "--features", "feat"]);
    let history = read(d.join("t/fwa_history.csv"));
    assert_eq!(history.lines().next().unwrap(), "evaluation,epsilon,c,value,best_so_far");
    assert_eq!(history.lines().count(), 7);
    let result: serde_json::Value = serde_json::from_str(&read(d.join("t/tune_result.json"))).unwrap();
    assert_eq!(result["evaluations"], 6);

    fails(d, &["--config", "run.toml", "tune", "--features", "feat", "--budget", "0"], 2);

    let collapsed = format!(
        "{SMALL}\n[[tune.space]]\nname = \"epsilon\"\nlower = 0.3\nupper = 0.3\n[[tune.space]]\nname = \"c\"\nlower = 5.0\nupper = 5.0\n"
    );
    std::fs::write(d.join("collapsed.toml"), collapsed).unwrap();
    ok(d, &["--config", "collapsed.toml", "--out", "c", "tune", "--features", "feat"]);
    let result: serde_json::Value = serde_json::from_str(&read(d.join("c/tune_result.json"))).unwrap();
    assert_eq!(result["best_point"], serde_json::json!([0.3, 5.0]));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "[model]\nfamilly = \"rf\"\n").unwrap();
    let err = fails(d, &["--config", "bad.toml", "synth"], 2);
    assert!(err.contains("familly"), "{err}");
    fails(d, &["--config", "nope.toml", "synth"], 2);
    fails(d, &["--threads", "0", "synth"], 2);
    fails(d, &["train", "--family", "gbm"], 2);
    fails(d, &["train"], 2);
}
