use std::path::{Path, PathBuf};

use fibpred_core::evaluation::{evaluate, r_squared, rmse, spearman_rho, MetricSummary};
use fibpred_core::explain::{dependence_export, mean_abs_shap, tree_shap_batch, write_attributions_csv};
use fibpred_core::hyperopt::{tune_model, TuneFamily};
use fibpred_core::monitoring::classify_quality;
use fibpred_core::pipeline::{FittedModel, ModelFamily, ModelSpec};
use fibpred_core::preprocess::inv_log10p;
use fibpred_core::synth::{format_summary, generate, site_summaries, write_dataset};
use serde::Serialize;

use crate::config::{RunConfig, Target};
use crate::data::{build_table, load_table, read_matrix, write_targets, FEATURES_FILE, FEATURES_MANIFEST, TARGETS_FILE};
use crate::error::CliError;
use crate::output::{sha256_file, Clock, Out};

pub const SUMMARY_FILE: &str = "summary.txt";
pub const MODEL_FILE: &str = "model.json";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const EVAL_REPORT_FILE: &str = "eval_report.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const IMPORTANCE_FILE: &str = "importance.csv";
pub const ATTRIBUTIONS_FILE: &str = "attributions.csv";
pub const TUNE_RESULT_FILE: &str = "tune_result.json";
pub const HISTORY_FILE: &str = "fwa_history.csv";

fn io_other(e: impl std::error::Error + Send + Sync + 'static) -> std::io::Error {
    std::io::Error::other(e)
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let mut clock = Clock::start("synth");
    let out = Out::create(&cfg.out_dir())?;
    let data = generate(&cfg.synth)?;
    clock.lap("generate");
    write_dataset(out.dir(), &data)?;
    let summary = format_summary(&site_summaries(&data.samples));
    out.write_with(SUMMARY_FILE, |w| w.write_all(summary.as_bytes()))?;
    out.write_config(cfg)?;
    clock.lap("write");
    print!("{summary}");
    println!("{} samples written to {}", data.samples.len(), out.dir().display());
    clock.finish(&out, cfg)
}

pub fn features(cfg: &RunConfig) -> Result<(), CliError> {
    let mut clock = Clock::start("features");
    let (table, manifest) = build_table(cfg)?;
    clock.lap("build");
    let out = Out::create(&cfg.out_dir())?;
    out.write_with(FEATURES_FILE, |w| table.x.write_csv(w).map_err(io_other))?;
    out.write_with(TARGETS_FILE, |w| write_targets(w, &table.rows))?;
    out.write_json(FEATURES_MANIFEST, &manifest)?;
    out.write_config(cfg)?;
    clock.lap("write");
    println!("{} rows x {} features written to {}", table.x.n_rows(), table.x.n_cols(), out.dir().display());
    clock.finish(&out, cfg)
}

#[derive(Serialize)]
struct TrainReport<'a> {
    family: ModelFamily,
    target: Target,
    n_rows: usize,
    n_features: usize,
    seed: u64,
    config_hash: String,
    model_file: &'a str,
    model_sha256: String,
    training: MetricSummary,
    spec: &'a ModelSpec,
}

fn summary(y: &[f64], p: &[f64]) -> Result<MetricSummary, CliError> {
    Ok(MetricSummary { r2: r_squared(y, p).ok(), rmse: rmse(y, p)?, spearman: spearman_rho(y, p).ok() })
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let mut clock = Clock::start("train");
    let data = load_table(cfg)?.dataset(cfg.data.target)?;
    let spec = cfg.model.spec();
    spec.validate()?;
    clock.lap("load");
    let model = spec.fit(&data.x, &data.y, cfg.seed())?;
    clock.lap("fit");
    let out = Out::create(&cfg.out_dir())?;
    let model_path = out.write_with(MODEL_FILE, |w| writeln!(w, "{}", model.to_json()))?;
    let pred = model.predict(&data.x)?;
    let report = TrainReport {
        family: spec.family,
        target: cfg.data.target,
        n_rows: data.n_rows(),
        n_features: data.x.n_cols(),
        seed: cfg.seed(),
        config_hash: cfg.hash(),
        model_file: MODEL_FILE,
        model_sha256: sha256_file(&model_path)?,
        training: summary(&data.y, &pred)?,
        spec: &spec,
    };
    out.write_json(TRAIN_REPORT_FILE, &report)?;
    out.write_config(cfg)?;
    clock.lap("write");
    println!(
        "{} on {} rows: training R² {:.4}, RMSE {:.4}; model sha256 {}",
        spec.family.as_str(),
        report.n_rows,
        report.training.r2.unwrap_or(f64::NAN),
        report.training.rmse,
        report.model_sha256
    );
    clock.finish(&out, cfg)
}

fn fmt_metric(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.4} ± {s:.4}"),
        (Some(m), None) => format!("{m:.4}"),
        _ => "n/a".into(),
    }
}

pub fn eval(cfg: &RunConfig) -> Result<(), CliError> {
    let mut clock = Clock::start("eval");
    let data = load_table(cfg)?.dataset(cfg.data.target)?;
    let spec = cfg.model.spec();
    spec.validate()?;
    let split = cfg.eval.split(cfg.seed());
    clock.lap("load");
    let report = evaluate(&spec, &data, &split, cfg.seed())?;
    clock.lap("evaluate");
    let out = Out::create(&cfg.out_dir())?;
    out.write_with(EVAL_REPORT_FILE, |w| writeln!(w, "{}", report.to_json()))?;
    out.write_with(PREDICTIONS_FILE, |w| report.write_predictions_csv(w))?;
    out.write_config(cfg)?;
    clock.lap("write");
    let std = report.std.as_ref();
    println!(
        "{} {}: {} split(s), R² {}, RMSE {}, Spearman {}",
        spec.family.as_str(),
        serde_json::to_value(&report.split).ok().and_then(|v| v["protocol"].as_str().map(String::from)).unwrap_or_default(),
        report.folds.len(),
        fmt_metric(report.mean.r2, std.and_then(|s| s.r2)),
        fmt_metric(Some(report.mean.rmse), std.map(|s| s.rmse)),
        fmt_metric(report.mean.spearman, std.and_then(|s| s.spearman)),
    );
    clock.finish(&out, cfg)
}

pub fn load_model(path: &Path) -> Result<FittedModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    FittedModel::from_json(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub struct ExplainArgs {
    pub model: PathBuf,
    pub matrix: PathBuf,
    pub dependence: Option<String>,
    pub color: Option<String>,
}

pub fn explain(cfg: &RunConfig, args: &ExplainArgs) -> Result<(), CliError> {
    let mut clock = Clock::start("explain");
    let model = load_model(&args.model)?;
    let ens = model.tree_ensemble().ok_or_else(|| {
        CliError::input(format!("explain supports tree models only; {} holds a {} model", args.model.display(), model.family.as_str()))
    })?;
    let x = read_matrix(&args.matrix)?;
    if x.columns() != model.columns.as_slice() {
        return Err(CliError::input(format!("{}: columns do not match the model's training columns", args.matrix.display())));
    }
    let scaled = match &model.standardizer {
        Some(s) => s.apply(&x)?,
        None => x.clone(),
    };
    let attributions = tree_shap_batch(ens, &scaled)?;
    let ranking = mean_abs_shap(&attributions, x.columns())?;
    let dependence = match (&args.dependence, &args.color) {
        (Some(f), Some(c)) => Some(dependence_export(f, c, &x, &attributions)?),
        (Some(_), None) | (None, Some(_)) => return Err(CliError::input("--dependence and --color go together")),
        (None, None) => None,
    };
    clock.lap("shap");
    let out = Out::create(&cfg.out_dir())?;
    out.write_with(IMPORTANCE_FILE, |w| ranking.write_csv(w))?;
    out.write_with(ATTRIBUTIONS_FILE, |w| write_attributions_csv(w, x.columns(), &attributions))?;
    if let (Some(table), Some(f), Some(c)) = (&dependence, &args.dependence, &args.color) {
        out.write_with(&format!("dependence_{f}_{c}.csv"), |w| table.write_csv(w))?;
    }
    out.write_config(cfg)?;
    clock.lap("write");
    println!("{:>4}  {:<20}{:>14}{:>8}", "rank", "feature", "mean |SHAP|", "share");
    for (i, e) in ranking.entries.iter().take(10).enumerate() {
        println!("{:>4}  {:<20}{:>14.5}{:>7.1}%", i + 1, e.feature, e.mean_abs_shap, 100.0 * e.share);
    }
    clock.finish(&out, cfg)
}

pub struct PredictArgs {
    pub model: Option<PathBuf>,
    pub ec_model: Option<PathBuf>,
    pub ent_model: Option<PathBuf>,
    pub matrix: PathBuf,
}

pub fn predict(cfg: &RunConfig, args: &PredictArgs) -> Result<(), CliError> {
    let mut clock = Clock::start("predict");
    let x = read_matrix(&args.matrix)?;
    let run = |path: &Path| -> Result<Vec<f64>, CliError> {
        let model = load_model(path)?;
        model.predict(&x).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    };
    let out = Out::create(&cfg.out_dir())?;
    match (&args.model, &args.ec_model, &args.ent_model) {
        (Some(m), None, None) => {
            let p = run(m)?;
            clock.lap("predict");
            out.write_with(PREDICTIONS_FILE, |w| {
                writeln!(w, "row,log10p,count")?;
                p.iter().enumerate().try_for_each(|(i, v)| writeln!(w, "{i},{v},{}", inv_log10p(*v)))
            })?;
        }
        (None, Some(ec), Some(ent)) => {
            let (pe, pn) = (run(ec)?, run(ent)?);
            clock.lap("predict");
            let classes = pe
                .iter()
                .zip(&pn)
                .map(|(&a, &b)| {
                    let (a, b) = (inv_log10p(a), inv_log10p(b));
                    classify_quality(a.min(i64::MAX as u64) as i64, b.min(i64::MAX as u64) as i64).map(|q| (a, b, q))
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.write_with(PREDICTIONS_FILE, |w| {
                writeln!(w, "row,ec_log10p,ec,ent_log10p,ent,quality")?;
                for (i, (c, (a, b))) in classes.iter().zip(pe.iter().zip(&pn)).enumerate() {
                    writeln!(w, "{i},{a},{},{b},{},{}", c.0, c.1, c.2.as_str())?;
                }
                Ok(())
            })?;
        }
        _ => return Err(CliError::input("pass either --model, or both --ec-model and --ent-model")),
    }
    out.write_config(cfg)?;
    clock.lap("write");
    println!("{} predictions written to {}", x.n_rows(), out.path(PREDICTIONS_FILE).display());
    clock.finish(&out, cfg)
}

#[derive(Serialize)]
struct TuneSummary<'a> {
    family: TuneFamily,
    target: Target,
    seed: u64,
    config_hash: String,
    names: &'a [String],
    best_point: &'a [f64],
    best_cv_rmse: f64,
    evaluations: usize,
    best_spec: &'a ModelSpec,
}

pub fn tune(cfg: &RunConfig) -> Result<(), CliError> {
    let mut clock = Clock::start("tune");
    let space = cfg.tune.space()?;
    let fwa = cfg.tune.fwa(cfg.seed());
    fwa.validate()?;
    let data = load_table(cfg)?.dataset(cfg.data.target)?;
    clock.lap("load");
    let result = tune_model(cfg.tune.family, &data.x, &data.y, &space, &cfg.tune.base(&cfg.model), &fwa)?;
    clock.lap("search");
    let out = Out::create(&cfg.out_dir())?;
    let summary = TuneSummary {
        family: result.family,
        target: cfg.data.target,
        seed: cfg.seed(),
        config_hash: cfg.hash(),
        names: &result.names,
        best_point: &result.best_point,
        best_cv_rmse: result.best_cv_rmse,
        evaluations: result.fwa.history.len(),
        best_spec: &result.best_spec,
    };
    out.write_json(TUNE_RESULT_FILE, &summary)?;
    out.write_with(HISTORY_FILE, |w| result.fwa.write_history_csv(w, &space))?;
    out.write_config(cfg)?;
    clock.lap("write");
    let best: Vec<String> = result.names.iter().zip(&result.best_point).map(|(n, v)| format!("{n}={v:.4}")).collect();
    println!("best after {} evaluations: {} (CV RMSE {:.4})", summary.evaluations, best.join(", "), result.best_cv_rmse);
    clock.finish(&out, cfg)
}
