//! Regression metrics and the shuffled k-fold, leave-site-out and
//! before-year evaluation protocols.

use std::collections::BTreeSet;
use std::io::Write;

use chrono::{DateTime, Datelike, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::FeatureMatrix;
use crate::pipeline::{LeakageGuard, ModelSpec, PipelineError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Domain(String),
    #[error("split error: {0}")]
    Split(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<(), EvalError> {
    if a.is_empty() {
        return Err(EvalError::Domain("metric needs at least one value".into()));
    }
    if a.len() != b.len() {
        return Err(EvalError::Domain(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

/// `1 − SSE/SST` with SST about the mean of `y_true`.
pub fn r_squared(y_true: &[f64], y_pred: &[f64]) -> Result<f64, EvalError> {
    check_pair(y_true, y_pred)?;
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let sst: f64 = y_true.iter().map(|y| (y - mean) * (y - mean)).sum();
    if sst == 0.0 {
        return Err(EvalError::Domain("R² is undefined for a constant target".into()));
    }
    let sse: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p) * (y - p)).sum();
    let r2 = 1.0 - sse / sst;
    // keep any nonzero error strictly below a perfect score
    Ok(if sse > 0.0 { r2.min(1.0 - f64::EPSILON / 2.0) } else { r2 })
}

pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64, EvalError> {
    check_pair(y_true, y_pred)?;
    let sse: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p) * (y - p)).sum();
    Ok((sse / y_true.len() as f64).sqrt())
}

/// 1-based ranks, ties sharing the mean of their span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(EvalError::Domain("correlation is undefined for a constant vector".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation of average ranks.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    check_pair(a, b)?;
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Rows with their site labels and sampling times.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: FeatureMatrix,
    pub y: Vec<f64>,
    pub sites: Vec<String>,
    pub timestamps: Vec<DateTime<Utc>>,
}

impl Dataset {
    pub fn new(x: FeatureMatrix, y: Vec<f64>, sites: Vec<String>, timestamps: Vec<DateTime<Utc>>) -> Result<Self, EvalError> {
        let n = x.n_rows();
        if y.len() != n || sites.len() != n || timestamps.len() != n {
            return Err(EvalError::Domain(format!(
                "dataset columns disagree: {n} rows, {} targets, {} sites, {} timestamps",
                y.len(),
                sites.len(),
                timestamps.len()
            )));
        }
        Ok(Self { x, y, sites, timestamps })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn site_names(&self) -> BTreeSet<&str> {
        self.sites.iter().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitSpec {
    Kfold { k: usize, seed: u64 },
    Spatial { holdout_site: String },
    Temporal { cutoff_year: i32, test_sites: Vec<String>, test_year: i32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub r2: Option<f64>,
    pub rmse: f64,
    pub spearman: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub r2: Option<f64>,
    pub rmse: f64,
    pub spearman: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    /// Metrics per fold, then averaged.
    PerFold,
    /// Single-row folds: all out-of-fold predictions scored together.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub row: usize,
    pub fold: usize,
    pub site: String,
    pub timestamp: DateTime<Utc>,
    pub y_true: f64,
    pub y_pred: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: SplitSpec,
    pub model: String,
    pub scoring: Scoring,
    pub folds: Vec<FoldMetrics>,
    pub mean: MetricSummary,
    /// Across-fold population standard deviation; absent for single splits.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub std: Option<MetricSummary>,
    /// Metrics over all out-of-fold predictions at once.
    pub pooled: MetricSummary,
    /// Fold of every input row; `None` for rows used only in training.
    pub fold_of_row: Vec<Option<usize>>,
    pub predictions: Vec<PredictionRow>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_predictions_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "row,fold,site,timestamp,y_true,y_pred")?;
        for p in &self.predictions {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                p.row,
                p.fold,
                p.site,
                p.timestamp.format("%Y-%m-%dT%H:%M:%SZ"),
                p.y_true,
                p.y_pred
            )?;
        }
        Ok(())
    }
}

fn score(y: &[f64], p: &[f64]) -> Result<MetricSummary, EvalError> {
    Ok(MetricSummary { r2: r_squared(y, p).ok(), rmse: rmse(y, p)?, spearman: spearman_rho(y, p).ok() })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let v = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

fn summarize(folds: &[FoldMetrics]) -> (MetricSummary, MetricSummary) {
    let pick = |f: fn(&FoldMetrics) -> Option<f64>| {
        let v: Vec<f64> = folds.iter().filter_map(f).collect();
        if v.len() == folds.len() && !v.is_empty() {
            let (m, s) = mean_std(&v);
            (Some(m), Some(s))
        } else {
            (None, None)
        }
    };
    let (r2m, r2s) = pick(|f| f.r2);
    let (spm, sps) = pick(|f| f.spearman);
    let (rm, rs) = mean_std(&folds.iter().map(|f| f.rmse).collect::<Vec<_>>());
    (MetricSummary { r2: r2m, rmse: rm, spearman: spm }, MetricSummary { r2: r2s, rmse: rs, spearman: sps })
}

/// Rows shuffled once by `seed`, then cut into `k` contiguous folds whose sizes differ by at most one.
pub fn kfold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    if k < 2 {
        return Err(EvalError::Split(format!("k must be at least 2, got {k}")));
    }
    if n < k {
        return Err(EvalError::Split(format!("{n} rows cannot fill {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut fold = vec![0; n];
    let mut at = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &r in &order[at..at + size] {
            fold[r] = f;
        }
        at += size;
    }
    Ok(fold)
}

struct SplitOutcome {
    train: usize,
    test: Vec<usize>,
    pred: Vec<f64>,
}

fn run_split(spec: &ModelSpec, data: &Dataset, train: &[usize], test: &[usize], seed: u64) -> Result<SplitOutcome, EvalError> {
    let guard = LeakageGuard::new(test.iter().copied());
    let model = spec.fit_rows(&data.x, &data.y, train, &guard, seed)?;
    let xt = data.x.select_rows(test).map_err(PipelineError::from)?;
    let pred = model.predict(&xt)?;
    Ok(SplitOutcome { train: train.len(), test: test.to_vec(), pred })
}

fn assemble(
    split: SplitSpec,
    spec: &ModelSpec,
    data: &Dataset,
    outcomes: Vec<SplitOutcome>,
    fold_of_row: Vec<Option<usize>>,
    single: bool,
) -> Result<EvalReport, EvalError> {
    let mut folds = Vec::with_capacity(outcomes.len());
    let mut predictions = Vec::new();
    let (mut all_y, mut all_p) = (Vec::new(), Vec::new());
    for (f, o) in outcomes.iter().enumerate() {
        let y: Vec<f64> = o.test.iter().map(|&r| data.y[r]).collect();
        let s = score(&y, &o.pred)?;
        folds.push(FoldMetrics { fold: f, n_train: o.train, n_test: o.test.len(), r2: s.r2, rmse: s.rmse, spearman: s.spearman });
        for (&r, &p) in o.test.iter().zip(&o.pred) {
            predictions.push(PredictionRow {
                row: r,
                fold: f,
                site: data.sites[r].clone(),
                timestamp: data.timestamps[r],
                y_true: data.y[r],
                y_pred: p,
            });
        }
        all_y.extend(y);
        all_p.extend_from_slice(&o.pred);
    }
    let pooled = score(&all_y, &all_p)?;
    let degenerate = outcomes.iter().all(|o| o.test.len() < 2);
    let (scoring, mean, std) = if degenerate {
        (Scoring::Pooled, pooled, None)
    } else {
        let (m, s) = summarize(&folds);
        (Scoring::PerFold, m, if single { None } else { Some(s) })
    };
    Ok(EvalReport {
        split,
        model: spec.family.as_str().to_string(),
        scoring,
        folds,
        mean,
        std,
        pooled,
        fold_of_row,
        predictions,
    })
}

pub fn kfold_cv(spec: &ModelSpec, data: &Dataset, k: usize, seed: u64) -> Result<EvalReport, EvalError> {
    let assignment = kfold_assignment(data.n_rows(), k, seed)?;
    let outcomes = (0..k)
        .into_par_iter()
        .map(|f| {
            let test: Vec<usize> = (0..data.n_rows()).filter(|&r| assignment[r] == f).collect();
            let train: Vec<usize> = (0..data.n_rows()).filter(|&r| assignment[r] != f).collect();
            run_split(spec, data, &train, &test, seed)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let fold_of_row = assignment.into_iter().map(Some).collect();
    assemble(SplitSpec::Kfold { k, seed }, spec, data, outcomes, fold_of_row, false)
}

fn chronological(data: &Dataset, rows: &mut [usize]) {
    rows.sort_by_key(|&r| (data.timestamps[r], r));
}

/// Train on every other site, test on `holdout_site`.
pub fn spatial_holdout(spec: &ModelSpec, data: &Dataset, holdout_site: &str, seed: u64) -> Result<EvalReport, EvalError> {
    let mut test: Vec<usize> = (0..data.n_rows()).filter(|&r| data.sites[r] == holdout_site).collect();
    if test.is_empty() {
        return Err(EvalError::Split(format!("site `{holdout_site}` has no rows")));
    }
    let train: Vec<usize> = (0..data.n_rows()).filter(|&r| data.sites[r] != holdout_site).collect();
    if train.is_empty() {
        return Err(EvalError::Split(format!("no training rows remain after holding out `{holdout_site}`")));
    }
    chronological(data, &mut test);
    let mut fold_of_row = vec![None; data.n_rows()];
    test.iter().for_each(|&r| fold_of_row[r] = Some(0));
    let outcome = run_split(spec, data, &train, &test, seed)?;
    let split = SplitSpec::Spatial { holdout_site: holdout_site.to_string() };
    assemble(split, spec, data, vec![outcome], fold_of_row, true)
}

/// Train on years before `cutoff_year`, test on `test_sites` in `test_year`.
/// Test rows are grouped by site in the given order and sorted by time within a site.
pub fn temporal_holdout(
    spec: &ModelSpec,
    data: &Dataset,
    cutoff_year: i32,
    test_sites: &[String],
    test_year: i32,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    if !data.timestamps.iter().any(|t| t.year() == test_year) {
        return Err(EvalError::Split(format!("no rows from test year {test_year}")));
    }
    if test_year < cutoff_year {
        return Err(EvalError::Split(format!("test year {test_year} precedes cutoff {cutoff_year}")));
    }
    if test_sites.is_empty() {
        return Err(EvalError::Split("no test sites given".into()));
    }
    let known = data.site_names();
    if let Some(s) = test_sites.iter().find(|s| !known.contains(s.as_str())) {
        return Err(EvalError::Split(format!("unknown test site `{s}`")));
    }
    let train: Vec<usize> = (0..data.n_rows()).filter(|&r| data.timestamps[r].year() < cutoff_year).collect();
    if train.is_empty() {
        return Err(EvalError::Split(format!("no training rows before {cutoff_year}")));
    }
    let trained: BTreeSet<&str> = train.iter().map(|&r| data.sites[r].as_str()).collect();
    for s in known.difference(&trained) {
        log::info!("site {s} has no data before {cutoff_year}; excluded from training");
    }
    let mut test = Vec::new();
    for site in test_sites {
        let mut rows: Vec<usize> =
            (0..data.n_rows()).filter(|&r| &data.sites[r] == site && data.timestamps[r].year() == test_year).collect();
        if rows.is_empty() {
            return Err(EvalError::Split(format!("site `{site}` has no rows in {test_year}")));
        }
        chronological(data, &mut rows);
        test.extend(rows);
    }
    let mut fold_of_row = vec![None; data.n_rows()];
    test.iter().for_each(|&r| fold_of_row[r] = Some(0));
    let outcome = run_split(spec, data, &train, &test, seed)?;
    let split = SplitSpec::Temporal { cutoff_year, test_sites: test_sites.to_vec(), test_year };
    assemble(split, spec, data, vec![outcome], fold_of_row, true)
}

pub fn evaluate(spec: &ModelSpec, data: &Dataset, split: &SplitSpec, seed: u64) -> Result<EvalReport, EvalError> {
    match split {
        SplitSpec::Kfold { k, seed } => kfold_cv(spec, data, *k, *seed),
        SplitSpec::Spatial { holdout_site } => spatial_holdout(spec, data, holdout_site, seed),
        SplitSpec::Temporal { cutoff_year, test_sites, test_year } => {
            temporal_holdout(spec, data, *cutoff_year, test_sites, *test_year, seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::ModelFamily;
    use chrono::TimeZone;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn r_squared_examples() {
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 0.5);
        assert!(r_squared(&[2.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(r_squared(&[], &[]).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 5.0], &[1.0, 5.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 5.0, -2.0], &[3.5, 7.5, 0.5]).unwrap(), 2.5);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman_rho(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman_rho(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        // ranks (1, 2.5, 2.5, 4) and (1, 3, 2, 4): Σd·d' = 4.5, Σd² = 4.5, Σd'² = 5
        let expected = 4.5 / (4.5f64 * 5.0).sqrt();
        assert!((spearman_rho(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - expected).abs() < 1e-12);
        assert!(spearman_rho(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0, 3.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    fn dataset(n: usize, sites: &[&str]) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
        let y = rows.iter().map(|r| 2.0 * r[0] + rng.random_range(-0.1..0.1)).collect();
        let s = (0..n).map(|i| sites[i % sites.len()].to_string()).collect();
        let t = (0..n).map(|i| Utc.with_ymd_and_hms(2015 + (i % 4) as i32, 6, 1 + (i % 28) as u32, 10, 0, 0).unwrap()).collect();
        Dataset::new(FeatureMatrix::new(vec!["a".into(), "b".into()], rows).unwrap(), y, s, t).unwrap()
    }

    #[test]
    fn folds_partition_rows() {
        for (n, k) in [(10, 3), (12, 12), (1670, 10), (7, 2)] {
            let a = kfold_assignment(n, k, 5).unwrap();
            let mut sizes = vec![0usize; k];
            a.iter().for_each(|&f| sizes[f] += 1);
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            assert_eq!(sizes.iter().sum::<usize>(), n);
            assert_eq!(a, kfold_assignment(n, k, 5).unwrap());
        }
        assert!(kfold_assignment(3, 1, 0).is_err());
        assert!(kfold_assignment(3, 4, 0).is_err());
    }

    #[test]
    fn mean_predictor_cannot_beat_zero() {
        let d = dataset(50, &["A", "B"]);
        let r = kfold_cv(&ModelSpec::preset(ModelFamily::Mean), &d, 10, 1).unwrap();
        assert!(r.mean.r2.unwrap() <= 0.0);
        assert_eq!(r.folds.len(), 10);
        assert!(r.std.is_some());
    }

    #[test]
    fn leave_one_out_scores_pooled() {
        let d = dataset(12, &["A"]);
        let r = kfold_cv(&ModelSpec::preset(ModelFamily::Mean), &d, 12, 3).unwrap();
        assert_eq!(r.scoring, Scoring::Pooled);
        assert!(r.folds.iter().all(|f| f.n_test == 1 && f.r2.is_none()));
        assert!(r.mean.r2.is_some());
        assert!(r.mean.rmse > 0.0);
    }

    #[test]
    fn spatial_duplicate_site_matches_training_fit() {
        let base = dataset(40, &["A", "B"]);
        let a_rows: Vec<usize> = (0..40).filter(|&r| base.sites[r] == "A").collect();
        let mut x = base.x.to_rows();
        let mut y = base.y.clone();
        let mut sites = base.sites.clone();
        let mut ts = base.timestamps.clone();
        for &r in &a_rows {
            x.push(x[r].clone());
            y.push(y[r]);
            sites.push("C".into());
            ts.push(ts[r]);
        }
        let d = Dataset::new(FeatureMatrix::new(base.x.columns().to_vec(), x).unwrap(), y, sites, ts).unwrap();
        let mut spec = ModelSpec::preset(ModelFamily::CbLike);
        spec.tree.n_estimators = 30;
        let r = spatial_holdout(&spec, &d, "C", 0).unwrap();
        let train: Vec<usize> = (0..d.n_rows()).filter(|&i| d.sites[i] != "C").collect();
        let m = spec.fit_rows(&d.x, &d.y, &train, &LeakageGuard::none(), 0).unwrap();
        let fitted: Vec<f64> = a_rows.iter().map(|&i| m.predict_row(d.x.row(i)).unwrap()).collect();
        let truth: Vec<f64> = a_rows.iter().map(|&i| d.y[i]).collect();
        // same rows, summed in chronological rather than input order
        assert!((r.mean.rmse - rmse(&truth, &fitted).unwrap()).abs() < 1e-12);
        assert!((r.mean.r2.unwrap() - r_squared(&truth, &fitted).unwrap()).abs() < 1e-12);
        assert!(r.std.is_none());
        assert!(spatial_holdout(&spec, &d, "Z", 0).is_err());
    }

    #[test]
    fn temporal_errors_and_ordering() {
        let d = dataset(80, &["A", "B", "C"]);
        let spec = ModelSpec::preset(ModelFamily::Mean);
        let sites = vec!["B".to_string(), "A".to_string()];
        assert!(temporal_holdout(&spec, &d, 2018, &sites, 2030, 0).is_err());
        assert!(temporal_holdout(&spec, &d, 2000, &sites, 2018, 0).is_err());
        assert!(temporal_holdout(&spec, &d, 2018, &["Q".to_string()], 2018, 0).is_err());
        let r = temporal_holdout(&spec, &d, 2018, &sites, 2018, 0).unwrap();
        let order: Vec<&str> = r.predictions.iter().map(|p| p.site.as_str()).collect();
        let first_a = order.iter().position(|&s| s == "A").unwrap();
        assert!(order[..first_a].iter().all(|&s| s == "B"));
        assert!(order[first_a..].iter().all(|&s| s == "A"));
        for w in r.predictions.windows(2) {
            if w[0].site == w[1].site {
                assert!(w[0].timestamp <= w[1].timestamp);
            }
        }
    }

    #[test]
    fn report_serializes() {
        let d = dataset(30, &["A", "B"]);
        let r = kfold_cv(&ModelSpec::preset(ModelFamily::Mean), &d, 3, 1).unwrap();
        let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let mut buf = Vec::new();
        r.write_predictions_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 31);
    }

    proptest! {
        #[test]
        fn zero_rmse_iff_unit_r2(y in proptest::collection::vec(-10.0f64..10.0, 2..30), noise in proptest::collection::vec(-1.0f64..1.0, 30), scale in 0.0f64..1.0) {
            let p: Vec<f64> = y.iter().zip(&noise).map(|(a, e)| a + scale * e).collect();
            if let Ok(r2) = r_squared(&y, &p) {
                let e = rmse(&y, &p).unwrap();
                prop_assert_eq!(e == 0.0, r2 == 1.0);
            }
        }

        #[test]
        fn spearman_is_bounded(a in proptest::collection::vec(-5i32..5, 3..40), b in proptest::collection::vec(-5i32..5, 40)) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b[..a.len()].iter().map(|&v| f64::from(v)).collect();
            if let Ok(r) = spearman_rho(&a, &b) {
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
