//! Random forests and squared-error gradient boosting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cart::{check_data, Builder, Presorted};
use super::{CombineMode, TreeEnsemble, TreeError, TreeFitParams};
use crate::matrix::FeatureMatrix;

/// Named hyperparameter defaults for the tree families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreePreset {
    /// Boosting, depth 6, learning rate 0.05.
    CbLike,
    /// Boosting, depth 6, learning rate 0.3.
    XgbLike,
    /// Bootstrap forest, ⌈M/3⌉ features per split, fully grown trees.
    Rf,
}

impl TreePreset {
    pub fn params(self) -> TreeFitParams {
        let base = TreeFitParams {
            max_depth: 6,
            min_samples_leaf: 1,
            n_estimators: 550,
            learning_rate: 0.05,
            feature_subsample: 1.0,
            row_subsample: 1.0,
            bootstrap: false,
            seed: 0,
        };
        match self {
            TreePreset::CbLike => base,
            TreePreset::XgbLike => TreeFitParams { learning_rate: 0.3, ..base },
            TreePreset::Rf => TreeFitParams {
                max_depth: 512,
                learning_rate: 1.0,
                feature_subsample: 1.0 / 3.0,
                bootstrap: true,
                ..base
            },
        }
    }

    pub fn combine_mode(self) -> CombineMode {
        match self {
            TreePreset::Rf => CombineMode::Average,
            TreePreset::CbLike | TreePreset::XgbLike => CombineMode::Additive,
        }
    }
}

/// Per-tree seed derived from the run seed and the tree's position.
pub(crate) fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn subsample_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n)
}

/// Expand the full presorted lists to a row multiset given per-row counts.
fn restrict(all: &Presorted, counts: &[u32]) -> Vec<Vec<u32>> {
    all.per_feature
        .iter()
        .map(|list| {
            let mut out = Vec::with_capacity(list.len());
            for &r in list {
                for _ in 0..counts[r as usize] {
                    out.push(r);
                }
            }
            out
        })
        .collect()
}

fn row_counts(n: usize, params: &TreeFitParams, rng: &mut ChaCha8Rng) -> Option<Vec<u32>> {
    if params.bootstrap {
        let size = subsample_size(n, params.row_subsample);
        let mut counts = vec![0u32; n];
        for _ in 0..size {
            counts[rng.random_range(0..n)] += 1;
        }
        Some(counts)
    } else if params.row_subsample < 1.0 {
        let size = subsample_size(n, params.row_subsample);
        let mut counts = vec![0u32; n];
        for i in rand::seq::index::sample(rng, n, size) {
            counts[i] = 1;
        }
        Some(counts)
    } else {
        None
    }
}

/// Average-mode ensemble of trees fit on row resamples with per-split
/// feature subsets. Trees are built in parallel; each tree's randomness
/// comes only from its index-derived seed.
pub fn fit_random_forest(x: &FeatureMatrix, y: &[f64], params: &TreeFitParams) -> Result<TreeEnsemble, TreeError> {
    check_data(x, y)?;
    params.validate()?;
    if params.n_estimators == 0 {
        return Err(TreeError::Params("random forest needs n_estimators ≥ 1".into()));
    }
    let n = x.n_rows();
    let all_rows: Vec<u32> = (0..n as u32).collect();
    let presorted = Presorted::new(x, &all_rows);
    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(params.seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lists = match row_counts(n, params, &mut rng) {
                Some(counts) => restrict(&presorted, &counts),
                None => presorted.per_feature.clone(),
            };
            Builder::new(x, y, params, rng.random()).build(lists)
        })
        .collect();
    Ok(TreeEnsemble { trees, base_score: 0.0, mode: CombineMode::Average, learning_rate: 1.0, n_features: x.n_cols() })
}

/// Stagewise least-squares boosting.
pub fn fit_gbrt(x: &FeatureMatrix, y: &[f64], params: &TreeFitParams) -> Result<TreeEnsemble, TreeError> {
    fit_gbrt_traced(x, y, params).map(|(e, _)| e)
}

/// As [`fit_gbrt`], also returning the training MSE after each stage
/// (entry 0 is the base-score-only model).
pub fn fit_gbrt_traced(x: &FeatureMatrix, y: &[f64], params: &TreeFitParams) -> Result<(TreeEnsemble, Vec<f64>), TreeError> {
    check_data(x, y)?;
    params.validate()?;
    let n = x.n_rows();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let mse = |pred: &[f64]| pred.iter().zip(y).map(|(p, t)| (t - p).powi(2)).sum::<f64>() / n as f64;
    let mut trace = Vec::with_capacity(params.n_estimators + 1);
    trace.push(mse(&pred));
    let all_rows: Vec<u32> = (0..n as u32).collect();
    let presorted = Presorted::new(x, &all_rows);
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut residual = vec![0.0; n];
    for stage in 0..params.n_estimators {
        for ((r, t), p) in residual.iter_mut().zip(y).zip(&pred) {
            *r = t - p;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, stage as u64));
        let lists = match row_counts(n, params, &mut rng) {
            Some(counts) => restrict(&presorted, &counts),
            None => presorted.per_feature.clone(),
        };
        let tree = Builder::new(x, &residual, params, rng.random()).build(lists);
        for (p, row) in pred.iter_mut().zip(x.rows()) {
            *p += params.learning_rate * tree.predict_unchecked(row);
        }
        trace.push(mse(&pred));
        trees.push(tree);
    }
    let ens = TreeEnsemble {
        trees,
        base_score: base,
        mode: CombineMode::Additive,
        learning_rate: params.learning_rate,
        n_features: x.n_cols(),
    };
    Ok((ens, trace))
}
