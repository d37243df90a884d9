//! Model specifications that bundle optional scaling with a learner, and the
//! guard that keeps transformers off held-out rows.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{fit_mlp, fit_svr, BaselineError, MlpConfig, MlpModel, SvrConfig, SvrModel};
use crate::matrix::{FeatureMatrix, MatrixError};
use crate::preprocess::{fit_standardizer, PreprocessError, Standardizer};
use crate::tree::{fit_gbrt, fit_random_forest, TreeEnsemble, TreeError, TreeFitParams, TreePreset};

pub const PIPELINE_FORMAT: &str = "fibpred-model";
pub const PIPELINE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("pipeline error: {0}")]
    Pipeline(String),
    #[error("leakage guard: attempted to fit on {count} held-out row(s), first is row {first}")]
    Leakage { count: usize, first: usize },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("{0}")]
    Domain(String),
    #[error("unsupported model version {found}, expected {expected}")]
    Version { found: String, expected: u32 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    CbLike,
    XgbLike,
    Rf,
    Svr,
    Mlp,
    /// Predicts the training-target mean.
    Mean,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 6] =
        [ModelFamily::CbLike, ModelFamily::XgbLike, ModelFamily::Rf, ModelFamily::Svr, ModelFamily::Mlp, ModelFamily::Mean];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::CbLike => "cb-like",
            ModelFamily::XgbLike => "xgb-like",
            ModelFamily::Rf => "rf",
            ModelFamily::Svr => "svr",
            ModelFamily::Mlp => "mlp",
            ModelFamily::Mean => "mean",
        }
    }

    pub fn tree_preset(self) -> Option<TreePreset> {
        match self {
            ModelFamily::CbLike => Some(TreePreset::CbLike),
            ModelFamily::XgbLike => Some(TreePreset::XgbLike),
            ModelFamily::Rf => Some(TreePreset::Rf),
            _ => None,
        }
    }

    pub fn needs_scaling(self) -> bool {
        matches!(self, ModelFamily::Svr | ModelFamily::Mlp)
    }
}

impl std::str::FromStr for ModelFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown model family `{s}` (expected cb-like, xgb-like, rf, svr, mlp or mean)"))
    }
}

/// What to fit: learner family, its hyperparameters and whether to scale first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub standardize: bool,
    pub tree: TreeFitParams,
    pub svr: SvrConfig,
    pub mlp: MlpConfig,
}

impl ModelSpec {
    /// Family defaults; scaling is switched on exactly for SVR and MLP.
    pub fn preset(family: ModelFamily) -> Self {
        Self {
            family,
            standardize: family.needs_scaling(),
            tree: family.tree_preset().unwrap_or(TreePreset::CbLike).params(),
            svr: SvrConfig::default(),
            mlp: MlpConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.family.needs_scaling() && !self.standardize {
            return Err(PipelineError::Pipeline(format!(
                "{} requires standardized features; enable standardize",
                self.family.as_str()
            )));
        }
        match self.family {
            ModelFamily::CbLike | ModelFamily::XgbLike | ModelFamily::Rf => self.tree.validate()?,
            ModelFamily::Svr => self.svr.validate()?,
            ModelFamily::Mlp => self.mlp.validate()?,
            ModelFamily::Mean => {}
        }
        Ok(())
    }

    /// Fit on every row of `x`.
    pub fn fit(&self, x: &FeatureMatrix, y: &[f64], seed: u64) -> Result<FittedModel, PipelineError> {
        let rows: Vec<usize> = (0..x.n_rows()).collect();
        self.fit_rows(x, y, &rows, &LeakageGuard::none(), seed)
    }

    /// Fit on the listed rows only, after checking them against `guard`.
    pub fn fit_rows(
        &self,
        x: &FeatureMatrix,
        y: &[f64],
        rows: &[usize],
        guard: &LeakageGuard,
        seed: u64,
    ) -> Result<FittedModel, PipelineError> {
        self.validate()?;
        guard.check(rows)?;
        if x.is_standardized() && self.standardize {
            return Err(PipelineError::Pipeline("input is already standardized".into()));
        }
        if y.len() != x.n_rows() {
            return Err(PipelineError::Domain(format!("{} targets for {} rows", y.len(), x.n_rows())));
        }
        if rows.is_empty() {
            return Err(PipelineError::Domain("no training rows".into()));
        }
        let xt = x.select_rows(rows)?;
        let yt: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        let standardizer = if self.standardize { Some(fit_standardizer(&xt)?) } else { None };
        let xs = match &standardizer {
            Some(s) => s.apply(&xt)?,
            None => xt,
        };
        let learner = match self.family {
            ModelFamily::CbLike | ModelFamily::XgbLike => {
                Learner::Tree(fit_gbrt(&xs, &yt, &TreeFitParams { seed, ..self.tree.clone() })?)
            }
            ModelFamily::Rf => Learner::Tree(fit_random_forest(&xs, &yt, &TreeFitParams { seed, ..self.tree.clone() })?),
            ModelFamily::Svr => Learner::Svr(fit_svr(&xs, &yt, &self.svr)?),
            ModelFamily::Mlp => Learner::Mlp(fit_mlp(&xs, &yt, &MlpConfig { seed, ..self.mlp.clone() })?),
            ModelFamily::Mean => Learner::Mean { value: yt.iter().sum::<f64>() / yt.len() as f64 },
        };
        Ok(FittedModel { family: self.family, columns: x.columns().to_vec(), standardizer, learner })
    }
}

/// Rows that no transformer or learner may be fitted on.
#[derive(Debug, Clone, Default)]
pub struct LeakageGuard {
    held_out: BTreeSet<usize>,
}

impl LeakageGuard {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(held_out: impl IntoIterator<Item = usize>) -> Self {
        Self { held_out: held_out.into_iter().collect() }
    }

    pub fn check(&self, rows: &[usize]) -> Result<(), PipelineError> {
        let mut leaked = rows.iter().filter(|r| self.held_out.contains(r));
        if let Some(&first) = leaked.next() {
            return Err(PipelineError::Leakage { count: 1 + leaked.count(), first });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Learner {
    Tree(TreeEnsemble),
    Svr(SvrModel),
    Mlp(MlpModel),
    Mean { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub family: ModelFamily,
    pub columns: Vec<String>,
    pub standardizer: Option<Standardizer>,
    pub learner: Learner,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: FittedModel,
}

impl FittedModel {
    pub fn tree_ensemble(&self) -> Option<&TreeEnsemble> {
        match &self.learner {
            Learner::Tree(t) => Some(t),
            _ => None,
        }
    }

    /// Predict one raw (unscaled) row.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64, PipelineError> {
        if row.len() != self.columns.len() {
            return Err(PipelineError::Domain(format!("row has {} values, model expects {}", row.len(), self.columns.len())));
        }
        let scaled;
        let input = match &self.standardizer {
            Some(s) => {
                scaled = s.apply_row(row)?;
                scaled.as_slice()
            }
            None => row,
        };
        Ok(match &self.learner {
            Learner::Tree(t) => t.predict(input)?,
            Learner::Svr(m) => m.predict(input)?,
            Learner::Mlp(m) => m.predict(input)?,
            Learner::Mean { value } => *value,
        })
    }

    /// Predict every row of a raw matrix whose columns match the training header.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, PipelineError> {
        if x.columns() != self.columns.as_slice() {
            return Err(PipelineError::Domain("matrix columns do not match the model's training columns".into()));
        }
        if x.is_standardized() {
            return Err(PipelineError::Pipeline("pass raw features; the model applies its own scaling".into()));
        }
        x.rows().map(|r| self.predict_row(r)).collect()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile { format: PIPELINE_FORMAT.into(), version: PIPELINE_VERSION, model: self.clone() };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, PipelineError> {
        let value: serde_json::Value = serde_json::from_str(s).map_err(|e| PipelineError::Corrupt(e.to_string()))?;
        match value.get("format").and_then(|f| f.as_str()) {
            Some(PIPELINE_FORMAT) => {}
            other => return Err(PipelineError::Corrupt(format!("unexpected format tag {other:?}"))),
        }
        match value.get("version") {
            Some(v) if v.as_u64() == Some(u64::from(PIPELINE_VERSION)) => {}
            Some(v) => return Err(PipelineError::Version { found: v.to_string(), expected: PIPELINE_VERSION }),
            None => return Err(PipelineError::Corrupt("missing version tag".into())),
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| PipelineError::Corrupt(e.to_string()))?;
        Ok(file.model)
    }
}
