//! Non-tree baselines: ε-SVR with an RBF kernel and a ReLU multilayer perceptron.

mod mlp;
mod svr;

pub use mlp::{fit_mlp, fit_mlp_traced, predict_mlp, Layer, MlpConfig, MlpModel, MLP_FORMAT, MLP_VERSION};
pub use svr::{
    dual_objective, fit_svr, kernel_matrix, predict_svr, rbf_kernel, scale_gamma, solve_svr_dual, DualSolution, SvrConfig,
    SvrModel, SVR_FORMAT, SVR_VERSION,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("pipeline error: {0}")]
    Pipeline(String),
    #[error("{0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("solver did not converge after {iterations} iterations (KKT violation {violation:.3e})")]
    NonConvergence { iterations: usize, violation: f64 },
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },
    #[error("unsupported {format} version {found}, expected {expected}")]
    Version { format: &'static str, found: String, expected: u32 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Check the `format`/`version` header of a model document before decoding it.
pub(crate) fn check_header(value: &serde_json::Value, format: &'static str, version: u32) -> Result<(), BaselineError> {
    match value.get("format").and_then(|f| f.as_str()) {
        Some(f) if f == format => {}
        Some(f) => return Err(BaselineError::Corrupt(format!("expected format `{format}`, found `{f}`"))),
        None => return Err(BaselineError::Corrupt("missing format tag".into())),
    }
    match value.get("version") {
        Some(v) if v.as_u64() == Some(u64::from(version)) => Ok(()),
        Some(v) => Err(BaselineError::Version { format, found: v.to_string(), expected: version }),
        None => Err(BaselineError::Corrupt("missing version tag".into())),
    }
}

pub(crate) fn check_training_input(x: &crate::matrix::FeatureMatrix, y: &[f64], min_rows: usize) -> Result<(), BaselineError> {
    if !x.is_standardized() {
        return Err(BaselineError::Pipeline("features must be standardized before fitting this model".into()));
    }
    if x.n_rows() < min_rows {
        return Err(BaselineError::Domain(format!("need at least {min_rows} rows, got {}", x.n_rows())));
    }
    if y.len() != x.n_rows() {
        return Err(BaselineError::Dimension { expected: x.n_rows(), got: y.len() });
    }
    if let Some(v) = x.as_flat().iter().chain(y).find(|v| !v.is_finite()) {
        return Err(BaselineError::Domain(format!("training data contains non-finite value {v}")));
    }
    Ok(())
}
