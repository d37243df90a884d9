use std::fmt::Display;

use fibpred_core::baseline::BaselineError;
use fibpred_core::evaluation::EvalError;
use fibpred_core::explain::ExplainError;
use fibpred_core::hyperopt::HyperoptError;
use fibpred_core::matrix::MatrixError;
use fibpred_core::monitoring::DataError;
use fibpred_core::pipeline::PipelineError;
use fibpred_core::preprocess::PreprocessError;
use fibpred_core::synth::SynthError;
use fibpred_core::tree::TreeError;
use thiserror::Error;

/// Command failure. `Input` covers anything the caller can fix by changing
/// the config, flags or input files; everything else is `Internal`.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn input(msg: impl Display) -> Self {
        CliError::Input(msg.to_string())
    }

    pub fn internal(msg: impl Display) -> Self {
        CliError::Internal(msg.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::input(e)
    }
}

impl From<MatrixError> for CliError {
    fn from(e: MatrixError) -> Self {
        CliError::input(e)
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        CliError::input(e)
    }
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        match e {
            TreeError::Malformed(_) | TreeError::Io(_) => CliError::internal(e),
            _ => CliError::input(e),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::NonConvergence { .. } | BaselineError::Divergence { .. } => CliError::internal(e),
            _ => CliError::input(e),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Tree(t) => t.into(),
            PipelineError::Baseline(b) => b.into(),
            _ => CliError::input(e),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Pipeline(p) => p.into(),
            EvalError::Io(_) => CliError::internal(e),
            _ => CliError::input(e),
        }
    }
}

impl From<HyperoptError> for CliError {
    fn from(e: HyperoptError) -> Self {
        match e {
            HyperoptError::Space(_) | HyperoptError::Config(_) => CliError::input(e),
            HyperoptError::Eval(ev) => ev.into(),
            _ => CliError::internal(e),
        }
    }
}

impl From<ExplainError> for CliError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::UnknownFeature(_) | ExplainError::Shape(_) => CliError::input(e),
            ExplainError::Tree(t) => t.into(),
            _ => CliError::internal(e),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io { .. } => CliError::internal(e),
            _ => CliError::input(e),
        }
    }
}
