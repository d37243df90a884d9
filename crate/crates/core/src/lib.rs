//! Fecal indicator bacteria prediction from environmental monitoring data.

pub mod baseline;
pub mod evaluation;
pub mod explain;
pub mod hyperopt;
pub mod matrix;
pub mod monitoring;
pub mod pipeline;
pub mod preprocess;
pub mod synth;
pub mod tree;
