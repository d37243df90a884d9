//! Regression trees and the two ensemble modes built from them.
//!
//! A [`TreeEnsemble`] is either an average of trees (random forest) or a
//! base score plus learning-rate-scaled tree outputs (gradient boosting).
//! Every node stores its training cover; TreeSHAP depends on it.

mod cart;
mod ensemble;
mod io;

pub use cart::fit_cart;
pub use ensemble::{fit_gbrt, fit_gbrt_traced, fit_random_forest, TreePreset};
pub(crate) use ensemble::derive_seed;
pub use io::{load_model, read_model, save_model, write_model, MODEL_FORMAT, MODEL_VERSION};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::FeatureMatrix;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("{0}")]
    Domain(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("malformed tree: {0}")]
    Malformed(String),
    #[error("feature {feature} is not finite ({value})")]
    NonFinite { feature: usize, value: f64 },
    #[error("input has {got} features, model expects at least {expected}")]
    Shape { expected: usize, got: usize },
    #[error("unsupported model version {found} (expected {expected})")]
    Version { found: String, expected: u32 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize, cover: u64 },
    Leaf { value: f64, cover: u64 },
}

impl Node {
    pub fn cover(&self) -> u64 {
        match *self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => cover,
        }
    }
}

/// Arena-allocated binary regression tree; node 0 is the root and children
/// always sit at larger indices than their parent.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self, TreeError> {
        let t = Self { nodes };
        t.validate()?;
        Ok(t)
    }

    pub fn leaf(value: f64, cover: u64) -> Self {
        Self { nodes: vec![Node::Leaf { value, cover }] }
    }

    pub(crate) fn from_nodes_unchecked(nodes: Vec<Node>) -> Self {
        Self { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    /// Largest feature index used by any split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        if self.nodes.is_empty() {
            return Err(TreeError::Malformed("tree has no nodes".into()));
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { value, .. } => {
                    if !value.is_finite() {
                        return Err(TreeError::Malformed(format!("leaf {i} value is not finite")));
                    }
                }
                Node::Split { threshold, left, right, cover, .. } => {
                    if !threshold.is_finite() {
                        return Err(TreeError::Malformed(format!("node {i} threshold is not finite")));
                    }
                    for child in [left, right] {
                        if child <= i || child >= self.nodes.len() {
                            return Err(TreeError::Malformed(format!("node {i} has invalid child {child}")));
                        }
                        parents[child] += 1;
                    }
                    if left == right {
                        return Err(TreeError::Malformed(format!("node {i} has identical children")));
                    }
                    let sum = self.nodes[left].cover() + self.nodes[right].cover();
                    if sum != cover {
                        return Err(TreeError::Malformed(format!("node {i} cover {cover} != children {sum}")));
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err(TreeError::Malformed("nodes do not form a single tree".into()));
        }
        Ok(())
    }

    /// Root-to-leaf descent: `x[f] < threshold` goes left, everything else right.
    pub fn predict(&self, x: &[f64]) -> Result<f64, TreeError> {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return Ok(value),
                Node::Split { feature, threshold, left, right, .. } => {
                    let v = *x.get(feature).ok_or(TreeError::Shape { expected: feature + 1, got: x.len() })?;
                    if !v.is_finite() {
                        return Err(TreeError::NonFinite { feature, value: v });
                    }
                    i = if v < threshold { left } else { right };
                }
            }
        }
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[feature] < threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaf_range(&self) -> (f64, f64) {
        self.nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), n| match n {
            Node::Leaf { value, .. } => (lo.min(*value), hi.max(*value)),
            Node::Split { .. } => (lo, hi),
        })
    }
}

pub fn predict_tree(tree: &Tree, x: &[f64]) -> Result<f64, TreeError> {
    tree.predict(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    Average,
    Additive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    pub trees: Vec<Tree>,
    pub base_score: f64,
    pub mode: CombineMode,
    pub learning_rate: f64,
    pub n_features: usize,
}

impl TreeEnsemble {
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.mode == CombineMode::Average {
            if self.base_score != 0.0 {
                return Err(TreeError::Malformed("average-mode ensemble must have base_score 0".into()));
            }
            if self.trees.is_empty() {
                return Err(TreeError::Malformed("average-mode ensemble has no trees".into()));
            }
        }
        if !self.base_score.is_finite() || !self.learning_rate.is_finite() {
            return Err(TreeError::Malformed("base_score and learning_rate must be finite".into()));
        }
        for t in &self.trees {
            t.validate()?;
            if let Some(f) = t.max_feature() {
                if f >= self.n_features {
                    return Err(TreeError::Malformed(format!("split on feature {f} but n_features = {}", self.n_features)));
                }
            }
        }
        Ok(())
    }

    /// Multiplier applied to each tree's output.
    pub fn tree_weight(&self) -> f64 {
        match self.mode {
            CombineMode::Average => 1.0 / self.trees.len() as f64,
            CombineMode::Additive => self.learning_rate,
        }
    }

    fn check_row(&self, x: &[f64]) -> Result<(), TreeError> {
        if x.len() < self.n_features {
            return Err(TreeError::Shape { expected: self.n_features, got: x.len() });
        }
        if let Some((feature, &value)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(TreeError::NonFinite { feature, value });
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, TreeError> {
        self.check_row(x)?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_unchecked(x)).sum();
        match self.mode {
            CombineMode::Average => sum / self.trees.len() as f64,
            CombineMode::Additive => self.base_score + self.learning_rate * sum,
        }
    }

    pub fn predict_batch(&self, x: &FeatureMatrix) -> Result<Vec<f64>, TreeError> {
        x.rows().map(|r| self.predict(r)).collect()
    }
}

pub fn predict_ensemble(ens: &TreeEnsemble, x: &[f64]) -> Result<f64, TreeError> {
    ens.predict(x)
}

/// Fitting knobs shared by single trees, forests and boosting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeFitParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub n_estimators: usize,
    pub learning_rate: f64,
    /// Fraction of features considered at each split.
    pub feature_subsample: f64,
    /// Fraction of rows drawn per tree.
    pub row_subsample: f64,
    /// Draw rows with replacement (forests) instead of without.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for TreeFitParams {
    fn default() -> Self {
        TreePreset::CbLike.params()
    }
}

impl TreeFitParams {
    pub fn validate(&self) -> Result<(), TreeError> {
        let bad = |m: &str| Err(TreeError::Params(m.to_string()));
        if self.max_depth < 1 {
            return bad("max_depth must be ≥ 1");
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be ≥ 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return bad("feature_subsample must be in (0, 1]");
        }
        if !(self.row_subsample > 0.0 && self.row_subsample <= 1.0) {
            return bad("row_subsample must be in (0, 1]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> Tree {
        Tree::from_nodes(vec![
            Node::Split { feature: 0, threshold: 2.5, left: 1, right: 2, cover: 4 },
            Node::Leaf { value: 0.0, cover: 2 },
            Node::Leaf { value: 1.0, cover: 2 },
        ])
        .unwrap()
    }

    #[test]
    fn predict_tree_examples() {
        let leaf = Tree::leaf(0.7, 3);
        assert_eq!(leaf.predict(&[123.0, -4.0]).unwrap(), 0.7);
        assert_eq!(stump().predict(&[1.0, 9.0]).unwrap(), 0.0);
        assert_eq!(stump().predict(&[2.5]).unwrap(), 1.0);
        assert!(matches!(stump().predict(&[f64::NAN]), Err(TreeError::NonFinite { .. })));
    }

    #[test]
    fn validation_catches_cover_mismatch_and_cycles() {
        let bad = Tree::from_nodes(vec![
            Node::Split { feature: 0, threshold: 1.0, left: 1, right: 2, cover: 5 },
            Node::Leaf { value: 0.0, cover: 2 },
            Node::Leaf { value: 1.0, cover: 2 },
        ]);
        assert!(matches!(bad, Err(TreeError::Malformed(_))));
        let cyc = Tree::from_nodes(vec![
            Node::Split { feature: 0, threshold: 1.0, left: 0, right: 1, cover: 2 },
            Node::Leaf { value: 0.0, cover: 1 },
        ]);
        assert!(cyc.is_err());
    }

    #[test]
    fn ensemble_combination_examples() {
        let empty = TreeEnsemble { trees: vec![], base_score: 1.25, mode: CombineMode::Additive, learning_rate: 0.1, n_features: 1 };
        assert_eq!(empty.predict(&[0.0]).unwrap(), 1.25);
        let avg = TreeEnsemble {
            trees: vec![Tree::leaf(0.2, 1), Tree::leaf(0.4, 1)],
            base_score: 0.0,
            mode: CombineMode::Average,
            learning_rate: 1.0,
            n_features: 1,
        };
        assert!((avg.predict(&[0.0]).unwrap() - 0.3).abs() < 1e-15);
        let add = TreeEnsemble {
            trees: vec![Tree::leaf(2.0, 1), Tree::leaf(-1.0, 1)],
            base_score: 1.0,
            mode: CombineMode::Additive,
            learning_rate: 0.5,
            n_features: 1,
        };
        assert_eq!(add.predict(&[0.0]).unwrap(), 1.5);
    }

    #[test]
    fn ensemble_mode_violations() {
        let avg = TreeEnsemble { trees: vec![Tree::leaf(1.0, 1)], base_score: 0.5, mode: CombineMode::Average, learning_rate: 1.0, n_features: 1 };
        assert!(avg.validate().is_err());
        let empty_avg = TreeEnsemble { trees: vec![], base_score: 0.0, mode: CombineMode::Average, learning_rate: 1.0, n_features: 1 };
        assert!(empty_avg.validate().is_err());
        let ens = TreeEnsemble { trees: vec![stump()], base_score: 0.0, mode: CombineMode::Additive, learning_rate: 1.0, n_features: 1 };
        assert!(matches!(ens.predict(&[]), Err(TreeError::Shape { .. })));
    }

    #[test]
    fn params_validation() {
        let mut p = TreeFitParams::default();
        assert!(p.validate().is_ok());
        p.learning_rate = 0.0;
        assert!(p.validate().is_err());
        assert!(TreeFitParams { feature_subsample: 1.5, ..TreeFitParams::default() }.validate().is_err());
        assert!(TreeFitParams { max_depth: 0, ..TreeFitParams::default() }.validate().is_err());
    }
}
