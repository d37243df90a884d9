//! Exact SHAP attributions for tree ensembles under the cover-weighted
//! (path-dependent) conditional expectation.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::FeatureMatrix;
use crate::tree::{CombineMode, Node, Tree, TreeEnsemble, TreeError};

/// Largest feature count the subset-enumeration oracle accepts.
pub const BRUTE_FORCE_MAX_FEATURES: usize = 15;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("split node {node} has zero cover; cannot weight its branches")]
    MissingCover { node: usize },
    #[error("brute-force Shapley values need at most {max} features, got {got}")]
    TooManyFeatures { got: usize, max: usize },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub phi: Vec<f64>,
    pub base: f64,
    pub prediction: f64,
}

impl Attribution {
    pub fn local_accuracy_gap(&self) -> f64 {
        (self.base + self.phi.iter().sum::<f64>() - self.prediction).abs()
    }
}

/// Expected tree output when only the features flagged in `present` are known.
pub fn tree_conditional_expectation(tree: &Tree, x: &[f64], present: &[bool]) -> Result<f64, ExplainError> {
    fn walk(nodes: &[Node], id: usize, x: &[f64], present: &[bool]) -> Result<f64, ExplainError> {
        match nodes[id] {
            Node::Leaf { value, .. } => Ok(value),
            Node::Split { feature, threshold, left, right, cover } => {
                if present.get(feature).copied().unwrap_or(false) {
                    let next = if x[feature] < threshold { left } else { right };
                    return walk(nodes, next, x, present);
                }
                if cover == 0 {
                    return Err(ExplainError::MissingCover { node: id });
                }
                let wl = nodes[left].cover() as f64 / cover as f64;
                let wr = nodes[right].cover() as f64 / cover as f64;
                Ok(wl * walk(nodes, left, x, present)? + wr * walk(nodes, right, x, present)?)
            }
        }
    }
    check_tree(tree, x)?;
    walk(tree.nodes(), 0, x, present)
}

fn check_tree(tree: &Tree, x: &[f64]) -> Result<(), ExplainError> {
    if let Some(f) = tree.max_feature() {
        if f >= x.len() {
            return Err(ExplainError::Shape(format!("tree splits on feature {f} but row has {} values", x.len())));
        }
    }
    Ok(())
}

fn combine(ens: &TreeEnsemble, per_tree_sum: f64) -> f64 {
    match ens.mode {
        CombineMode::Average => per_tree_sum * ens.tree_weight(),
        CombineMode::Additive => ens.base_score + ens.learning_rate * per_tree_sum,
    }
}

fn check_row(ens: &TreeEnsemble, x: &[f64]) -> Result<f64, ExplainError> {
    Ok(ens.predict(x)?)
}

/// Shapley values by enumerating every feature subset.
pub fn brute_force_shap(ens: &TreeEnsemble, x: &[f64]) -> Result<Attribution, ExplainError> {
    let m = ens.n_features;
    if m > BRUTE_FORCE_MAX_FEATURES {
        return Err(ExplainError::TooManyFeatures { got: m, max: BRUTE_FORCE_MAX_FEATURES });
    }
    let prediction = check_row(ens, x)?;
    let n_subsets = 1usize << m;
    let mut value = vec![0.0; n_subsets];
    let mut present = vec![false; m];
    for (mask, v) in value.iter_mut().enumerate() {
        for (f, p) in present.iter_mut().enumerate() {
            *p = mask >> f & 1 == 1;
        }
        let mut sum = 0.0;
        for t in &ens.trees {
            sum += tree_conditional_expectation(t, x, &present)?;
        }
        *v = combine(ens, sum);
    }
    // |S|! (M − |S| − 1)! / M!
    let mut fact = vec![1.0f64; m + 1];
    for k in 1..=m {
        fact[k] = fact[k - 1] * k as f64;
    }
    let weight = |s: usize| fact[s] * fact[m - s - 1] / fact[m];
    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for mask in (0..n_subsets).filter(|mask| mask & bit == 0) {
            *p += weight(mask.count_ones() as usize) * (value[mask | bit] - value[mask]);
        }
    }
    Ok(Attribution { phi, base: value[0], prediction })
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: Option<usize>) {
    let depth = path.len();
    path.push(PathElement { feature, zero, one, weight: if depth == 0 { 1.0 } else { 0.0 } });
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let PathElement { zero, one, .. } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * d1 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

/// Total permutation weight of the path with element `index` removed.
fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let PathElement { zero, one, .. } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (depth - i) as f64 / d1;
        } else if zero != 0.0 {
            total += path[i].weight / zero / ((depth - i) as f64 / d1);
        }
    }
    total
}

struct ShapWalk<'a> {
    nodes: &'a [Node],
    x: &'a [f64],
    phi: &'a mut [f64],
}

impl ShapWalk<'_> {
    fn recurse(
        &mut self,
        id: usize,
        mut path: Vec<PathElement>,
        zero: f64,
        one: f64,
        feature: Option<usize>,
    ) -> Result<(), ExplainError> {
        extend(&mut path, zero, one, feature);
        match self.nodes[id] {
            Node::Leaf { value, .. } => {
                for i in 1..path.len() {
                    let w = unwound_sum(&path, i);
                    let el = path[i];
                    let f = el.feature.expect("non-root path elements carry a feature");
                    self.phi[f] += w * (el.one - el.zero) * value;
                }
            }
            Node::Split { feature: f, threshold, left, right, cover } => {
                if cover == 0 {
                    return Err(ExplainError::MissingCover { node: id });
                }
                let (hot, cold) = if self.x[f] < threshold { (left, right) } else { (right, left) };
                let (mut iz, mut io) = (1.0, 1.0);
                if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(f)) {
                    iz = path[k].zero;
                    io = path[k].one;
                    unwind(&mut path, k);
                }
                let c = cover as f64;
                let hot_zero = iz * self.nodes[hot].cover() as f64 / c;
                let cold_zero = iz * self.nodes[cold].cover() as f64 / c;
                if hot_zero != 0.0 || io != 0.0 {
                    self.recurse(hot, path.clone(), hot_zero, io, Some(f))?;
                }
                if cold_zero != 0.0 {
                    self.recurse(cold, path, cold_zero, 0.0, Some(f))?;
                }
            }
        }
        Ok(())
    }
}

/// Per-feature SHAP values of a single tree, unscaled.
pub fn tree_shap_single(tree: &Tree, x: &[f64], n_features: usize) -> Result<Vec<f64>, ExplainError> {
    check_tree(tree, x)?;
    let mut phi = vec![0.0; n_features.max(x.len())];
    let mut walk = ShapWalk { nodes: tree.nodes(), x, phi: &mut phi };
    walk.recurse(0, Vec::with_capacity(tree.depth() + 2), 1.0, 1.0, None)?;
    phi.truncate(n_features);
    Ok(phi)
}

/// Polynomial-time exact SHAP values for the whole ensemble.
pub fn tree_shap(ens: &TreeEnsemble, x: &[f64]) -> Result<Attribution, ExplainError> {
    let prediction = check_row(ens, x)?;
    let m = ens.n_features;
    let w = ens.tree_weight();
    let mut phi = vec![0.0; m];
    let mut expected = 0.0;
    let none = vec![false; m];
    for t in &ens.trees {
        let p = tree_shap_single(t, x, m)?;
        for (acc, v) in phi.iter_mut().zip(&p) {
            *acc += w * v;
        }
        expected += tree_conditional_expectation(t, x, &none)?;
    }
    Ok(Attribution { phi, base: combine(ens, expected), prediction })
}

/// [`tree_shap`] for every row, in row order.
pub fn tree_shap_batch(ens: &TreeEnsemble, x: &FeatureMatrix) -> Result<Vec<Attribution>, ExplainError> {
    let rows: Vec<&[f64]> = x.rows().collect();
    rows.par_iter().map(|r| tree_shap(ens, r)).collect::<Vec<_>>().into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub mean_abs_shap: f64,
    /// `mean_abs_shap` divided by the sum over features; 0 when all are 0.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceRanking {
    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.feature == feature)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "rank,feature,mean_abs_shap,share")?;
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(out, "{},{},{},{}", i + 1, e.feature, e.mean_abs_shap, e.share)?;
        }
        Ok(())
    }
}

pub fn mean_abs_shap(attributions: &[Attribution], names: &[String]) -> Result<ImportanceRanking, ExplainError> {
    let m = names.len();
    let mut totals = vec![0.0; m];
    for a in attributions {
        if a.phi.len() != m {
            return Err(ExplainError::Shape(format!("attribution has {} values for {m} features", a.phi.len())));
        }
        for (t, p) in totals.iter_mut().zip(&a.phi) {
            *t += p.abs();
        }
    }
    let n = attributions.len().max(1) as f64;
    totals.iter_mut().for_each(|t| *t /= n);
    let sum: f64 = totals.iter().sum();
    let mut entries: Vec<ImportanceEntry> = names
        .iter()
        .zip(&totals)
        .map(|(name, &v)| ImportanceEntry {
            feature: name.clone(),
            mean_abs_shap: v,
            share: if sum > 0.0 { v / sum } else { 0.0 },
        })
        .collect();
    entries.sort_by(|a, b| b.mean_abs_shap.total_cmp(&a.mean_abs_shap).then_with(|| a.feature.cmp(&b.feature)));
    Ok(ImportanceRanking { entries })
}

/// Rows of (feature value, φ of that feature, colouring feature value).
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceTable {
    pub header: [String; 3],
    pub rows: Vec<[f64; 3]>,
}

impl DependenceTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.header.join(","))?;
        for r in &self.rows {
            writeln!(out, "{},{},{}", r[0], r[1], r[2])?;
        }
        Ok(())
    }
}

pub fn dependence_export(
    feature: &str,
    color_feature: &str,
    x: &FeatureMatrix,
    attributions: &[Attribution],
) -> Result<DependenceTable, ExplainError> {
    let lookup = |name: &str| x.column_index(name).map_err(|_| ExplainError::UnknownFeature(name.to_string()));
    let f = lookup(feature)?;
    let c = lookup(color_feature)?;
    if attributions.len() != x.n_rows() {
        return Err(ExplainError::Shape(format!("{} attributions for {} rows", attributions.len(), x.n_rows())));
    }
    let rows = x
        .rows()
        .zip(attributions)
        .map(|(r, a)| {
            a.phi
                .get(f)
                .map(|&p| [r[f], p, r[c]])
                .ok_or_else(|| ExplainError::Shape(format!("attribution lacks feature index {f}")))
        })
        .collect::<Result<_, _>>()?;
    Ok(DependenceTable {
        header: [feature.to_string(), format!("shap_{feature}"), color_feature.to_string()],
        rows,
    })
}

/// Long-format table of (instance, feature, φ).
pub fn write_attributions_csv<W: Write>(mut out: W, names: &[String], attributions: &[Attribution]) -> std::io::Result<()> {
    writeln!(out, "instance,feature,phi")?;
    for (i, a) in attributions.iter().enumerate() {
        for (name, p) in names.iter().zip(&a.phi) {
            writeln!(out, "{i},{name},{p}")?;
        }
    }
    Ok(())
}
