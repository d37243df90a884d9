//! Self-describing JSON model files with flattened node arrays.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CombineMode, Node, Tree, TreeEnsemble, TreeError};

pub const MODEL_FORMAT: &str = "fibpred-tree-ensemble";
pub const MODEL_VERSION: u32 = 1;

/// Flattened node arrays; leaves have `feature = -1` and no children.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct TreeArrays {
    feature: Vec<i64>,
    threshold: Vec<f64>,
    left: Vec<i64>,
    right: Vec<i64>,
    value: Vec<f64>,
    cover: Vec<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ModelDoc {
    format: String,
    version: u32,
    combine_mode: CombineMode,
    base_score: f64,
    learning_rate: f64,
    n_features: usize,
    trees: Vec<TreeArrays>,
}

impl From<&Tree> for TreeArrays {
    fn from(t: &Tree) -> Self {
        let mut a = TreeArrays {
            feature: Vec::with_capacity(t.nodes.len()),
            threshold: Vec::with_capacity(t.nodes.len()),
            left: Vec::with_capacity(t.nodes.len()),
            right: Vec::with_capacity(t.nodes.len()),
            value: Vec::with_capacity(t.nodes.len()),
            cover: Vec::with_capacity(t.nodes.len()),
        };
        for n in &t.nodes {
            match *n {
                Node::Split { feature, threshold, left, right, cover } => {
                    a.feature.push(feature as i64);
                    a.threshold.push(threshold);
                    a.left.push(left as i64);
                    a.right.push(right as i64);
                    a.value.push(0.0);
                    a.cover.push(cover);
                }
                Node::Leaf { value, cover } => {
                    a.feature.push(-1);
                    a.threshold.push(0.0);
                    a.left.push(-1);
                    a.right.push(-1);
                    a.value.push(value);
                    a.cover.push(cover);
                }
            }
        }
        a
    }
}

impl TryFrom<TreeArrays> for Tree {
    type Error = TreeError;

    fn try_from(a: TreeArrays) -> Result<Self, TreeError> {
        let n = a.feature.len();
        if [a.threshold.len(), a.left.len(), a.right.len(), a.value.len(), a.cover.len()].iter().any(|&l| l != n) {
            return Err(TreeError::Corrupt("node arrays differ in length".into()));
        }
        let idx = |v: i64| usize::try_from(v).map_err(|_| TreeError::Corrupt(format!("negative child index {v}")));
        let nodes = (0..n)
            .map(|i| {
                if a.feature[i] < 0 {
                    Ok(Node::Leaf { value: a.value[i], cover: a.cover[i] })
                } else {
                    Ok(Node::Split {
                        feature: a.feature[i] as usize,
                        threshold: a.threshold[i],
                        left: idx(a.left[i])?,
                        right: idx(a.right[i])?,
                        cover: a.cover[i],
                    })
                }
            })
            .collect::<Result<Vec<_>, TreeError>>()?;
        Tree::from_nodes(nodes).map_err(|e| TreeError::Corrupt(e.to_string()))
    }
}

pub(crate) fn to_doc(ens: &TreeEnsemble) -> ModelDoc {
    ModelDoc {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        combine_mode: ens.mode,
        base_score: ens.base_score,
        learning_rate: ens.learning_rate,
        n_features: ens.n_features,
        trees: ens.trees.iter().map(TreeArrays::from).collect(),
    }
}

pub(crate) fn from_doc(doc: ModelDoc) -> Result<TreeEnsemble, TreeError> {
    if doc.format != MODEL_FORMAT {
        return Err(TreeError::Corrupt(format!("unexpected format tag `{}`", doc.format)));
    }
    let trees = doc.trees.into_iter().map(Tree::try_from).collect::<Result<Vec<_>, _>>()?;
    let ens = TreeEnsemble {
        trees,
        base_score: doc.base_score,
        mode: doc.combine_mode,
        learning_rate: doc.learning_rate,
        n_features: doc.n_features,
    };
    ens.validate().map_err(|e| TreeError::Corrupt(e.to_string()))?;
    Ok(ens)
}

impl Serialize for TreeEnsemble {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        to_doc(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TreeEnsemble {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        from_value(value).map_err(serde::de::Error::custom)
    }
}

fn from_value(value: serde_json::Value) -> Result<TreeEnsemble, TreeError> {
    match value.get("version") {
        Some(v) if v.as_u64() == Some(u64::from(MODEL_VERSION)) => {}
        Some(v) => return Err(TreeError::Version { found: v.to_string(), expected: MODEL_VERSION }),
        None => return Err(TreeError::Corrupt("missing version tag".into())),
    }
    let doc: ModelDoc = serde_json::from_value(value).map_err(|e| TreeError::Corrupt(e.to_string()))?;
    from_doc(doc)
}

pub fn write_model<W: Write>(ens: &TreeEnsemble, out: W) -> Result<(), TreeError> {
    serde_json::to_writer(out, &to_doc(ens)).map_err(|e| TreeError::Io(e.into()))
}

pub fn read_model<R: Read>(input: R) -> Result<TreeEnsemble, TreeError> {
    let value: serde_json::Value = serde_json::from_reader(input).map_err(|e| TreeError::Corrupt(e.to_string()))?;
    from_value(value)
}

pub fn save_model(ens: &TreeEnsemble, path: &Path) -> Result<(), TreeError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_model(ens, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TreeEnsemble, TreeError> {
    read_model(std::io::BufReader::new(std::fs::File::open(path)?))
}
