//! Greedy variance-reduction CART for regression.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Node, Tree, TreeError, TreeFitParams};
use crate::matrix::FeatureMatrix;

/// Candidate gains closer than this fraction of the node SSE count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

/// Row multiset sorted once per feature, ordered by (value, row index).
pub(crate) struct Presorted {
    pub(crate) per_feature: Vec<Vec<u32>>,
}

impl Presorted {
    pub(crate) fn new(x: &FeatureMatrix, rows: &[u32]) -> Self {
        let m = x.n_cols();
        let flat = x.as_flat();
        let per_feature = (0..m)
            .map(|f| {
                let mut r = rows.to_vec();
                r.sort_by(|&a, &b| {
                    flat[a as usize * m + f]
                        .total_cmp(&flat[b as usize * m + f])
                        .then(a.cmp(&b))
                });
                r
            })
            .collect();
        Self { per_feature }
    }
}

pub(crate) struct Builder<'a> {
    flat: &'a [f64],
    m: usize,
    y: &'a [f64],
    params: &'a TreeFitParams,
    /// Features evaluated per split.
    k: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl<'a> Builder<'a> {
    pub(crate) fn new(x: &'a FeatureMatrix, y: &'a [f64], params: &'a TreeFitParams, seed: u64) -> Self {
        let m = x.n_cols();
        let k = ((params.feature_subsample * m as f64).ceil() as usize).clamp(1, m.max(1));
        Self { flat: x.as_flat(), m, y, params, k, rng: ChaCha8Rng::seed_from_u64(seed), nodes: Vec::new() }
    }

    pub(crate) fn build(mut self, sorted: Vec<Vec<u32>>) -> Tree {
        self.grow(sorted, 0);
        Tree::from_nodes_unchecked(self.nodes)
    }

    fn value(&self, row: u32, f: usize) -> f64 {
        self.flat[row as usize * self.m + f]
    }

    fn grow(&mut self, sorted: Vec<Vec<u32>>, depth: usize) -> usize {
        let rows: &[u32] = sorted.first().map_or(&[], |v| v.as_slice());
        let n = rows.len();
        let id = self.nodes.len();
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
            let v = self.y[r as usize];
            (lo.min(v), hi.max(v))
        });
        let mean = rows.iter().map(|&r| self.y[r as usize]).sum::<f64>() / n as f64;
        let leaf = |mean: f64| Node::Leaf { value: if lo == hi { lo } else { mean }, cover: n as u64 };
        if n == 0 {
            self.nodes.push(Node::Leaf { value: 0.0, cover: 0 });
            return id;
        }
        if depth >= self.params.max_depth || lo == hi || n < 2 * self.params.min_samples_leaf || self.m == 0 {
            self.nodes.push(leaf(mean));
            return id;
        }
        let sse: f64 = rows.iter().map(|&r| (self.y[r as usize] - mean).powi(2)).sum();
        let features: Vec<usize> = if self.k >= self.m {
            (0..self.m).collect()
        } else {
            let mut f = sample(&mut self.rng, self.m, self.k).into_vec();
            f.sort_unstable();
            f
        };
        let Some(best) = self.best_split(&sorted, &features, mean, sse) else {
            self.nodes.push(leaf(mean));
            return id;
        };

        self.nodes.push(Node::Leaf { value: mean, cover: n as u64 });
        let (mut left, mut right) = (Vec::with_capacity(self.m), Vec::with_capacity(self.m));
        for list in sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&row| self.value(row, best.feature) < best.threshold);
            left.push(l);
            right.push(r);
        }
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left: l, right: r, cover: n as u64 };
        id
    }

    /// Highest SSE reduction over all (feature, midpoint) candidates.
    /// Scans features and thresholds in ascending order and only accepts a
    /// strictly better gain, so ties resolve to the lowest feature, then the
    /// lowest threshold.
    fn best_split(&self, sorted: &[Vec<u32>], features: &[usize], mean: f64, sse: f64) -> Option<Best> {
        let n = sorted[0].len();
        let min_leaf = self.params.min_samples_leaf;
        let nf = n as f64;
        let tie = TIE_TOLERANCE * sse;
        let mut best: Option<Best> = None;
        for &f in features {
            let list = &sorted[f];
            // running sum of centered targets over the left part
            let mut s = 0.0;
            for i in 1..n {
                s += self.y[list[i - 1] as usize] - mean;
                if i < min_leaf || n - i < min_leaf {
                    continue;
                }
                let a = self.value(list[i - 1], f);
                let b = self.value(list[i], f);
                if a >= b {
                    continue;
                }
                let (nl, nr) = (i as f64, (n - i) as f64);
                let gain = s * s * nf / (nl * nr);
                if gain <= 0.0 {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some(cur) => gain > cur.gain + tie,
                };
                if better {
                    let mut threshold = 0.5 * (a + b);
                    if threshold <= a || !threshold.is_finite() {
                        threshold = b;
                    }
                    best = Some(Best { gain, feature: f, threshold });
                }
            }
        }
        best
    }
}

/// Fit one regression tree on all rows of `x`.
pub fn fit_cart(x: &FeatureMatrix, y: &[f64], params: &TreeFitParams) -> Result<Tree, TreeError> {
    check_data(x, y)?;
    params.validate()?;
    let rows: Vec<u32> = (0..x.n_rows() as u32).collect();
    let sorted = Presorted::new(x, &rows);
    Ok(Builder::new(x, y, params, params.seed).build(sorted.per_feature))
}

pub(crate) fn check_data(x: &FeatureMatrix, y: &[f64]) -> Result<(), TreeError> {
    if x.n_rows() == 0 {
        return Err(TreeError::Domain("cannot fit on empty data".into()));
    }
    if y.len() != x.n_rows() {
        return Err(TreeError::Domain(format!("{} targets for {} rows", y.len(), x.n_rows())));
    }
    if x.n_rows() > u32::MAX as usize {
        return Err(TreeError::Domain("too many rows".into()));
    }
    if let Some(v) = x.as_flat().iter().chain(y).find(|v| !v.is_finite()) {
        return Err(TreeError::Domain(format!("training data contains non-finite value {v}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(depth: usize) -> TreeFitParams {
        TreeFitParams { max_depth: depth, min_samples_leaf: 1, ..TreeFitParams::default() }
    }

    fn one_d(xs: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(vec!["x".into()], xs.iter().map(|&v| vec![v]).collect()).unwrap()
    }

    #[test]
    fn constant_target_is_single_leaf() {
        let t = fit_cart(&one_d(&[1.0, 2.0, 3.0]), &[0.1, 0.1, 0.1], &params(6)).unwrap();
        assert_eq!(t.nodes(), &[Node::Leaf { value: 0.1, cover: 3 }]);
    }

    #[test]
    fn step_function_splits_at_midpoint() {
        // exhaustive SSE over midpoints 1.5, 2.5, 3.5 gives 2/3, 0, 2/3
        let t = fit_cart(&one_d(&[1.0, 2.0, 3.0, 4.0]), &[0.0, 0.0, 1.0, 1.0], &params(1)).unwrap();
        assert_eq!(
            t.nodes(),
            &[
                Node::Split { feature: 0, threshold: 2.5, left: 1, right: 2, cover: 4 },
                Node::Leaf { value: 0.0, cover: 2 },
                Node::Leaf { value: 1.0, cover: 2 },
            ]
        );
    }

    #[test]
    fn single_row_is_leaf() {
        let t = fit_cart(&one_d(&[5.0]), &[3.5], &params(3)).unwrap();
        assert_eq!(t.nodes(), &[Node::Leaf { value: 3.5, cover: 1 }]);
    }

    #[test]
    fn empty_data_is_an_error() {
        assert!(matches!(fit_cart(&one_d(&[]), &[], &params(3)), Err(TreeError::Domain(_))));
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = (0..10).map(|i| if i == 0 { 10.0 } else { 0.0 }).collect();
        let p = TreeFitParams { min_samples_leaf: 3, ..params(4) };
        let t = fit_cart(&one_d(&xs), &ys, &p).unwrap();
        for n in t.nodes() {
            assert!(n.cover() >= 3);
        }
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // both features induce the same partition
        let x = FeatureMatrix::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 10.0], vec![2.0, 20.0], vec![3.0, 30.0], vec![4.0, 40.0]],
        )
        .unwrap();
        let t = fit_cart(&x, &[0.0, 0.0, 1.0, 1.0], &params(1)).unwrap();
        assert!(matches!(t.root(), Node::Split { feature: 0, .. }));
    }

    #[test]
    fn deep_tree_interpolates_distinct_rows() {
        let xs: Vec<f64> = (0..20).map(|i| f64::from(i) * 0.37).collect();
        let ys: Vec<f64> = (0..20).map(|i| (f64::from(i) * 1.3).sin()).collect();
        let x = one_d(&xs);
        let t = fit_cart(&x, &ys, &params(64)).unwrap();
        for (row, y) in x.rows().zip(&ys) {
            assert_eq!(t.predict(row).unwrap(), *y);
        }
        t.validate().unwrap();
    }
}
