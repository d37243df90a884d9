//! Fireworks Algorithm minimizer and cross-validated hyperparameter tuning.

use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{MlpConfig, SvrConfig};
use crate::evaluation::{kfold_assignment, rmse, EvalError};
use crate::matrix::FeatureMatrix;
use crate::pipeline::{LeakageGuard, ModelFamily, ModelSpec, PipelineError};

#[derive(Debug, Error)]
pub enum HyperoptError {
    #[error("invalid search space: {0}")]
    Space(String),
    #[error("invalid optimizer configuration: {0}")]
    Config(String),
    #[error("objective returned {value} at {point:?}")]
    NonFinite { point: Vec<f64>, value: f64 },
    #[error("objective failed at {point:?}: {message}")]
    Objective { point: Vec<f64>, message: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimension {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub integer: bool,
}

impl Dimension {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64, integer: bool) -> Self {
        Self { name: name.into(), lower, upper, integer }
    }

    fn range(&self) -> f64 {
        self.upper - self.lower
    }

    /// Fold an out-of-range coordinate back into `[lower, upper]` modulo the range.
    fn wrap(&self, v: f64) -> f64 {
        if (self.lower..=self.upper).contains(&v) {
            v
        } else if self.range() == 0.0 {
            self.lower
        } else {
            self.lower + (v - self.lower).rem_euclid(self.range())
        }
    }

    fn finish(&self, v: f64) -> f64 {
        if self.integer {
            let r = v.round();
            r.clamp(self.lower.ceil(), self.upper.floor().max(self.lower.ceil()))
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchSpace {
    pub dims: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self, HyperoptError> {
        let s = Self { dims };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), HyperoptError> {
        if self.dims.is_empty() {
            return Err(HyperoptError::Space("no dimensions".into()));
        }
        for d in &self.dims {
            if !(d.lower.is_finite() && d.upper.is_finite()) {
                return Err(HyperoptError::Space(format!("`{}` has non-finite bounds", d.name)));
            }
            if d.lower > d.upper {
                return Err(HyperoptError::Space(format!("`{}` needs lower ≤ upper, got [{}, {}]", d.name, d.lower, d.upper)));
            }
            if d.integer && d.lower.ceil() > d.upper.floor() {
                return Err(HyperoptError::Space(format!("`{}` contains no integer", d.name)));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dims.len() && self.dims.iter().zip(p).all(|(d, &v)| v >= d.lower && v <= d.upper)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    fn finish(&self, p: &mut [f64]) {
        for (d, v) in self.dims.iter().zip(p.iter_mut()) {
            *v = d.finish(d.wrap(*v));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FwaConfig {
    pub n_fireworks: usize,
    /// Explosion sparks shared out per generation.
    pub total_sparks: usize,
    /// Largest explosion amplitude as a fraction of each dimension's range.
    pub amplitude_max: f64,
    pub n_gaussian: usize,
    pub s_min: usize,
    pub s_max: usize,
    pub eval_budget: usize,
    pub seed: u64,
    /// Points placed in the first generation before the random fireworks.
    pub initial: Vec<Vec<f64>>,
}

impl Default for FwaConfig {
    fn default() -> Self {
        Self {
            n_fireworks: 5,
            total_sparks: 50,
            amplitude_max: 0.4,
            n_gaussian: 5,
            s_min: 2,
            s_max: 40,
            eval_budget: 1000,
            seed: 0,
            initial: Vec::new(),
        }
    }
}

impl FwaConfig {
    pub fn validate(&self) -> Result<(), HyperoptError> {
        let bad = |m: String| Err(HyperoptError::Config(m));
        if self.n_fireworks == 0 || self.total_sparks == 0 {
            return bad("n_fireworks and total_sparks must be positive".into());
        }
        if self.s_min == 0 || self.s_min > self.s_max {
            return bad(format!("need 1 ≤ s_min ≤ s_max, got {} and {}", self.s_min, self.s_max));
        }
        if !(self.amplitude_max > 0.0 && self.amplitude_max.is_finite()) {
            return bad(format!("amplitude_max must be positive, got {}", self.amplitude_max));
        }
        if self.eval_budget < self.n_fireworks {
            return bad(format!("eval_budget {} is below n_fireworks {}", self.eval_budget, self.n_fireworks));
        }
        Ok(())
    }
}

/// Floor on explosion amplitude, as a fraction of the range.
const AMPLITUDE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub index: usize,
    pub point: Vec<f64>,
    pub value: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwaResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub history: Vec<Evaluation>,
}

impl FwaResult {
    pub fn write_history_csv<W: Write>(&self, mut out: W, space: &SearchSpace) -> std::io::Result<()> {
        let names: Vec<&str> = space.dims.iter().map(|d| d.name.as_str()).collect();
        writeln!(out, "evaluation,{},value,best_so_far", names.join(","))?;
        for e in &self.history {
            let p: Vec<String> = e.point.iter().map(f64::to_string).collect();
            writeln!(out, "{},{},{},{}", e.index, p.join(","), e.value, e.best_so_far)?;
        }
        Ok(())
    }
}

struct Recorder {
    history: Vec<Evaluation>,
    best: Option<(Vec<f64>, f64)>,
    budget: usize,
}

impl Recorder {
    fn remaining(&self) -> usize {
        self.budget - self.history.len()
    }

    /// Evaluate a generation concurrently, record in spark order.
    fn evaluate<F>(&mut self, objective: &F, points: Vec<Vec<f64>>) -> Result<Vec<(Vec<f64>, f64)>, HyperoptError>
    where
        F: Fn(&[f64]) -> Result<f64, HyperoptError> + Sync,
    {
        let values = points.par_iter().map(|p| objective(p)).collect::<Vec<_>>();
        let mut out = Vec::with_capacity(points.len());
        for (p, v) in points.into_iter().zip(values) {
            let v = v?;
            if !v.is_finite() {
                return Err(HyperoptError::NonFinite { point: p, value: v });
            }
            if self.best.as_ref().is_none_or(|(_, b)| v < *b) {
                self.best = Some((p.clone(), v));
            }
            let best_so_far = self.best.as_ref().map_or(v, |b| b.1);
            self.history.push(Evaluation { index: self.history.len(), point: p.clone(), value: v, best_so_far });
            out.push((p, v));
        }
        Ok(out)
    }
}

/// Minimize `objective` over `space` with the canonical Fireworks Algorithm.
pub fn fwa_minimize<F>(objective: F, space: &SearchSpace, cfg: &FwaConfig) -> Result<FwaResult, HyperoptError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fwa_minimize_fallible(|p| Ok(objective(p)), space, cfg)
}

/// [`fwa_minimize`] for objectives that can fail.
pub fn fwa_minimize_fallible<F>(objective: F, space: &SearchSpace, cfg: &FwaConfig) -> Result<FwaResult, HyperoptError>
where
    F: Fn(&[f64]) -> Result<f64, HyperoptError> + Sync,
{
    space.validate()?;
    cfg.validate()?;
    let d = space.dims.len();
    if let Some(p) = cfg.initial.iter().find(|p| p.len() != d) {
        return Err(HyperoptError::Config(format!("initial point {p:?} has wrong dimension")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gauss = Normal::new(1.0, 1.0).expect("unit normal");
    let mut rec = Recorder { history: Vec::new(), best: None, budget: cfg.eval_budget };

    let mut first: Vec<Vec<f64>> = cfg
        .initial
        .iter()
        .take(cfg.n_fireworks)
        .map(|p| p.iter().zip(&space.dims).map(|(&v, dim)| v.clamp(dim.lower, dim.upper)).collect())
        .collect();
    while first.len() < cfg.n_fireworks {
        first.push(space.dims.iter().map(|dim| rng.random_range(dim.lower..=dim.upper)).collect());
    }
    first.iter_mut().for_each(|p| space.finish(p));
    let mut fireworks = rec.evaluate(&objective, first)?;

    while rec.remaining() > 0 {
        let values: Vec<f64> = fireworks.iter().map(|f| f.1).collect();
        let y_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let y_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let xi = f64::EPSILON;
        let worse_sum: f64 = values.iter().map(|v| y_max - v).sum();
        let better_sum: f64 = values.iter().map(|v| v - y_min).sum();

        let mut sparks: Vec<Vec<f64>> = Vec::new();
        for (pos, value) in &fireworks {
            let share = cfg.total_sparks as f64 * (y_max - value + xi) / (worse_sum + xi);
            let count = (share.round() as usize).clamp(cfg.s_min, cfg.s_max);
            // offset scaled to the current spread keeps the best firework searching
            let xa = better_sum / fireworks.len() as f64 + xi;
            let amp = cfg.amplitude_max * (value - y_min + xa) / (better_sum + xa);
            for _ in 0..count {
                let mut s = pos.clone();
                let z = rng.random_range(1..=d);
                let shift = rng.random_range(-1.0..=1.0);
                for k in sample(&mut rng, d, z) {
                    let dim = &space.dims[k];
                    s[k] += shift * (amp * dim.range()).max(AMPLITUDE_FLOOR * dim.range());
                }
                sparks.push(s);
            }
        }
        for _ in 0..cfg.n_gaussian {
            let mut s = fireworks[rng.random_range(0..fireworks.len())].0.clone();
            let z = rng.random_range(1..=d);
            let g = gauss.sample(&mut rng);
            for k in sample(&mut rng, d, z) {
                s[k] *= g;
            }
            sparks.push(s);
        }
        sparks.iter_mut().for_each(|p| space.finish(p));
        sparks.truncate(rec.remaining());
        let evaluated = rec.evaluate(&objective, sparks)?;

        let mut pool = fireworks;
        pool.extend(evaluated);
        fireworks = select(pool, cfg.n_fireworks, space, &mut rng);
    }

    let (best_point, best_value) = rec.best.clone().expect("at least one evaluation");
    Ok(FwaResult { best_point, best_value, history: rec.history })
}

/// Keep the best candidate, then draw the rest with probability proportional
/// to their summed distance from the pool.
fn select(mut pool: Vec<(Vec<f64>, f64)>, n: usize, space: &SearchSpace, rng: &mut ChaCha8Rng) -> Vec<(Vec<f64>, f64)> {
    let best = (0..pool.len()).min_by(|&a, &b| pool[a].1.total_cmp(&pool[b].1)).expect("non-empty pool");
    let mut chosen = vec![pool.swap_remove(best)];
    let ranges: Vec<f64> = space.dims.iter().map(Dimension::range).collect();
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).zip(&ranges).filter(|(_, r)| **r > 0.0).map(|((x, y), r)| ((x - y) / r).powi(2)).sum::<f64>().sqrt()
    };
    let mut weights: Vec<f64> = pool
        .iter()
        .map(|(p, _)| pool.iter().map(|(q, _)| dist(p, q)).sum::<f64>() + dist(p, &chosen[0].0))
        .collect();
    while chosen.len() < n && !pool.is_empty() {
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            let mut k = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if u < *w {
                    k = i;
                    break;
                }
                u -= w;
            }
            k
        } else {
            rng.random_range(0..pool.len())
        };
        weights.swap_remove(pick);
        chosen.push(pool.swap_remove(pick));
    }
    chosen
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuneFamily {
    Svr,
    Mlp,
}

impl TuneFamily {
    /// Default search space: (ε, C) for SVR, (layers, neurons) for MLP.
    pub fn default_space(self) -> SearchSpace {
        match self {
            TuneFamily::Svr => SearchSpace {
                dims: vec![Dimension::new("epsilon", 0.01, 1.0, false), Dimension::new("c", 0.1, 100.0, false)],
            },
            TuneFamily::Mlp => SearchSpace {
                dims: vec![Dimension::new("layers", 1.0, 2.0, true), Dimension::new("neurons", 10.0, 100.0, true)],
            },
        }
    }

    /// The untuned defaults expressed in `space` coordinates, if every coordinate is named there.
    pub fn default_point(self, space: &SearchSpace, base: &ModelSpec) -> Option<Vec<f64>> {
        space
            .dims
            .iter()
            .map(|d| match (self, d.name.as_str()) {
                (TuneFamily::Svr, "epsilon") => Some(base.svr.epsilon),
                (TuneFamily::Svr, "c") => Some(base.svr.c),
                (TuneFamily::Svr, "gamma") => base.svr.gamma,
                (TuneFamily::Mlp, "layers") => Some(base.mlp.hidden_layers.len() as f64),
                (TuneFamily::Mlp, "neurons") => base.mlp.hidden_layers.first().map(|&w| w as f64),
                _ => None,
            })
            .collect()
    }

    /// Apply a point to a copy of `base`.
    pub fn apply(self, space: &SearchSpace, point: &[f64], base: &ModelSpec) -> Result<ModelSpec, HyperoptError> {
        let mut spec = base.clone();
        match self {
            TuneFamily::Svr => {
                spec.family = ModelFamily::Svr;
                spec.standardize = true;
                for (d, &v) in space.dims.iter().zip(point) {
                    match d.name.as_str() {
                        "epsilon" => spec.svr.epsilon = v,
                        "c" => spec.svr.c = v,
                        "gamma" => spec.svr.gamma = Some(v),
                        other => return Err(HyperoptError::Space(format!("SVR has no hyperparameter `{other}`"))),
                    }
                }
            }
            TuneFamily::Mlp => {
                spec.family = ModelFamily::Mlp;
                spec.standardize = true;
                let mut layers = spec.mlp.hidden_layers.len();
                let mut width = spec.mlp.hidden_layers.first().copied().unwrap_or(100);
                for (d, &v) in space.dims.iter().zip(point) {
                    match d.name.as_str() {
                        "layers" => layers = v.round().max(1.0) as usize,
                        "neurons" => width = v.round().max(1.0) as usize,
                        other => return Err(HyperoptError::Space(format!("MLP has no hyperparameter `{other}`"))),
                    }
                }
                spec.mlp.hidden_layers = vec![width; layers];
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub family: TuneFamily,
    pub names: Vec<String>,
    pub best_point: Vec<f64>,
    pub best_cv_rmse: f64,
    pub best_spec: ModelSpec,
    pub fwa: FwaResult,
}

/// Mean RMSE over a shuffled 5-fold split, scaling fitted inside each training part.
pub fn cv_rmse(spec: &ModelSpec, x: &FeatureMatrix, y: &[f64], folds: usize, seed: u64) -> Result<f64, HyperoptError> {
    let assignment = kfold_assignment(x.n_rows(), folds, seed)?;
    let mut total = 0.0;
    for f in 0..folds {
        let test: Vec<usize> = (0..x.n_rows()).filter(|&r| assignment[r] == f).collect();
        let train: Vec<usize> = (0..x.n_rows()).filter(|&r| assignment[r] != f).collect();
        let model = spec
            .fit_rows(x, y, &train, &LeakageGuard::new(test.iter().copied()), seed)
            .map_err(EvalError::Pipeline)?;
        let xt = x.select_rows(&test).map_err(|e| EvalError::Pipeline(PipelineError::from(e)))?;
        let pred = model.predict(&xt).map_err(EvalError::Pipeline)?;
        let truth: Vec<f64> = test.iter().map(|&r| y[r]).collect();
        total += rmse(&truth, &pred)?;
    }
    Ok(total / folds as f64)
}

pub const TUNE_FOLDS: usize = 5;

/// Seed of the internal CV split, derived from the optimizer seed.
pub fn tune_cv_seed(seed: u64) -> u64 {
    seed ^ 0x5eed_cf01_d5a1_7e55
}

/// Tune SVR or MLP hyperparameters by minimizing 5-fold CV RMSE with FWA.
/// The untuned defaults join the first generation when they lie inside `space`.
pub fn tune_model(
    family: TuneFamily,
    x: &FeatureMatrix,
    y: &[f64],
    space: &SearchSpace,
    base: &ModelSpec,
    cfg: &FwaConfig,
) -> Result<TuneResult, HyperoptError> {
    space.validate()?;
    let cv_seed = tune_cv_seed(cfg.seed);
    let objective = |p: &[f64]| -> Result<f64, HyperoptError> {
        let spec = family.apply(space, p, base)?;
        cv_rmse(&spec, x, y, TUNE_FOLDS, cv_seed).map_err(|e| HyperoptError::Objective { point: p.to_vec(), message: e.to_string() })
    };
    family.apply(space, &space.dims.iter().map(|d| d.lower).collect::<Vec<_>>(), base)?;
    let mut cfg = cfg.clone();
    if cfg.initial.is_empty() {
        if let Some(p) = family.default_point(space, base).filter(|p| space.contains(p)) {
            cfg.initial.push(p);
        }
    }
    let fwa = fwa_minimize_fallible(objective, space, &cfg)?;
    let best_spec = family.apply(space, &fwa.best_point, base)?;
    Ok(TuneResult {
        family,
        names: space.dims.iter().map(|d| d.name.clone()).collect(),
        best_point: fwa.best_point.clone(),
        best_cv_rmse: fwa.best_value,
        best_spec,
        fwa,
    })
}

/// SVR and MLP defaults used as the tuning starting point.
pub fn default_base(family: TuneFamily) -> ModelSpec {
    let mut spec = ModelSpec::preset(match family {
        TuneFamily::Svr => ModelFamily::Svr,
        TuneFamily::Mlp => ModelFamily::Mlp,
    });
    spec.svr = SvrConfig::default();
    spec.mlp = MlpConfig::default();
    spec
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(p: &[f64]) -> f64 {
        p.iter().map(|v| v * v).sum()
    }

    fn cube(d: usize, lo: f64, hi: f64) -> SearchSpace {
        SearchSpace::new((0..d).map(|i| Dimension::new(format!("x{i}"), lo, hi, false)).collect()).unwrap()
    }

    fn check_invariants(r: &FwaResult, space: &SearchSpace, budget: usize) {
        assert!(r.history.len() <= budget);
        for w in r.history.windows(2) {
            assert!(w[1].best_so_far <= w[0].best_so_far);
        }
        for e in &r.history {
            assert!(space.contains(&e.point), "{:?} out of bounds", e.point);
        }
        assert_eq!(r.history.last().unwrap().best_so_far, r.best_value);
    }

    #[test]
    fn constant_objective_is_flat() {
        let space = cube(3, -1.0, 1.0);
        let r = fwa_minimize(|_| 4.0, &space, &FwaConfig { eval_budget: 100, ..FwaConfig::default() }).unwrap();
        assert_eq!(r.best_value, 4.0);
        assert!(r.history.iter().all(|e| e.best_so_far == 4.0));
        check_invariants(&r, &space, 100);
    }

    #[test]
    fn one_dimensional_quadratic() {
        let space = cube(1, 0.0, 10.0);
        let hits = (0..10)
            .filter(|&seed| {
                let cfg = FwaConfig { eval_budget: 500, seed, ..FwaConfig::default() };
                let r = fwa_minimize(|p| (p[0] - 3.0).powi(2), &space, &cfg).unwrap();
                check_invariants(&r, &space, 500);
                (r.best_point[0] - 3.0).abs() < 0.05
            })
            .count();
        assert!(hits >= 9, "{hits}/10 seeds");
    }

    #[test]
    fn ten_dimensional_sphere() {
        let space = cube(10, -5.0, 5.0);
        let hits = (0..10)
            .filter(|&seed| {
                let cfg = FwaConfig { eval_budget: 5000, seed, ..FwaConfig::default() };
                let r = fwa_minimize(sphere, &space, &cfg).unwrap();
                check_invariants(&r, &space, 5000);
                r.best_value < 1e-2
            })
            .count();
        assert!(hits >= 9, "{hits}/10 seeds");
    }

    #[test]
    fn seeded_runs_repeat() {
        let space = cube(4, -2.0, 3.0);
        let cfg = FwaConfig { eval_budget: 300, seed: 42, ..FwaConfig::default() };
        let a = fwa_minimize(sphere, &space, &cfg).unwrap();
        let b = fwa_minimize(sphere, &space, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn integer_dimensions_are_rounded() {
        let space = SearchSpace::new(vec![Dimension::new("n", 1.0, 20.0, true), Dimension::new("x", 0.0, 1.0, false)]).unwrap();
        let r = fwa_minimize(|p| (p[0] - 7.0).abs() + p[1], &space, &FwaConfig { eval_budget: 200, ..FwaConfig::default() }).unwrap();
        assert!(r.history.iter().all(|e| e.point[0].fract() == 0.0));
        assert_eq!(r.best_point[0], 7.0);
    }

    #[test]
    fn non_finite_objective_reports_point() {
        let space = cube(2, 0.0, 1.0);
        let err = fwa_minimize(|_| f64::NAN, &space, &FwaConfig::default()).unwrap_err();
        assert!(matches!(err, HyperoptError::NonFinite { ref point, .. } if point.len() == 2));
    }

    #[test]
    fn config_and_space_validation() {
        assert!(SearchSpace::new(vec![Dimension::new("a", 2.0, 1.0, false)]).is_err());
        assert!(SearchSpace::new(vec![Dimension::new("a", 1.0, 1.0, false)]).is_ok());
        assert!(SearchSpace::new(vec![Dimension::new("a", 0.0, f64::INFINITY, false)]).is_err());
        let space = cube(1, 0.0, 1.0);
        assert!(fwa_minimize(sphere, &space, &FwaConfig { eval_budget: 0, ..FwaConfig::default() }).is_err());
        assert!(fwa_minimize(sphere, &space, &FwaConfig { s_min: 5, s_max: 2, ..FwaConfig::default() }).is_err());
    }

    #[test]
    fn budget_smaller_than_a_generation_is_respected() {
        let space = cube(2, -1.0, 1.0);
        for budget in [5, 6, 17, 61] {
            let r = fwa_minimize(sphere, &space, &FwaConfig { eval_budget: budget, ..FwaConfig::default() }).unwrap();
            assert_eq!(r.history.len(), budget);
        }
    }

    fn toy_data() -> (FeatureMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random_range(0.0..10.0), rng.random_range(20.0..40.0)]).collect();
        let y = rows.iter().map(|r| (r[0] * 0.6).sin() + 0.05 * r[1] + rng.random_range(-0.1..0.1)).collect();
        (FeatureMatrix::new(vec!["a".into(), "b".into()], rows).unwrap(), y)
    }

    #[test]
    fn collapsed_space_returns_its_point() {
        let (x, y) = toy_data();
        let space = SearchSpace::new(vec![
            Dimension::new("epsilon", 0.1, 0.1, false),
            Dimension::new("c", 5.0, 5.0, false),
        ])
        .unwrap();
        let cfg = FwaConfig { eval_budget: 12, ..FwaConfig::default() };
        let r = tune_model(TuneFamily::Svr, &x, &y, &space, &default_base(TuneFamily::Svr), &cfg).unwrap();
        assert_eq!(r.best_point, vec![0.1, 5.0]);
        assert!(r.fwa.history.iter().all(|e| e.point == [0.1, 5.0]));
    }

    #[test]
    fn svr_tuning_is_no_worse_than_defaults() {
        let (x, y) = toy_data();
        let base = default_base(TuneFamily::Svr);
        let space = TuneFamily::Svr.default_space();
        let cfg = FwaConfig { eval_budget: 40, seed: 1, ..FwaConfig::default() };
        let r = tune_model(TuneFamily::Svr, &x, &y, &space, &base, &cfg).unwrap();
        let defaults = cv_rmse(&base, &x, &y, TUNE_FOLDS, tune_cv_seed(1)).unwrap();
        assert!(r.best_cv_rmse <= defaults);
        assert_eq!(r.fwa.history[0].point, vec![0.23, 20.0]);
    }

    #[test]
    fn unknown_hyperparameter_is_rejected() {
        let (x, y) = toy_data();
        let space = SearchSpace::new(vec![Dimension::new("depth", 1.0, 5.0, true)]).unwrap();
        let r = tune_model(TuneFamily::Svr, &x, &y, &space, &default_base(TuneFamily::Svr), &FwaConfig::default());
        assert!(matches!(r, Err(HyperoptError::Space(_))));
    }
}
