//! ε-SVR solved in its dual with two-coefficient SMO steps.
//!
//! The 2n-variable form follows the usual libsvm layout: variable `t < n` is
//! `α_t` with label +1 and linear term `ε − y_t`, variable `t ≥ n` is `α*_{t−n}`
//! with label −1 and linear term `ε + y_{t−n}`. Working pairs are chosen by
//! maximal violation for the first index and second-order gain for the second.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_header, check_training_input, BaselineError};
use crate::matrix::FeatureMatrix;

pub const SVR_FORMAT: &str = "fibpred-svr";
pub const SVR_VERSION: u32 = 1;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvrConfig {
    pub epsilon: f64,
    pub c: f64,
    /// RBF width; `None` uses `1 / (M · pooled feature variance)`.
    pub gamma: Option<f64>,
    pub tol: f64,
    /// Upper bound on SMO iterations.
    pub max_passes: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self { epsilon: 0.23, c: 20.0, gamma: None, tol: 1e-3, max_passes: 10_000_000 }
    }
}

impl SvrConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(BaselineError::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("c", self.c)?;
        positive("tol", self.tol)?;
        if let Some(g) = self.gamma {
            positive("gamma", g)?;
        }
        if self.max_passes == 0 {
            return Err(BaselineError::Config("max_passes must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub gamma: f64,
    pub bias: f64,
    pub n_features: usize,
    /// Support rows, row-major.
    pub support: Vec<f64>,
    /// `β_i = α_i − α*_i` per support row.
    pub coef: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SvrDoc {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: SvrModel,
}

pub fn rbf_kernel(x: &[f64], z: &[f64], gamma: f64) -> Result<f64, BaselineError> {
    if x.len() != z.len() {
        return Err(BaselineError::Dimension { expected: x.len(), got: z.len() });
    }
    Ok(rbf(x, z, gamma))
}

fn rbf(x: &[f64], z: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// `1 / (M · var(X))` over all entries, falling back to 1 for constant data.
pub fn scale_gamma(x: &FeatureMatrix) -> f64 {
    let flat = x.as_flat();
    if flat.is_empty() || x.n_cols() == 0 {
        return 1.0;
    }
    let n = flat.len() as f64;
    let mean = flat.iter().sum::<f64>() / n;
    let var = flat.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (x.n_cols() as f64 * var)
    } else {
        1.0
    }
}

/// Full n×n RBF Gram matrix, row-major.
pub fn kernel_matrix(x: &FeatureMatrix, gamma: f64) -> Vec<f64> {
    let n = x.n_rows();
    let mut k = vec![0.0; n * n];
    k.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        let xi = x.row(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = rbf(xi, x.row(j), gamma);
        }
    });
    k
}

/// `½ βᵀKβ − yᵀβ + ε Σ|β_i|`, the quantity the dual solver minimizes.
pub fn dual_objective(k: &[f64], y: &[f64], epsilon: f64, beta: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if beta[i] == 0.0 {
            continue;
        }
        let row = &k[i * n..(i + 1) * n];
        quad += beta[i] * row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
    }
    0.5 * quad - y.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + epsilon * beta.iter().map(|b| b.abs()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub beta: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Final maximal KKT violation `m(α) − M(α)`.
    pub violation: f64,
}

/// Solve the ε-SVR dual for a precomputed kernel matrix.
pub fn solve_svr_dual(
    k: &[f64],
    y: &[f64],
    epsilon: f64,
    c: f64,
    tol: f64,
    max_iter: usize,
) -> Result<DualSolution, BaselineError> {
    let n = y.len();
    if k.len() != n * n {
        return Err(BaselineError::Dimension { expected: n * n, got: k.len() });
    }
    if n == 0 {
        return Err(BaselineError::Domain("cannot fit on empty data".into()));
    }
    let l = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let kd = |a: usize, b: usize| k[(a % n) * n + b % n];
    let mut alpha = vec![0.0; l];
    let mut grad: Vec<f64> = (0..l).map(|t| if t < n { epsilon - y[t] } else { epsilon + y[t - n] }).collect();

    let mut iterations = 0;
    let violation = loop {
        // first index: maximal -y_t G_t over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..l {
            let up = if t < n { alpha[t] < c } else { alpha[t] > 0.0 };
            let v = -sign(t) * grad[t];
            if up && v >= gmax {
                gmax = v;
                i = t;
            }
        }
        // second index: best second-order gain over I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..l {
            let low = if t < n { alpha[t] > 0.0 } else { alpha[t] < c };
            if !low {
                continue;
            }
            let v = sign(t) * grad[t];
            gmax2 = gmax2.max(v);
            if i == usize::MAX {
                continue;
            }
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = kd(i, i) + kd(t, t) - 2.0 * kd(i, t);
                let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best_obj {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        let violation = gmax + gmax2;
        if violation < tol || i == usize::MAX || j == usize::MAX {
            break violation.max(0.0);
        }
        if iterations >= max_iter {
            return Err(BaselineError::NonConvergence { iterations, violation });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (yi, yj) = (sign(i), sign(j));
        let q_ij = yi * yj * kd(i, j);
        let (mut ai, mut aj) = (old_i, old_j);
        if yi != yj {
            let quad = kd(i, i) + kd(j, j) + 2.0 * q_ij;
            let delta = (-grad[i] - grad[j]) / if quad > 0.0 { quad } else { TAU };
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = kd(i, i) + kd(j, j) - 2.0 * q_ij;
            let delta = (grad[i] - grad[j]) / if quad > 0.0 { quad } else { TAU };
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            let yt = sign(t);
            *g += yi * yt * kd(i, t) * di + yj * yt * kd(j, t) * dj;
        }
    };

    // bias from free variables, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..l {
        let yg = sign(t) * grad[t];
        let positive = t < n;
        if alpha[t] >= c {
            if positive {
                lb = lb.max(yg);
            } else {
                ub = ub.min(yg);
            }
        } else if alpha[t] <= 0.0 {
            if positive {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { 0.5 * (ub + lb) };
    let beta = (0..n).map(|i| alpha[i] - alpha[i + n]).collect();
    Ok(DualSolution { beta, bias: -rho, iterations, violation })
}

pub fn fit_svr(x: &FeatureMatrix, y: &[f64], cfg: &SvrConfig) -> Result<SvrModel, BaselineError> {
    cfg.validate()?;
    check_training_input(x, y, 2)?;
    let gamma = cfg.gamma.unwrap_or_else(|| scale_gamma(x));
    let k = kernel_matrix(x, gamma);
    let sol = solve_svr_dual(&k, y, cfg.epsilon, cfg.c, cfg.tol, cfg.max_passes)?;
    log::debug!("svr converged in {} iterations, violation {:.2e}", sol.iterations, sol.violation);
    let mut support = Vec::new();
    let mut coef = Vec::new();
    for (i, &b) in sol.beta.iter().enumerate() {
        if b != 0.0 {
            support.extend_from_slice(x.row(i));
            coef.push(b);
        }
    }
    Ok(SvrModel { gamma, bias: sol.bias, n_features: x.n_cols(), support, coef })
}

impl SvrModel {
    pub fn n_support(&self) -> usize {
        self.coef.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, BaselineError> {
        if x.len() != self.n_features {
            return Err(BaselineError::Dimension { expected: self.n_features, got: x.len() });
        }
        let m = self.n_features;
        let s: f64 = self
            .coef
            .iter()
            .enumerate()
            .map(|(i, b)| b * rbf(&self.support[i * m..(i + 1) * m], x, self.gamma))
            .sum();
        Ok(s + self.bias)
    }

    pub fn predict_batch(&self, x: &FeatureMatrix) -> Result<Vec<f64>, BaselineError> {
        x.rows().collect::<Vec<_>>().par_iter().map(|r| self.predict(r)).collect()
    }

    pub fn to_json(&self) -> String {
        let doc = SvrDoc { format: SVR_FORMAT.into(), version: SVR_VERSION, model: self.clone() };
        serde_json::to_string(&doc).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, BaselineError> {
        let value: serde_json::Value = serde_json::from_str(s).map_err(|e| BaselineError::Corrupt(e.to_string()))?;
        check_header(&value, SVR_FORMAT, SVR_VERSION)?;
        let doc: SvrDoc = serde_json::from_value(value).map_err(|e| BaselineError::Corrupt(e.to_string()))?;
        let m = doc.model;
        if m.support.len() != m.coef.len() * m.n_features {
            return Err(BaselineError::Corrupt("support rows do not match coefficient count".into()));
        }
        Ok(m)
    }
}

pub fn predict_svr(m: &SvrModel, x: &[f64]) -> Result<f64, BaselineError> {
    m.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn standardized(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let m = rows.first().map_or(0, Vec::len);
        FeatureMatrix::from_standardized_rows((0..m).map(|i| format!("f{i}")).collect(), rows).unwrap()
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(rbf_kernel(&[0.3, -2.0], &[0.3, -2.0], 0.7).unwrap(), 1.0);
        let v = rbf_kernel(&[0.0, 0.0], &[1.0, 1.0], 0.5).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[3.0, 5.0], 0.1).unwrap(), rbf_kernel(&[3.0, 5.0], &[1.0, 2.0], 0.1).unwrap());
        assert!(matches!(rbf_kernel(&[1.0], &[1.0, 2.0], 1.0), Err(BaselineError::Dimension { .. })));
    }

    #[test]
    fn constant_target_has_no_support_vectors() {
        let x = standardized((0..8).map(|i| vec![f64::from(i) * 0.2 - 0.7]).collect());
        let m = fit_svr(&x, &[1.7; 8], &SvrConfig::default()).unwrap();
        assert_eq!(m.n_support(), 0);
        assert!((m.bias - 1.7).abs() < 1e-12);
    }

    #[test]
    fn wide_tube_swallows_data() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let x = standardized(xs.iter().map(|&v| vec![v]).collect());
        let cfg = SvrConfig { epsilon: 5.0, ..SvrConfig::default() };
        let m = fit_svr(&x, &xs, &cfg).unwrap();
        assert_eq!(m.n_support(), 0);
        // feasible bias interval is centred on the mean for evenly spaced targets
        assert!((m.bias - 3.0).abs() < 1e-12);
    }

    #[test]
    fn refuses_raw_features() {
        let x = FeatureMatrix::new(vec!["a".into()], vec![vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(fit_svr(&x, &[1.0, 2.0], &SvrConfig::default()), Err(BaselineError::Pipeline(_))));
    }

    #[test]
    fn prediction_examples() {
        let empty = SvrModel { gamma: 1.0, bias: 0.4, n_features: 2, support: vec![], coef: vec![] };
        assert_eq!(empty.predict(&[3.0, 1.0]).unwrap(), 0.4);
        let one = SvrModel { gamma: 0.3, bias: 0.0, n_features: 2, support: vec![1.0, -1.0], coef: vec![1.0] };
        assert_eq!(one.predict(&[1.0, -1.0]).unwrap(), 1.0);
        let pair =
            SvrModel { gamma: 0.3, bias: 0.25, n_features: 1, support: vec![-1.5, 1.5], coef: vec![1.0, -1.0] };
        assert_eq!(pair.predict(&[0.0]).unwrap(), 0.25);
        assert!(pair.predict(&[0.0, 1.0]).is_err());
    }

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (FeatureMatrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y = rows.iter().map(|r| r[0].sin() + 0.5 * r[m - 1] + rng.random_range(-0.3..0.3)).collect();
        (standardized(rows), y)
    }

    #[test]
    fn kkt_conditions_hold_after_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let (x, y) = random_problem(&mut rng, 10 + trial, 2);
            let cfg = SvrConfig { epsilon: 0.2, c: 2.0, tol: 1e-6, ..SvrConfig::default() };
            let gamma = scale_gamma(&x);
            let sol = solve_svr_dual(&kernel_matrix(&x, gamma), &y, cfg.epsilon, cfg.c, cfg.tol, 1_000_000).unwrap();
            assert!(sol.beta.iter().sum::<f64>().abs() < 1e-8);
            let model = fit_svr(&x, &y, &cfg).unwrap();
            for (i, b) in sol.beta.iter().enumerate() {
                assert!(b.abs() <= cfg.c + 1e-9);
                let r = (model.predict(x.row(i)).unwrap() - y[i]).abs();
                if r < cfg.epsilon - cfg.tol {
                    assert_eq!(*b, 0.0, "in-tube point {i} has coefficient {b}");
                }
                if b.abs() >= cfg.c {
                    assert!(r >= cfg.epsilon - cfg.tol);
                }
            }
        }
    }

    /// Minimum of the dual over all sign/bound patterns: each coefficient is
    /// pinned at −C, 0 or +C, or free with a fixed sign, and the free block
    /// is solved from its stationarity system with the equality multiplier.
    fn active_set_reference(k: &[f64], y: &[f64], eps: f64, c: f64) -> f64 {
        let n = y.len();
        let mut best = f64::INFINITY;
        let mut pattern = vec![0u8; n];
        loop {
            let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 1 || pattern[i] == 3).collect();
            let mut beta: Vec<f64> = pattern.iter().map(|&p| match p { 0 => -c, 4 => c, _ => 0.0 }).collect();
            let fixed_sum: f64 = beta.iter().sum();
            let f = free.len();
            // [K_FF 1; 1ᵀ 0] [β_F; λ] = [y_F − εσ_F − K_F,fixed β_fixed; −Σβ_fixed]
            let dim = f + 1;
            let mut a = vec![0.0; dim * (dim + 1)];
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[r * (dim + 1) + s] = k[i * n + j];
                }
                a[r * (dim + 1) + f] = 1.0;
                let sigma = if pattern[i] == 3 { 1.0 } else { -1.0 };
                let cross: f64 = (0..n).filter(|j| !free.contains(j)).map(|j| k[i * n + j] * beta[j]).sum();
                a[r * (dim + 1) + dim] = y[i] - eps * sigma - cross;
                a[f * (dim + 1) + r] = 1.0;
            }
            a[f * (dim + 1) + dim] = -fixed_sum;
            let feasible = if f == 0 {
                fixed_sum.abs() < 1e-12
            } else if let Some(sol) = gauss(&mut a, dim) {
                let mut ok = true;
                for (r, &i) in free.iter().enumerate() {
                    let v = sol[r];
                    let sigma = if pattern[i] == 3 { 1.0 } else { -1.0 };
                    ok &= sigma * v >= -1e-12 && v.abs() <= c + 1e-12;
                    beta[i] = v;
                }
                ok
            } else {
                false
            };
            if feasible {
                best = best.min(dual_objective(k, y, eps, &beta));
            }
            let mut d = 0;
            while d < n && pattern[d] == 4 {
                pattern[d] = 0;
                d += 1;
            }
            if d == n {
                break;
            }
            pattern[d] += 1;
        }
        best
    }

    fn gauss(a: &mut [f64], dim: usize) -> Option<Vec<f64>> {
        let w = dim + 1;
        for col in 0..dim {
            let piv = (col..dim).max_by(|&p, &q| a[p * w + col].abs().total_cmp(&a[q * w + col].abs()))?;
            if a[piv * w + col].abs() < 1e-14 {
                return None;
            }
            for c in 0..w {
                a.swap(col * w + c, piv * w + c);
            }
            for r in 0..dim {
                if r != col {
                    let factor = a[r * w + col] / a[col * w + col];
                    for c in col..w {
                        a[r * w + c] -= factor * a[col * w + c];
                    }
                }
            }
        }
        Some((0..dim).map(|r| a[r * w + dim] / a[r * w + r]).collect())
    }

    #[test]
    fn six_point_dual_matches_active_set_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..5 {
            let (x, y) = random_problem(&mut rng, 6, 2);
            let c = [0.5, 1.0, 3.0, 20.0, 0.2][trial];
            let k = kernel_matrix(&x, 0.5);
            let sol = solve_svr_dual(&k, &y, 0.1, c, 1e-9, 1_000_000).unwrap();
            let reference = active_set_reference(&k, &y, 0.1, c);
            let got = dual_objective(&k, &y, 0.1, &sol.beta);
            assert!((got - reference).abs() < 1e-6, "trial {trial}: {got} vs {reference}");
        }
    }

    #[test]
    fn non_convergence_reports_violation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, y) = random_problem(&mut rng, 30, 2);
        let err = solve_svr_dual(&kernel_matrix(&x, 1.0), &y, 0.01, 100.0, 1e-12, 3).unwrap_err();
        match err {
            BaselineError::NonConvergence { iterations, violation } => {
                assert_eq!(iterations, 3);
                assert!(violation > 0.0);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (x, y) = random_problem(&mut rng, 25, 3);
        let m = fit_svr(&x, &y, &SvrConfig::default()).unwrap();
        let s = m.to_json();
        let back = SvrModel::from_json(&s).unwrap();
        assert_eq!(back, m);
        for r in x.rows() {
            assert_eq!(back.predict(r).unwrap().to_bits(), m.predict(r).unwrap().to_bits());
        }
        let bumped = s.replace("\"version\":1", "\"version\":7");
        assert!(matches!(SvrModel::from_json(&bumped), Err(BaselineError::Version { .. })));
        assert!(matches!(SvrModel::from_json(&s[..s.len() / 2]), Err(BaselineError::Corrupt(_))));
    }
}
