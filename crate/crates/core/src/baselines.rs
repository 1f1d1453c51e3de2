//! Competing row-potential strategies. Each returns a raw `u_hat`; the
//! min trick downstream turns any of them into a feasible seed.

use crate::datagen::instance_rng;
use crate::matrix::CostMatrix;
use crate::net::LabeledInstance;
use crate::warmstart::{min_trick, FeatureDim, FeatureMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("training vectors have mismatched lengths ({expected} vs {got})")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no training data")]
    Empty,
    #[error("normal equations are singular")]
    SingularSystem,
}

/// `u_i = mean(C[i, :])`.
pub fn seed_row_mean(c: &CostMatrix) -> Vec<f64> {
    let n = c.n() as f64;
    c.rows().map(|r| r.iter().sum::<f64>() / n).collect()
}

/// `u_i ~ U(0, 1)`, deterministic per seed.
pub fn seed_random(c: &CostMatrix, seed: u64) -> Vec<f64> {
    let mut rng = instance_rng(seed, 2);
    (0..c.n()).map(|_| rng.random::<f64>()).collect()
}

/// Affine map `u_i = w . x_i + b` over feature rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub feature_dim: FeatureDim,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(feature_dim: FeatureDim) -> Self {
        Self {
            feature_dim,
            weights: vec![0.0; feature_dim.width()],
            bias: 0.0,
        }
    }

    /// Flattened as `[weights..., bias]` for named dataset records.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.push(self.bias);
        v
    }

    pub fn from_vec(v: &[f64]) -> Option<Self> {
        let (bias, weights) = v.split_last()?;
        Some(Self {
            feature_dim: FeatureDim::from_width(weights.len())?,
            weights: weights.to_vec(),
            bias: *bias,
        })
    }
}

/// Least squares over `(feature row, u*)` pairs pooled from all instances,
/// solved through the normal equations with a `ridge` diagonal term.
pub fn train_linreg_samples(
    rows: &[Vec<f64>],
    targets: &[f64],
    ridge: f64,
) -> Result<Vec<f64>, BaselineError> {
    let Some(first) = rows.first() else {
        return Err(BaselineError::Empty);
    };
    let d = first.len() + 1;
    let mut xtx = DMatrix::<f64>::zeros(d, d);
    let mut xty = DVector::<f64>::zeros(d);
    let mut x = DVector::<f64>::zeros(d);
    for (row, &y) in rows.iter().zip(targets) {
        if row.len() + 1 != d {
            return Err(BaselineError::DimensionMismatch {
                expected: d - 1,
                got: row.len(),
            });
        }
        x.rows_mut(0, d - 1).copy_from_slice(row);
        x[d - 1] = 1.0;
        xtx.ger(1.0, &x, &x, 1.0);
        xty.axpy(y, &x, 1.0);
    }
    for k in 0..d {
        xtx[(k, k)] += ridge;
    }
    let sol = match xtx.clone().cholesky() {
        Some(ch) => ch.solve(&xty),
        None => xtx.lu().solve(&xty).ok_or(BaselineError::SingularSystem)?,
    };
    Ok(sol.iter().copied().collect())
}

pub fn train_linreg(
    dataset: &[LabeledInstance],
    feature_dim: FeatureDim,
) -> Result<LinearModel, BaselineError> {
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for inst in dataset {
        let f = inst.features.truncated(feature_dim);
        for i in 0..inst.n() {
            rows.push(f.row(i).to_vec());
            targets.push(inst.u_star[i]);
        }
    }
    let coef = train_linreg_samples(&rows, &targets, 1e-8)?;
    Ok(LinearModel::from_vec(&coef).expect("width matches feature mode"))
}

pub fn seed_linreg(f: &FeatureMatrix, model: &LinearModel) -> Vec<f64> {
    (0..f.n())
        .map(|i| {
            f.row(i)
                .iter()
                .zip(&model.weights)
                .map(|(x, w)| x * w)
                .sum::<f64>()
                + model.bias
        })
        .collect()
}

/// Coordinate-wise lower median of gauge-fixed training potentials.
pub fn seed_learned_median(training_duals: &[Vec<f64>]) -> Result<Vec<f64>, BaselineError> {
    let Some(first) = training_duals.first() else {
        return Err(BaselineError::Empty);
    };
    let n = first.len();
    if let Some(bad) = training_duals.iter().find(|v| v.len() != n) {
        return Err(BaselineError::DimensionMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    let m = training_duals.len();
    let mut column = vec![0.0; m];
    Ok((0..n)
        .map(|i| {
            for (slot, v) in column.iter_mut().zip(training_duals) {
                *slot = v[i];
            }
            let mid = (m - 1) / 2;
            *column.select_nth_unstable_by(mid, f64::total_cmp).1
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubgradientConfig {
    pub time_budget_ns: u64,
    /// Initial step; `None` means `range(C) / 10`.
    pub step0: Option<f64>,
    /// Optional iteration cap, for runs that must be reproducible.
    pub max_iters: Option<usize>,
}

impl Default for SubgradientConfig {
    fn default() -> Self {
        Self {
            time_budget_ns: 1_000_000,
            step0: None,
            max_iters: None,
        }
    }
}

/// Trace of a subgradient run.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientRun {
    pub u: Vec<f64>,
    pub best_objective: f64,
    /// Best objective seen after each iteration (index 0 is the start).
    pub history: Vec<f64>,
}

/// Subgradient of `g(u) = sum(u) + sum_j min_i (C[i][j] - u[i])` at `u`:
/// `1 - |{j : argmin_i (C[i][j] - u[i]) = i}|` with lowest-index ties.
pub fn dual_subgradient(c: &CostMatrix, u: &[f64]) -> (f64, Vec<f64>) {
    let mt = min_trick(c, u);
    let mut g = vec![1.0; c.n()];
    for &i in &mt.argmin {
        g[i] -= 1.0;
    }
    (mt.duals.objective(), g)
}

/// Time-bounded projected subgradient ascent on the reduced dual, started
/// from the row minima with step `step0 / sqrt(t)`. Returns the best iterate.
pub fn seed_subgradient_run(c: &CostMatrix, cfg: &SubgradientConfig) -> SubgradientRun {
    let start = Instant::now();
    let budget = Duration::from_nanos(cfg.time_budget_ns);
    let step0 = cfg.step0.unwrap_or_else(|| {
        let r = c.range();
        if r > 0.0 {
            r / 10.0
        } else {
            1.0
        }
    });
    let mut u: Vec<f64> = c
        .rows()
        .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let (mut obj, mut g) = dual_subgradient(c, &u);
    let mut best = (obj, u.clone());
    let mut history = vec![obj];
    let mut t = 0usize;
    loop {
        if start.elapsed() >= budget || cfg.max_iters.is_some_and(|m| t >= m) {
            break;
        }
        t += 1;
        let step = step0 / (t as f64).sqrt();
        for (ui, gi) in u.iter_mut().zip(&g) {
            *ui += step * gi;
        }
        (obj, g) = dual_subgradient(c, &u);
        if obj > best.0 {
            best = (obj, u.clone());
        }
        history.push(best.0);
    }
    SubgradientRun {
        u: best.1,
        best_objective: best.0,
        history,
    }
}

pub fn seed_subgradient(c: &CostMatrix, cfg: &SubgradientConfig) -> Vec<f64> {
    seed_subgradient_run(c, cfg).u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_dense, gen_labels};
    use crate::lap::{solve_cold, solve_seeded};
    use crate::warmstart::equality_density;
    use proptest::prelude::*;

    #[test]
    fn row_mean() {
        let c =
            CostMatrix::from_rows(&[[1.0, 2.0, 3.0], [0.0, 0.0, 3.0], [3.0, 3.0, 3.0]]).unwrap();
        assert_eq!(seed_row_mean(&c)[0], 2.0);
        assert_eq!(
            seed_row_mean(&CostMatrix::from_rows(&[[7.5]]).unwrap()),
            vec![7.5]
        );

        let k = CostMatrix::new(4, vec![2.5; 16]).unwrap();
        let u = seed_row_mean(&k);
        assert_eq!(u, vec![2.5; 4]);
        let d = min_trick(&k, &u).duals;
        assert_eq!(equality_density(&k, &d, 1e-5), 4.0);
    }

    #[test]
    fn random_seed_properties() {
        let c = gen_dense(50, 0).unwrap();
        let a = seed_random(&c, 3);
        assert_eq!(a, seed_random(&c, 3));
        assert!(a.iter().all(|&x| (0.0..1.0).contains(&x)));
        assert!(min_trick(&c, &a).duals.is_feasible(&c, 0.0));
    }

    #[test]
    fn linreg_recovers_affine_labels() {
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        let w = [0.5, -1.25, 2.0, 0.125];
        for k in 0..200 {
            let x: Vec<f64> = (0..4)
                .map(|d| ((k * (d + 3) * 7919) % 101) as f64 / 50.0 - 1.0)
                .collect();
            ys.push(x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.75);
            rows.push(x);
        }
        let coef = train_linreg_samples(&rows, &ys, 1e-8).unwrap();
        let model = LinearModel::from_vec(&coef).unwrap();
        for (row, y) in rows.iter().zip(&ys) {
            let f = FeatureMatrix::from_array(
                ndarray::Array2::from_shape_vec((1, 4), row.clone()).unwrap(),
            );
            assert!((seed_linreg(&f, &model)[0] - y).abs() <= 1e-8);
        }
    }

    #[test]
    fn linreg_zero_model_and_shape() {
        let inst = gen_labels(&gen_dense(7, 1).unwrap()).unwrap();
        let mut m = LinearModel::zeros(FeatureDim::D21);
        m.bias = 0.3;
        let u = seed_linreg(&inst.features, &m);
        assert_eq!(u, vec![0.3; 7]);
        let trained = train_linreg(std::slice::from_ref(&inst), FeatureDim::D13).unwrap();
        assert_eq!(
            seed_linreg(&inst.features.truncated(FeatureDim::D13), &trained).len(),
            7
        );
    }

    #[test]
    fn learned_median_examples() {
        let t = vec![vec![1.0, 3.0], vec![2.0, 4.0], vec![3.0, 5.0]];
        assert_eq!(seed_learned_median(&t).unwrap(), vec![2.0, 4.0]);
        assert_eq!(
            seed_learned_median(&[vec![4.0, -1.0]]).unwrap(),
            vec![4.0, -1.0]
        );
        // lower median for even counts
        assert_eq!(
            seed_learned_median(&[vec![1.0], vec![5.0]]).unwrap(),
            vec![1.0]
        );
        assert!(matches!(
            seed_learned_median(&[vec![1.0], vec![1.0, 2.0]]),
            Err(BaselineError::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn learned_median_matches_sorting(rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 5), 1..12)) {
            let got = seed_learned_median(&rows).unwrap();
            for i in 0..5 {
                let mut col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
                col.sort_by(f64::total_cmp);
                prop_assert_eq!(got[i], col[(col.len() - 1) / 2]);
            }
        }
    }

    #[test]
    fn subgradient_hand_example() {
        let c = CostMatrix::from_rows(&[[0.0, 0.0], [0.0, 0.0]]).unwrap();
        let (_, g) = dual_subgradient(&c, &[0.0, 0.0]);
        assert_eq!(g, vec![-1.0, 1.0]);
    }

    #[test]
    fn subgradient_respects_weak_duality() {
        for seed in 0..5 {
            let c = gen_dense(20, seed).unwrap();
            let opt = solve_cold(&c).unwrap();
            let at_opt = dual_subgradient(&c, &opt.duals.u).0;
            assert!((at_opt - opt.assignment.total_cost).abs() < 1e-9);
            let run = seed_subgradient_run(
                &c,
                &SubgradientConfig {
                    time_budget_ns: u64::MAX,
                    step0: None,
                    max_iters: Some(300),
                },
            );
            assert!(run.history.windows(2).all(|w| w[1] >= w[0]));
            assert!(run.best_objective <= opt.assignment.total_cost + 1e-9 * 20.0 * c.max_abs());
            let seed = min_trick(&c, &run.u).duals;
            let s = solve_seeded(&c, &seed).unwrap();
            assert_eq!(s.assignment.total_cost, opt.assignment.total_cost);
        }
    }

    #[test]
    fn zero_budget_returns_row_minima() {
        let c = gen_dense(6, 2).unwrap();
        let u = seed_subgradient(
            &c,
            &SubgradientConfig {
                time_budget_ns: 0,
                ..SubgradientConfig::default()
            },
        );
        let mins: Vec<f64> = c
            .rows()
            .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        assert_eq!(u, mins);
    }
}
