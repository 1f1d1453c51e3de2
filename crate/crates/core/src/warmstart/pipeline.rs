use super::{equality_density, extract_features, min_trick, FeatureDim, FeatureMatrix};
use crate::lap::{
    solve_cold_with, solve_seeded_with, LapError, Solution, SolveStats, SolverOptions,
};
use crate::matrix::CostMatrix;
use crate::net::{ModelParams, NetError};
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

pub const STAGE_NAMES: [&str; 5] = ["features", "model", "min_trick", "fallback_check", "solver"];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Solver(#[from] LapError),
    #[error(transparent)]
    Model(#[from] NetError),
    #[error("predictor returned {got} potentials for n = {n}")]
    PredictionLength { n: usize, got: usize },
    #[error("predictor returned a non-finite potential at row {0}")]
    NonFinitePrediction(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Tolerance of the equality-density test.
    pub eps: f64,
    /// Density threshold; below it the seed is discarded.
    pub tau: f64,
    /// Solver-internal equality tolerance.
    pub eq_tol: f64,
    /// Columns inspected by the refinement stage at inference.
    pub refine_k: usize,
    /// Local-context window of the features.
    pub feature_k: usize,
    pub feature_dim: FeatureDim,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            tau: 1.2,
            eq_tol: 1e-9,
            refine_k: 16,
            feature_k: 10,
            feature_dim: FeatureDim::D21,
        }
    }
}

impl PipelineConfig {
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            eq_tol: self.eq_tol,
            ..SolverOptions::default()
        }
    }
}

/// Nanoseconds spent in each pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTimes {
    pub features: u64,
    pub model: u64,
    pub min_trick: u64,
    pub fallback_check: u64,
    pub solver: u64,
}

impl StageTimes {
    pub fn as_array(&self) -> [u64; 5] {
        [
            self.features,
            self.model,
            self.min_trick,
            self.fallback_check,
            self.solver,
        ]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, u64)> {
        STAGE_NAMES.into_iter().zip(self.as_array())
    }

    pub fn total(&self) -> u64 {
        self.as_array().iter().sum()
    }

    /// Everything except the solver.
    pub fn overhead(&self) -> u64 {
        self.total() - self.solver
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub stage_times: StageTimes,
    pub density_rho: f64,
    pub fallback_triggered: bool,
    pub solve_stats: SolveStats,
    pub total_cost: f64,
}

fn ns(t: Instant) -> u64 {
    t.elapsed().as_nanos() as u64
}

/// Runs features (when `use_features`) → `predict` → min trick → density
/// gate → seeded or cold solve, timing each stage.
pub fn seeded_pipeline<P>(
    c: &CostMatrix,
    cfg: &PipelineConfig,
    use_features: bool,
    predict: P,
) -> Result<(Solution, PipelineReport), PipelineError>
where
    P: FnOnce(&CostMatrix, Option<&FeatureMatrix>) -> Result<Vec<f64>, PipelineError>,
{
    let n = c.n();
    let mut times = StageTimes::default();

    let t = Instant::now();
    let features = use_features.then(|| extract_features(c, cfg.feature_dim, cfg.feature_k));
    times.features = ns(t);

    let t = Instant::now();
    let u_hat = predict(c, features.as_ref())?;
    times.model = ns(t);
    if u_hat.len() != n {
        return Err(PipelineError::PredictionLength {
            n,
            got: u_hat.len(),
        });
    }
    if let Some(i) = u_hat.iter().position(|x| !x.is_finite()) {
        return Err(PipelineError::NonFinitePrediction(i));
    }

    let t = Instant::now();
    let seed = min_trick(c, &u_hat).duals;
    times.min_trick = ns(t);

    let t = Instant::now();
    let rho = equality_density(c, &seed, cfg.eps);
    let fallback = rho < cfg.tau;
    times.fallback_check = ns(t);

    let opts = cfg.solver_options();
    let t = Instant::now();
    let sol = if fallback {
        solve_cold_with(c, &opts)?
    } else {
        solve_seeded_with(c, &seed, &opts)?
    };
    times.solver = ns(t);

    let report = PipelineReport {
        stage_times: times,
        density_rho: rho,
        fallback_triggered: fallback,
        solve_stats: sol.stats,
        total_cost: sol.assignment.total_cost,
    };
    Ok((sol, report))
}

/// The full learned warm start with `model` as the row potential predictor.
pub fn warm_solve(
    c: &CostMatrix,
    model: &ModelParams,
    cfg: &PipelineConfig,
) -> Result<(Solution, PipelineReport), PipelineError> {
    if model.config.feature_dim != cfg.feature_dim {
        return Err(NetError::ShapeMismatch(format!(
            "model trained on d = {}, pipeline configured for d = {}",
            model.config.input_dim(),
            cfg.feature_dim.width()
        ))
        .into());
    }
    seeded_pipeline(c, cfg, true, |c, f| {
        let f = f.expect("features requested");
        Ok(model.forward_top_k(f, c, cfg.refine_k)?)
    })
}
