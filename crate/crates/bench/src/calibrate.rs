//! Re-calibration of the density gate threshold `τ` for a trained model.

use crate::run::make_instance;
use crate::spec::ExperimentSpec;
use dualseed::lap::solve_cold_with;
use dualseed::net::ModelParams;
use dualseed::warmstart::{warm_solve, PipelineConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Seed density and solver effort on one validation instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSample {
    pub rho: f64,
    /// Dual updates when the seed is used.
    pub seeded_steps: usize,
    /// Dual updates of the cold solve the gate would fall back to.
    pub cold_steps: usize,
}

/// Total effort over `samples` if the gate used `tau`.
pub fn gated_effort(samples: &[GateSample], tau: f64) -> usize {
    samples
        .iter()
        .map(|s| {
            if s.rho < tau {
                s.cold_steps
            } else {
                s.seeded_steps
            }
        })
        .sum()
}

/// The threshold minimizing total dual updates over `samples`; among equally
/// good thresholds the largest (most conservative) one. Candidates are the
/// observed densities, `0` and `+∞` (always fall back).
pub fn calibrate_tau(samples: &[GateSample]) -> f64 {
    let mut candidates: Vec<f64> = samples.iter().map(|s| s.rho).collect();
    candidates.push(0.0);
    candidates.push(f64::INFINITY);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best = (usize::MAX, 0.0);
    for tau in candidates {
        let e = gated_effort(samples, tau);
        if e <= best.0 {
            best = (e, tau);
        }
    }
    best.1
}

/// Runs `model` ungated and the cold solver on every instance of the grid.
pub fn gate_samples(spec: &ExperimentSpec, model: &ModelParams) -> anyhow::Result<Vec<GateSample>> {
    spec.validate()?;
    let ungated = PipelineConfig {
        tau: 0.0,
        ..spec.pipeline
    };
    let cells: Vec<(usize, usize)> = spec
        .sizes
        .iter()
        .flat_map(|&n| (0..spec.trials).map(move |t| (n, t)))
        .collect();
    cells
        .par_iter()
        .map(|&(n, t)| {
            let (c, _) = make_instance(spec, n, t)?;
            let (_, rep) = warm_solve(&c, model, &ungated)?;
            let cold = solve_cold_with(&c, &spec.pipeline.solver_options())?;
            Ok(GateSample {
                rho: rep.density_rho,
                seeded_steps: rep.solve_stats.dual_update_steps,
                cold_steps: cold.stats.dual_update_steps,
            })
        })
        .collect()
}
