//! Sensitivity sweeps: seed noise, edge masking, refinement width, row
//! permutations and feature dimension. Every sweep returns plain rows meant
//! for CSV output.

use crate::record::RunRecord;
use crate::run::{make_instance, run_experiment, Resources};
use crate::spec::{ExperimentSpec, Strategy};
use crate::stats::{cost_mismatches, mean, population_std, summarize, CellSummary};
use anyhow::{bail, Context};
use dualseed::datagen::instance_rng;
use dualseed::lap::{solve_cold_with, solve_seeded_with};
use dualseed::net::load_checkpoint_for;
use dualseed::warmstart::{equality_density, min_trick, warm_solve, FeatureDim};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Noise sweep result for one `σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    /// Noise standard deviation as a fraction of the cost range.
    pub sigma: f64,
    pub instances: usize,
    pub mean_rho: f64,
    pub mean_dual_update_steps: f64,
    pub mean_greedy_rate: f64,
    /// Fraction of seeds whose density falls below the gate threshold.
    pub below_tau_rate: f64,
    /// Every seeded solve matched the cold optimum.
    pub exact: bool,
}

/// Perturbs optimal row potentials: `û = u* + N(0, (σ·range(C))²)`, then
/// seeds the solver through the min trick with the fallback gate disabled.
/// The same standard normal draws are scaled for every `σ` of an instance,
/// so the sweep compares seeds along one noise direction. Rows come back
/// sorted by `σ`.
///
/// `u*` are the gauge-fixed potentials the cold solver ends with: a vertex
/// of the optimal dual face, whose equality subgraph is as dense as optimal
/// duals get. (Training labels sit in the interior of that face, where only
/// the assignment is tight and the density is already at its floor of one.)
pub fn sweep_noise(spec: &ExperimentSpec, sigmas: &[f64]) -> anyhow::Result<Vec<NoiseRow>> {
    spec.validate()?;
    if sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
        bail!("noise levels must be finite and non-negative");
    }
    let mut sigmas = sigmas.to_vec();
    sigmas.sort_by(f64::total_cmp);
    let cells: Vec<(usize, usize)> = spec
        .sizes
        .iter()
        .flat_map(|&n| (0..spec.trials).map(move |t| (n, t)))
        .collect();
    let cfg = &spec.pipeline;
    let opts = cfg.solver_options();
    // per instance, per sigma: (rho, dual updates, greedy rate, exact)
    let per_instance: Vec<Vec<(f64, usize, f64, bool)>> = cells
        .par_iter()
        .map(|&(n, trial)| -> anyhow::Result<_> {
            let (c, seed) = make_instance(spec, n, trial)?;
            let cold = solve_cold_with(&c, &opts)?;
            let cost = cold.assignment.total_cost;
            let u_star = cold.duals.centered().u;
            let mut rng = instance_rng(seed, 3);
            let z: Vec<f64> = (0..c.n())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let range = c.range();
            sigmas
                .iter()
                .map(|&sigma| {
                    let u: Vec<f64> = u_star
                        .iter()
                        .zip(&z)
                        .map(|(u, z)| u + sigma * range * z)
                        .collect();
                    let seed = min_trick(&c, &u).duals;
                    let rho = equality_density(&c, &seed, cfg.eps);
                    let sol = solve_seeded_with(&c, &seed, &opts)?;
                    let exact =
                        (sol.assignment.total_cost - cost).abs() <= 1e-9 * cost.abs().max(1.0);
                    Ok((
                        rho,
                        sol.stats.dual_update_steps,
                        sol.stats.greedy_match_rate(),
                        exact,
                    ))
                })
                .collect()
        })
        .collect::<anyhow::Result<_>>()?;

    Ok(sigmas
        .iter()
        .enumerate()
        .map(|(k, &sigma)| {
            let col: Vec<_> = per_instance.iter().map(|inst| inst[k]).collect();
            NoiseRow {
                sigma,
                instances: col.len(),
                mean_rho: mean(&col.iter().map(|x| x.0).collect::<Vec<_>>()),
                mean_dual_update_steps: mean(&col.iter().map(|x| x.1 as f64).collect::<Vec<_>>()),
                mean_greedy_rate: mean(&col.iter().map(|x| x.2).collect::<Vec<_>>()),
                below_tau_rate: col.iter().filter(|x| x.0 < cfg.tau).count() as f64
                    / col.len() as f64,
                exact: col.iter().all(|x| x.3),
            }
        })
        .collect())
}

/// One arm of a grid sweep, summarizing one non-cold strategy at one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub strategy: Strategy,
    pub n: usize,
    pub trials: usize,
    pub mean_ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub median_ratio: f64,
    pub mean_greedy_rate: f64,
    pub augment_reduction: f64,
    pub mean_dual_update_steps: f64,
    pub fallback_rate: f64,
    pub mean_rho: Option<f64>,
    /// All strategies agreed on the optimal cost on every instance.
    pub exact: bool,
}

impl SweepRow {
    fn from_summary(axis: &str, value: f64, s: &CellSummary, exact: bool) -> Self {
        Self {
            axis: axis.to_string(),
            value,
            strategy: s.strategy,
            n: s.n,
            trials: s.trials,
            mean_ratio: s.mean_ratio,
            ci_low: s.ci_low,
            ci_high: s.ci_high,
            median_ratio: s.median_ratio,
            mean_greedy_rate: s.mean_greedy_rate,
            augment_reduction: s.augment_reduction,
            mean_dual_update_steps: s.mean_dual_update_steps,
            fallback_rate: s.fallback_rate,
            mean_rho: s.mean_rho,
            exact,
        }
    }
}

fn arm_rows(axis: &str, value: f64, records: &[RunRecord]) -> anyhow::Result<Vec<SweepRow>> {
    let exact = cost_mismatches(records).is_empty();
    Ok(summarize(records)?
        .iter()
        .map(|s| SweepRow::from_summary(axis, value, s, exact))
        .collect())
}

/// The experiment with cold added, since every ratio needs it.
fn with_cold(spec: &ExperimentSpec) -> ExperimentSpec {
    let mut s = spec.clone();
    if !s.strategies.contains(&Strategy::Cold) {
        s.strategies.insert(0, Strategy::Cold);
    }
    s
}

/// Re-runs the experiment with each fraction of edges masked.
pub fn sweep_sparsity(
    spec: &ExperimentSpec,
    res: &Resources,
    fractions: &[f64],
) -> anyhow::Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &f in fractions {
        let mut s = with_cold(spec);
        s.mask_fraction = f;
        rows.extend(arm_rows("mask_fraction", f, &run_experiment(&s, res)?)?);
    }
    Ok(rows)
}

/// Re-runs the experiment with each refinement width `K`.
pub fn sweep_topk(
    spec: &ExperimentSpec,
    res: &Resources,
    ks: &[usize],
) -> anyhow::Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &k in ks {
        let mut s = with_cold(spec);
        s.pipeline.refine_k = k;
        rows.extend(arm_rows("refine_k", k as f64, &run_experiment(&s, res)?)?);
    }
    Ok(rows)
}

/// Re-runs the experiment per feature width, each with its own checkpoint
/// (`model_d4`, `model_d13`, `model_d21`) and matching linear baseline.
pub fn sweep_features(
    spec: &ExperimentSpec,
    res: &Resources,
    dims: &[FeatureDim],
) -> anyhow::Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &d in dims {
        let mut s = with_cold(spec);
        s.pipeline.feature_dim = d;
        let mut arm_res = res.clone();
        if s.strategies.contains(&Strategy::Neural) {
            let path = s
                .models
                .get(&d.width())
                .or(s.model.as_ref())
                .with_context(|| format!("no checkpoint for d = {}", d.width()))?;
            arm_res.model = Some(
                load_checkpoint_for(path, d)
                    .with_context(|| format!("loading {}", path.display()))?,
            );
        }
        rows.extend(arm_rows(
            "feature_dim",
            d.width() as f64,
            &run_experiment(&s, &arm_res)?,
        )?);
    }
    Ok(rows)
}

/// One solve of one row permutation of the base matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationRun {
    pub permutation: usize,
    pub strategy: Strategy,
    pub total_cost: f64,
    pub wall_ns: u64,
    pub dual_update_steps: usize,
}

/// Per-strategy spread across permutations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationSummary {
    pub strategy: Strategy,
    pub permutations: usize,
    pub mean_wall_ns: f64,
    pub std_wall_ns: f64,
    pub min_cost: f64,
    pub max_cost: f64,
    pub costs_identical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationReport {
    pub runs: Vec<PermutationRun>,
    pub summary: Vec<PermutationSummary>,
}

/// Solves `num_perms` random row permutations of the first instance of the
/// grid (permutation 0 is the identity) with the cold solver and, when
/// loaded, the neural seed. Runs are sequential so timings do not interfere.
pub fn sweep_permutation(
    spec: &ExperimentSpec,
    res: &Resources,
    num_perms: usize,
) -> anyhow::Result<PermutationReport> {
    spec.validate()?;
    let n = *spec.sizes.first().context("no size configured")?;
    let (base, seed) = make_instance(spec, n, 0)?;
    let n = base.n();
    let mut rng = instance_rng(seed, 4);
    let opts = spec.pipeline.solver_options();
    let mut runs = Vec::new();
    for p in 0..num_perms {
        let mut perm: Vec<usize> = (0..n).collect();
        if p > 0 {
            perm.shuffle(&mut rng);
        }
        let c = base.permute_rows(&perm);
        // cost summed in base row order, so equal assignments agree bit for bit
        let base_cost = |row_to_col: &[usize]| {
            let mut base_assign = vec![0; n];
            for (i, &j) in row_to_col.iter().enumerate() {
                base_assign[perm[i]] = j;
            }
            base.assignment_cost(&base_assign)
        };
        let t = Instant::now();
        let sol = solve_cold_with(&c, &opts)?;
        runs.push(PermutationRun {
            permutation: p,
            strategy: Strategy::Cold,
            wall_ns: t.elapsed().as_nanos() as u64,
            total_cost: base_cost(&sol.assignment.row_to_col),
            dual_update_steps: sol.stats.dual_update_steps,
        });
        if let Some(model) = &res.model {
            let t = Instant::now();
            let (sol, rep) = warm_solve(&c, model, &spec.pipeline)?;
            runs.push(PermutationRun {
                permutation: p,
                strategy: Strategy::Neural,
                wall_ns: t.elapsed().as_nanos() as u64,
                total_cost: base_cost(&sol.assignment.row_to_col),
                dual_update_steps: rep.solve_stats.dual_update_steps,
            });
        }
    }
    let mut strategies: Vec<Strategy> = runs.iter().map(|r| r.strategy).collect();
    strategies.sort();
    strategies.dedup();
    let summary = strategies
        .into_iter()
        .map(|s| {
            let rs: Vec<&PermutationRun> = runs.iter().filter(|r| r.strategy == s).collect();
            let walls: Vec<f64> = rs.iter().map(|r| r.wall_ns as f64).collect();
            let costs: Vec<f64> = rs.iter().map(|r| r.total_cost).collect();
            let min_cost = costs.iter().copied().fold(f64::INFINITY, f64::min);
            let max_cost = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            PermutationSummary {
                strategy: s,
                permutations: rs.len(),
                mean_wall_ns: mean(&walls),
                std_wall_ns: population_std(&walls),
                min_cost,
                max_cost,
                costs_identical: min_cost == max_cost,
            }
        })
        .collect();
    Ok(PermutationReport { runs, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::Generator;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            generator: Generator::Dense,
            sizes: vec![24],
            trials: 3,
            strategies: vec![Strategy::Cold, Strategy::RowMean, Strategy::Random],
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn zero_noise_is_idle() {
        let rows = sweep_noise(&small_spec(), &[0.2, 0.0]).unwrap();
        assert_eq!(rows[0].sigma, 0.0);
        assert_eq!(rows[0].mean_dual_update_steps, 0.0);
        assert!(rows[0].mean_rho >= 1.0);
        assert!(rows.iter().all(|r| r.exact));
    }

    #[test]
    fn huge_noise_falls_below_the_gate() {
        let rows = sweep_noise(&small_spec(), &[50.0]).unwrap();
        assert_eq!(rows[0].below_tau_rate, 1.0);
    }

    #[test]
    fn zero_masking_matches_the_plain_experiment() {
        let spec = small_spec();
        let res = Resources::default();
        let rows = sweep_sparsity(&spec, &res, &[0.0]).unwrap();
        let plain = summarize(&run_experiment(&spec, &res).unwrap()).unwrap();
        assert_eq!(rows.len(), plain.len());
        for (r, p) in rows.iter().zip(&plain) {
            assert_eq!(
                (r.strategy, r.mean_dual_update_steps),
                (p.strategy, p.mean_dual_update_steps)
            );
            assert!(r.exact);
        }
    }

    #[test]
    fn permutations_share_the_optimal_cost() {
        let rep = sweep_permutation(&small_spec(), &Resources::default(), 4).unwrap();
        assert_eq!(rep.runs.len(), 4);
        assert_eq!(rep.summary.len(), 1);
        assert!(rep.summary[0].costs_identical);
    }
}
