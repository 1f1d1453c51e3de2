use super::DataError;
use crate::duals::DualPotentials;
use crate::lap::solve_cold;
use crate::matrix::CostMatrix;
use crate::net::LabeledInstance;
use crate::warmstart::{extract_features, min_trick, FeatureDim};
use rayon::prelude::*;

const LABEL_TOL: f64 = 1e-9;

/// Moves optimal duals from a vertex of the optimal dual face towards its
/// relative interior.
///
/// With the optimal assignment fixed, the optimal row potentials are exactly
/// the `u` with `u[i] - u[k] <= C[i][σ(k)] - C[k][σ(k)]`, a system of
/// difference constraints. Shifting `u` by `δ` keeps it optimal iff
/// `δ[i] <= δ[k] + r[i][σ(k)]`, so shortest-path distances from any root
/// over those reduced-cost arcs are valid shifts. Averaging the distances
/// from every root leaves an arc tight only if it is tight for all roots,
/// which needs a zero-length cycle. On instances without such degeneracy the
/// only tight edges left are the assignment itself, which a greedy pass then
/// recovers completely. Column potentials are rebuilt by the min trick.
/// Costs `O(n^3)`.
pub fn interior_duals(
    c: &CostMatrix,
    row_to_col: &[usize],
    duals: &DualPotentials,
) -> DualPotentials {
    let n = c.n();
    // arc k -> i has length r[i][σ(k)], stored at w[k * n + i]
    let mut w = vec![0.0; n * n];
    for k in 0..n {
        let j = row_to_col[k];
        for i in 0..n {
            w[k * n + i] = duals.reduced_cost(c, i, j).max(0.0);
        }
    }
    let per_root: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|root| {
            let mut dist = vec![f64::INFINITY; n];
            let mut done = vec![false; n];
            dist[root] = 0.0;
            for _ in 0..n {
                let mut k = usize::MAX;
                let mut best = f64::INFINITY;
                for i in 0..n {
                    if !done[i] && dist[i] < best {
                        best = dist[i];
                        k = i;
                    }
                }
                if k == usize::MAX {
                    break;
                }
                done[k] = true;
                let arcs = &w[k * n..(k + 1) * n];
                for i in 0..n {
                    let cand = best + arcs[i];
                    if cand < dist[i] {
                        dist[i] = cand;
                    }
                }
            }
            dist
        })
        .collect();
    let mut shift = vec![0.0; n];
    for dist in &per_root {
        for (s, d) in shift.iter_mut().zip(dist) {
            *s += d;
        }
    }
    let u: Vec<f64> = duals
        .u
        .iter()
        .zip(&shift)
        .map(|(u, s)| u + s / n as f64)
        .collect();
    min_trick(c, &u).duals
}

/// Solves `c` cold, moves the duals into the interior of the optimal face
/// (see [`interior_duals`]) and gauge-fixes them: `u* = u - mean(u)`,
/// `v* = v + mean(u)`. Features use the full 21-wide layout with `k = 10`.
pub fn gen_labels(c: &CostMatrix) -> Result<LabeledInstance, DataError> {
    gen_labels_with(c, 10)
}

pub fn gen_labels_with(c: &CostMatrix, feature_k: usize) -> Result<LabeledInstance, DataError> {
    let sol = solve_cold(c)?;
    let fixed = interior_duals(c, &sol.assignment.row_to_col, &sol.duals).centered();
    let inst = LabeledInstance {
        c: c.clone(),
        features: extract_features(c, FeatureDim::D21, feature_k),
        u_star: fixed.u,
        v_star: fixed.v,
        row_to_col: sol.assignment.row_to_col,
    };
    if !inst.labels_valid(LABEL_TOL) {
        return Err(DataError::InvalidLabels(
            "gauge-fixed duals fail feasibility or tightness".into(),
        ));
    }
    Ok(inst)
}
