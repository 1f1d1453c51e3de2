//! Dense linear assignment solver of the Jonker-Volgenant family.
//!
//! Two entry points share one shortest-augmenting-path core:
//!
//! * [`solve_cold`] runs the classical initialization (column reduction,
//!   reduction transfer, two rounds of augmenting row reduction) before the
//!   augmentation phase.
//! * [`solve_seeded`] starts from caller-supplied feasible potentials, does a
//!   single greedy pass over equality edges and then augments the remaining
//!   free rows from the injected state.
//!
//! Both return optimal primal and dual solutions plus a [`SolveStats`]
//! record of how much work the augmentation phase needed.

mod augment;
mod brute;
mod certificate;
mod init;

pub use brute::{brute_force, BRUTE_FORCE_MAX_N};
pub use certificate::{verify_certificate, CertificateFailure};

use crate::duals::{Assignment, DualPotentials, FEAS_TOL};
use crate::matrix::{CostMatrix, MatrixError};
use crate::scalar::Scalar;
use augment::Augmenter;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

/// Stage names recorded in [`PhaseTimes`].
pub const STAGE_INIT: &str = "init";
pub const STAGE_GREEDY: &str = "greedy";
pub const STAGE_AUGMENT: &str = "augment";

pub(crate) const UNASSIGNED: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LapError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("potentials have length {got}, matrix has n = {n}")]
    DimensionMismatch { n: usize, got: usize },
    #[error("seed is not dual feasible at ({row}, {col}): reduced cost {reduced_cost:e}")]
    InfeasibleSeed {
        row: usize,
        col: usize,
        reduced_cost: f64,
    },
    #[error("brute force limited to n <= {max}, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error("augmentation failed to reach a free column from row {row}")]
    NoAugmentingPath { row: usize },
}

/// Tolerances used by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// An edge with reduced cost `<= eq_tol` is treated as tight.
    pub eq_tol: f64,
    /// Seeds with any reduced cost `< -feas_tol` are rejected.
    pub feas_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eq_tol: 1e-9,
            feas_tol: FEAS_TOL,
        }
    }
}

/// Wall-clock nanoseconds per solver stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub init: u64,
    pub greedy: u64,
    pub augment: u64,
}

impl PhaseTimes {
    pub fn total(&self) -> u64 {
        self.init + self.greedy + self.augment
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, u64)> {
        [
            (STAGE_INIT, self.init),
            (STAGE_GREEDY, self.greedy),
            (STAGE_AUGMENT, self.augment),
        ]
        .into_iter()
    }
}

/// Effort counters for one solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Rows matched from the initial duals alone, before any augmentation.
    pub greedy_matched: usize,
    /// Rows left for the augmentation phase, `n - greedy_matched`.
    pub free_rows: usize,
    /// Augmentation problems solved (one per free row).
    pub augment_searches: usize,
    /// Augmentations whose path length exceeded `eq_tol`, i.e. that moved
    /// the potentials. In a cold solve an augmentation is either a chain of
    /// augmenting row reduction steps or a shortest-path search (or both,
    /// when a reduction chain is finished by a search); it counts once.
    pub dual_update_steps: usize,
    pub phase_times: PhaseTimes,
}

impl SolveStats {
    /// Same counters, timings zeroed. Used for determinism comparisons.
    pub fn counters(&self) -> Self {
        Self {
            phase_times: PhaseTimes::default(),
            ..*self
        }
    }

    pub fn greedy_match_rate(&self) -> f64 {
        let n = self.greedy_matched + self.free_rows;
        if n == 0 {
            0.0
        } else {
            self.greedy_matched as f64 / n as f64
        }
    }
}

/// Result of a solve: optimal assignment, optimal duals, effort counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T = f64> {
    pub assignment: Assignment<T>,
    pub duals: DualPotentials<T>,
    pub stats: SolveStats,
}

fn elapsed_ns(t: Instant) -> u64 {
    t.elapsed().as_nanos().min(u64::MAX as u128) as u64
}

/// Solves `c` from scratch with the classical Jonker-Volgenant initialization.
pub fn solve_cold<T: Scalar>(c: &CostMatrix<T>) -> Result<Solution<T>, LapError> {
    solve_cold_with(c, &SolverOptions::default())
}

pub fn solve_cold_with<T: Scalar>(
    c: &CostMatrix<T>,
    opts: &SolverOptions,
) -> Result<Solution<T>, LapError> {
    let n = c.n();
    let eq_tol = T::lit(opts.eq_tol);
    let t0 = Instant::now();
    let (v, col_min_row) = init::column_minima(c);
    let init_ns = elapsed_ns(t0);

    let t1 = Instant::now();
    let mut state = init::column_reduction(c, v, &col_min_row);
    let greedy_ns = elapsed_ns(t1);
    let greedy_matched = n - state.free_rows().count();

    // Augmenting row reduction resolves most free rows with one-edge
    // augmentations; the rest go through full shortest-path searches.
    let t2 = Instant::now();
    let mut dual_update_steps = state.augmenting_row_reduction(c, eq_tol);
    dual_update_steps += state.augmenting_row_reduction(c, eq_tol);
    let u = state.implied_row_potentials(c);
    let free: Vec<usize> = state.free_rows().collect();
    let moved = std::mem::take(&mut state.moved);
    let mut aug = Augmenter::new(
        c,
        DualPotentials::new(u, state.v),
        state.row_to_col,
        state.col_to_row,
        eq_tol,
    );
    dual_update_steps += aug.augment_all(&free, &moved)?;
    let augment_ns = elapsed_ns(t2);

    Ok(aug.finish(SolveStats {
        greedy_matched,
        free_rows: n - greedy_matched,
        augment_searches: n - greedy_matched,
        dual_update_steps,
        phase_times: PhaseTimes {
            init: init_ns,
            greedy: greedy_ns,
            augment: augment_ns,
        },
    }))
}

/// Solves `c` starting from the feasible potentials `seed`.
///
/// Rows are first matched greedily, in index order, to the lowest-index free
/// column whose reduced cost is at most `eq_tol`. No reduction transfer is
/// applied to the seed. The remaining rows are resolved by shortest
/// augmenting paths that start from the seeded potentials.
pub fn solve_seeded<T: Scalar>(
    c: &CostMatrix<T>,
    seed: &DualPotentials<T>,
) -> Result<Solution<T>, LapError> {
    solve_seeded_with(c, seed, &SolverOptions::default())
}

pub fn solve_seeded_with<T: Scalar>(
    c: &CostMatrix<T>,
    seed: &DualPotentials<T>,
    opts: &SolverOptions,
) -> Result<Solution<T>, LapError> {
    let n = c.n();
    for len in [seed.u.len(), seed.v.len()] {
        if len != n {
            return Err(LapError::DimensionMismatch { n, got: len });
        }
    }
    let t0 = Instant::now();
    if let Some(bad) = seed.first_violation(c, T::lit(opts.feas_tol)) {
        return Err(LapError::InfeasibleSeed {
            row: bad.row,
            col: bad.col,
            reduced_cost: bad.reduced_cost.to_f64_lossy(),
        });
    }
    let init_ns = elapsed_ns(t0);

    let eq_tol = T::lit(opts.eq_tol);
    let t1 = Instant::now();
    let mut row_to_col = vec![UNASSIGNED; n];
    let mut col_to_row = vec![UNASSIGNED; n];
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        let ui = seed.u[i];
        let row = c.row(i);
        for j in 0..n {
            if col_to_row[j] == UNASSIGNED && (row[j] - ui) - seed.v[j] <= eq_tol {
                row_to_col[i] = j;
                col_to_row[j] = i;
                break;
            }
        }
    }
    let greedy_ns = elapsed_ns(t1);

    let free: Vec<usize> = (0..n).filter(|&i| row_to_col[i] == UNASSIGNED).collect();
    let greedy_matched = n - free.len();
    let mut aug = Augmenter::new(c, seed.clone(), row_to_col, col_to_row, eq_tol);
    let t2 = Instant::now();
    let dual_update_steps = aug.augment_all(&free, &vec![false; n])?;
    let augment_ns = elapsed_ns(t2);

    Ok(aug.finish(SolveStats {
        greedy_matched,
        free_rows: free.len(),
        augment_searches: free.len(),
        dual_update_steps,
        phase_times: PhaseTimes {
            init: init_ns,
            greedy: greedy_ns,
            augment: augment_ns,
        },
    }))
}
