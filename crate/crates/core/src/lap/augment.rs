// Shortest augmenting paths over reduced costs with explicit row and column
// potentials. Assigned edges are allowed a residual slack of at most
// `eq_tol`; the Dijkstra offsets account for it so distances stay exact.

use super::{LapError, Solution, SolveStats, UNASSIGNED};
use crate::duals::{Assignment, DualPotentials};
use crate::matrix::CostMatrix;
use crate::scalar::Scalar;

pub(super) struct Augmenter<'a, T> {
    c: &'a CostMatrix<T>,
    duals: DualPotentials<T>,
    row_to_col: Vec<usize>,
    col_to_row: Vec<usize>,
    eq_tol: T,
    dist: Vec<T>,
    pred: Vec<usize>,
    done: Vec<bool>,
    ready: Vec<usize>,
}

impl<'a, T: Scalar> Augmenter<'a, T> {
    pub fn new(
        c: &'a CostMatrix<T>,
        duals: DualPotentials<T>,
        row_to_col: Vec<usize>,
        col_to_row: Vec<usize>,
        eq_tol: T,
    ) -> Self {
        let n = c.n();
        Self {
            c,
            duals,
            row_to_col,
            col_to_row,
            eq_tol,
            dist: vec![T::zero(); n],
            pred: vec![0; n],
            done: vec![false; n],
            ready: Vec::with_capacity(n),
        }
    }

    /// Augments every row in `free`, in order. Returns the number of
    /// augmentations that changed the potentials; `moved[row]` marks rows
    /// whose augmentation already did so in an earlier phase.
    pub fn augment_all(&mut self, free: &[usize], moved: &[bool]) -> Result<usize, LapError> {
        let mut updates = 0;
        for &row in free {
            if self.augment(row)? | moved[row] {
                updates += 1;
            }
        }
        Ok(updates)
    }

    #[inline]
    fn reduced(&self, i: usize, j: usize) -> T {
        (self.c.get(i, j) - self.duals.u[i]) - self.duals.v[j]
    }

    /// One Dijkstra search from `start` followed by the potential update and
    /// the path flip. Returns whether the path length exceeded `eq_tol`.
    fn augment(&mut self, start: usize) -> Result<bool, LapError> {
        let n = self.c.n();
        self.ready.clear();
        for j in 0..n {
            self.dist[j] = self.reduced(start, j);
            self.pred[j] = start;
            self.done[j] = false;
        }

        let sink = loop {
            // Closest unfinished column; a free column wins an exact tie,
            // otherwise the lowest index does.
            let mut best = UNASSIGNED;
            let mut best_d = T::infinity();
            let mut best_free = false;
            for j in 0..n {
                if self.done[j] {
                    continue;
                }
                let d = self.dist[j];
                let free = self.col_to_row[j] == UNASSIGNED;
                if d < best_d || (d == best_d && free && !best_free) || best == UNASSIGNED {
                    best = j;
                    best_d = d;
                    best_free = free;
                }
            }
            if best == UNASSIGNED {
                return Err(LapError::NoAugmentingPath { row: start });
            }
            self.done[best] = true;
            if best_free {
                break best;
            }
            self.ready.push(best);

            let i = self.col_to_row[best];
            let offset = best_d - self.reduced(i, best);
            let ui = self.duals.u[i];
            let row = self.c.row(i);
            #[allow(clippy::needless_range_loop)]
            for k in 0..n {
                if self.done[k] {
                    continue;
                }
                let cand = offset + ((row[k] - ui) - self.duals.v[k]);
                if cand < self.dist[k] {
                    self.dist[k] = cand;
                    self.pred[k] = i;
                }
            }
        };

        let delta = self.dist[sink];
        let moved = delta > self.eq_tol;
        if moved {
            self.duals.u[start] += delta;
            for &j in &self.ready {
                let step = delta - self.dist[j];
                let i = self.col_to_row[j];
                self.duals.u[i] += step;
                self.duals.v[j] -= step;
            }
        }

        let mut j = sink;
        loop {
            let i = self.pred[j];
            self.col_to_row[j] = i;
            let prev = std::mem::replace(&mut self.row_to_col[i], j);
            if i == start {
                break;
            }
            j = prev;
        }
        Ok(moved)
    }

    pub fn finish(self, stats: SolveStats) -> Solution<T> {
        debug_assert!(self.row_to_col.iter().all(|&j| j != UNASSIGNED));
        Solution {
            assignment: Assignment::from_permutation(self.c, self.row_to_col),
            duals: self.duals,
            stats,
        }
    }
}
