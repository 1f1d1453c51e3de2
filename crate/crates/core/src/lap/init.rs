// Classical Jonker-Volgenant initialization. Only column potentials are
// tracked here; row potentials are implied by `min_j (C[i][j] - v[j])`.

use super::UNASSIGNED;
use crate::matrix::CostMatrix;
use crate::scalar::Scalar;

pub(super) struct InitState<T> {
    pub v: Vec<T>,
    pub row_to_col: Vec<usize>,
    pub col_to_row: Vec<usize>,
    free: Vec<usize>,
    /// Per row: the displacement chain currently carried by this free row
    /// has already moved a potential.
    pub moved: Vec<bool>,
}

/// Column minima with the lowest minimizing row of every column.
pub(super) fn column_minima<T: Scalar>(c: &CostMatrix<T>) -> (Vec<T>, Vec<usize>) {
    let n = c.n();
    let mut v = vec![T::infinity(); n];
    let mut col_min_row = vec![0usize; n];
    for i in 0..n {
        for (j, &x) in c.row(i).iter().enumerate() {
            if x < v[j] {
                v[j] = x;
                col_min_row[j] = i;
            }
        }
    }
    (v, col_min_row)
}

/// Matches every column to its minimizing row where that row is still free,
/// then applies reduction transfer to uniquely matched rows.
pub(super) fn column_reduction<T: Scalar>(
    c: &CostMatrix<T>,
    mut v: Vec<T>,
    col_min_row: &[usize],
) -> InitState<T> {
    let n = c.n();
    let mut row_to_col = vec![UNASSIGNED; n];
    let mut col_to_row = vec![UNASSIGNED; n];
    let mut unique = vec![true; n];
    // Highest column wins a contested row, as in the original scan order.
    for j in (0..n).rev() {
        let i = col_min_row[j];
        if row_to_col[i] == UNASSIGNED {
            row_to_col[i] = j;
            col_to_row[j] = i;
        } else {
            unique[i] = false;
        }
    }

    let mut free = Vec::new();
    for i in 0..n {
        if row_to_col[i] == UNASSIGNED {
            free.push(i);
        } else if unique[i] && n > 1 {
            let j1 = row_to_col[i];
            let row = c.row(i);
            let mut mu = T::infinity();
            for j in 0..n {
                if j != j1 {
                    mu = mu.min(row[j] - v[j]);
                }
            }
            v[j1] -= mu;
        }
    }

    InitState {
        v,
        row_to_col,
        col_to_row,
        free,
        moved: vec![false; n],
    }
}

/// Smallest and second smallest of `row[j] - v[j]`, with their columns.
fn two_smallest<T: Scalar>(row: &[T], v: &[T]) -> (T, T, usize, Option<usize>) {
    let mut u1 = row[0] - v[0];
    let mut u2 = T::infinity();
    let mut j1 = 0;
    let mut j2 = None;
    for j in 1..row.len() {
        let h = row[j] - v[j];
        if h < u2 {
            if h >= u1 {
                u2 = h;
                j2 = Some(j);
            } else {
                u2 = u1;
                u1 = h;
                j2 = Some(j1);
                j1 = j;
            }
        }
    }
    (u1, u2, j1, j2)
}

impl<T: Scalar> InitState<T> {
    pub fn free_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.free.iter().copied()
    }

    /// One round of augmenting row reduction over the current free list.
    ///
    /// Each step moves a free row onto its cheapest column and may displace
    /// the previous owner, which carries the chain on. A chain that reaches
    /// an unassigned column completes one augmentation. Returns how many
    /// completed augmentations lowered some column potential by more than
    /// `eq_tol` along the way; unfinished chains keep their flag in `moved`.
    pub fn augmenting_row_reduction(&mut self, c: &CostMatrix<T>, eq_tol: T) -> usize {
        let n = c.n();
        if self.free.is_empty() || n < 2 {
            return 0;
        }
        let mut updates = 0;
        let num_free = self.free.len();
        let mut current = 0;
        let mut new_free = 0;
        let mut rr_cnt = 0usize;

        while current < num_free {
            rr_cnt += 1;
            let i = self.free[current];
            current += 1;
            let (u1, u2, mut j1, j2) = two_smallest(c.row(i), &self.v);
            let mut i0 = self.col_to_row[j1];
            let v1_new = self.v[j1] - (u2 - u1);
            let v1_lowers = v1_new < self.v[j1];
            let mut moved = std::mem::take(&mut self.moved[i]);

            // The iteration cap stops cycling on exact ties.
            if rr_cnt < current * n {
                if v1_lowers {
                    moved |= u2 - u1 > eq_tol;
                    self.v[j1] = v1_new;
                } else if i0 != UNASSIGNED {
                    if let Some(j2) = j2 {
                        j1 = j2;
                        i0 = self.col_to_row[j1];
                    }
                }
                if i0 != UNASSIGNED {
                    if v1_lowers {
                        current -= 1;
                        self.free[current] = i0;
                    } else {
                        self.free[new_free] = i0;
                        new_free += 1;
                    }
                }
            } else if i0 != UNASSIGNED {
                self.free[new_free] = i0;
                new_free += 1;
            }
            if i0 != UNASSIGNED {
                self.row_to_col[i0] = UNASSIGNED;
                self.moved[i0] = moved;
            } else if moved {
                updates += 1;
            }
            self.row_to_col[i] = j1;
            self.col_to_row[j1] = i;
        }
        self.free.truncate(new_free);
        self.free.sort_unstable();
        updates
    }

    /// `u[i] = min_j (C[i][j] - v[j])`, feasible for every row.
    pub fn implied_row_potentials(&self, c: &CostMatrix<T>) -> Vec<T> {
        c.rows()
            .map(|row| {
                row.iter()
                    .zip(&self.v)
                    .fold(T::infinity(), |m, (&x, &vj)| m.min(x - vj))
            })
            .collect()
    }
}
