use crate::matrix::CostMatrix;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Default tolerance for dual feasibility checks.
pub const FEAS_TOL: f64 = 1e-9;

/// Row potentials `u` and column potentials `v`.
///
/// Reduced costs `C[i][j] - u[i] - v[j]` are always computed on demand,
/// evaluated as `(C[i][j] - u[i]) - v[j]` so that column potentials built
/// from `C - u` give exact zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPotentials<T = f64> {
    pub u: Vec<T>,
    pub v: Vec<T>,
}

/// First edge violating `u[i] + v[j] <= C[i][j] + tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation<T> {
    pub row: usize,
    pub col: usize,
    /// Negative reduced cost at the violating edge.
    pub reduced_cost: T,
}

impl<T: Scalar> DualPotentials<T> {
    pub fn new(u: Vec<T>, v: Vec<T>) -> Self {
        Self { u, v }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            u: vec![T::zero(); n],
            v: vec![T::zero(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    #[inline]
    pub fn reduced_cost(&self, c: &CostMatrix<T>, i: usize, j: usize) -> T {
        (c.get(i, j) - self.u[i]) - self.v[j]
    }

    /// Sum of all potentials, the dual objective.
    pub fn objective(&self) -> T {
        self.u.iter().chain(&self.v).fold(T::zero(), |a, &x| a + x)
    }

    /// Scans all edges and returns the first (row-major) infeasible one.
    pub fn first_violation(&self, c: &CostMatrix<T>, tol: T) -> Option<Violation<T>> {
        let n = c.n();
        for i in 0..n {
            let ui = self.u[i];
            for (j, (&cij, &vj)) in c.row(i).iter().zip(&self.v).enumerate() {
                let r = (cij - ui) - vj;
                if r < -tol || r.is_nan() {
                    return Some(Violation {
                        row: i,
                        col: j,
                        reduced_cost: r,
                    });
                }
            }
        }
        None
    }

    pub fn is_feasible(&self, c: &CostMatrix<T>, tol: T) -> bool {
        self.u.len() == c.n() && self.v.len() == c.n() && self.first_violation(c, tol).is_none()
    }

    /// Shifts `u` by `-shift` and `v` by `+shift`; reduced costs are unchanged.
    pub fn gauge_shift(&self, shift: T) -> Self {
        Self {
            u: self.u.iter().map(|&x| x - shift).collect(),
            v: self.v.iter().map(|&x| x + shift).collect(),
        }
    }

    /// Gauge-fixed copy with `mean(u) = 0`.
    pub fn centered(&self) -> Self {
        let n = T::lit(self.u.len().max(1) as f64);
        let mean = self.u.iter().fold(T::zero(), |a, &x| a + x) / n;
        self.gauge_shift(mean)
    }
}

/// Permutation `row_to_col` together with its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment<T = f64> {
    pub row_to_col: Vec<usize>,
    pub total_cost: T,
}

impl<T: Scalar> Assignment<T> {
    pub fn from_permutation(c: &CostMatrix<T>, row_to_col: Vec<usize>) -> Self {
        let total_cost = c.assignment_cost(&row_to_col);
        Self {
            row_to_col,
            total_cost,
        }
    }

    /// True when `row_to_col` is a bijection on `0..n`.
    pub fn is_permutation(&self, n: usize) -> bool {
        if self.row_to_col.len() != n {
            return false;
        }
        let mut seen = vec![false; n];
        for &j in &self.row_to_col {
            if j >= n || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        true
    }

    /// Inverse permutation `col_to_row`.
    pub fn col_to_row(&self) -> Vec<usize> {
        let mut inv = vec![usize::MAX; self.row_to_col.len()];
        for (i, &j) in self.row_to_col.iter().enumerate() {
            inv[j] = i;
        }
        inv
    }
}
