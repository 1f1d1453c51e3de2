use crate::duals::{Assignment, DualPotentials};
use crate::matrix::CostMatrix;
use crate::scalar::Scalar;
use std::fmt;

/// Why a primal/dual pair is not an optimality certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateFailure {
    DimensionMismatch,
    InfeasibleDual { row: usize, col: usize },
    NotAPermutation,
    SlacknessViolated { row: usize, col: usize },
}

impl fmt::Display for CertificateFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DimensionMismatch => write!(f, "dimension mismatch"),
            Self::InfeasibleDual { row, col } => write!(f, "infeasible dual at ({row}, {col})"),
            Self::NotAPermutation => write!(f, "assignment is not a permutation"),
            Self::SlacknessViolated { row, col } => {
                write!(f, "complementary slackness violated at ({row}, {col})")
            }
        }
    }
}

/// Checks that `(a, d)` certifies optimality of `a` for `c`.
///
/// Duals must be feasible within `tol`, the assignment must be a bijection,
/// and every assigned edge must satisfy
/// `|C[i][j] - u[i] - v[j]| <= tol * max(1, |C[i][j]|)`.
pub fn verify_certificate<T: Scalar>(
    c: &CostMatrix<T>,
    a: &Assignment<T>,
    d: &DualPotentials<T>,
    tol: T,
) -> Result<(), CertificateFailure> {
    let n = c.n();
    if d.u.len() != n || d.v.len() != n {
        return Err(CertificateFailure::DimensionMismatch);
    }
    if let Some(v) = d.first_violation(c, tol) {
        return Err(CertificateFailure::InfeasibleDual {
            row: v.row,
            col: v.col,
        });
    }
    if !a.is_permutation(n) {
        return Err(CertificateFailure::NotAPermutation);
    }
    for (i, &j) in a.row_to_col.iter().enumerate() {
        let cij = c.get(i, j);
        let r = d.reduced_cost(c, i, j);
        if r.abs() > tol * cij.abs().max(T::one()) {
            return Err(CertificateFailure::SlacknessViolated { row: i, col: j });
        }
    }
    Ok(())
}
