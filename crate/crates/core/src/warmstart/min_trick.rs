use crate::duals::DualPotentials;
use crate::matrix::CostMatrix;
use crate::scalar::Scalar;

/// Column potentials built from row potentials, plus the minimizing row of
/// each column (needed to route gradients through the minimum).
#[derive(Debug, Clone, PartialEq)]
pub struct MinTrick<T = f64> {
    pub duals: DualPotentials<T>,
    /// `argmin[j]` is the lowest row index attaining `v[j]`.
    pub argmin: Vec<usize>,
}

/// Sets `v[j] = min_i (C[i][j] - u[i])`.
///
/// The pair `(u, v)` is dual feasible for any finite `u`: every reduced cost
/// `(C[i][j] - u[i]) - v[j]` is non-negative in floating point because `v[j]`
/// is one of the values it is subtracted from.
pub fn min_trick<T: Scalar>(c: &CostMatrix<T>, u_hat: &[T]) -> MinTrick<T> {
    let n = c.n();
    assert_eq!(u_hat.len(), n, "row potentials must have length n");
    let mut v = vec![T::infinity(); n];
    let mut argmin = vec![0usize; n];
    for (i, row) in c.rows().enumerate() {
        let ui = u_hat[i];
        for (j, &cij) in row.iter().enumerate() {
            let x = cij - ui;
            if x < v[j] {
                v[j] = x;
                argmin[j] = i;
            }
        }
    }
    MinTrick {
        duals: DualPotentials::new(u_hat.to_vec(), v),
        argmin,
    }
}

/// Average degree of the equality subgraph: the number of edges with
/// `|C[i][j] - u[i] - v[j]| < eps`, divided by `n`.
pub fn equality_density<T: Scalar>(c: &CostMatrix<T>, d: &DualPotentials<T>, eps: T) -> f64 {
    let mut count = 0usize;
    for (i, row) in c.rows().enumerate() {
        let ui = d.u[i];
        count += row
            .iter()
            .zip(&d.v)
            .filter(|(&cij, &vj)| ((cij - ui) - vj).abs() < eps)
            .count();
    }
    count as f64 / c.n() as f64
}

/// Reduced dual objective `sum(u) + sum_j min_i (C[i][j] - u[i])`.
pub fn reduced_dual_objective<T: Scalar>(c: &CostMatrix<T>, u: &[T]) -> T {
    min_trick(c, u).duals.objective()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lap::solve_cold;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c2() -> CostMatrix {
        CostMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap()
    }

    #[test]
    fn column_minima_for_zero_u() {
        let mt = min_trick(&c2(), &[0.0, 0.0]);
        assert_eq!(mt.duals.v, vec![1.0, 2.0]);
        assert_eq!(mt.argmin, vec![0, 0]);
        assert_eq!(equality_density(&c2(), &mt.duals, 1e-5), 1.0);
    }

    #[test]
    fn fully_tight_case() {
        let mt = min_trick(&c2(), &[1.0, 3.0]);
        assert_eq!(mt.duals.v, vec![0.0, 1.0]);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(mt.duals.reduced_cost(&c2(), i, j), 0.0);
            }
        }
        assert_eq!(equality_density(&c2(), &mt.duals, 1e-5), 2.0);
        // ties resolve to the lowest row
        assert_eq!(mt.argmin, vec![0, 0]);
    }

    #[test]
    fn optimal_rows_give_optimal_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let c = CostMatrix::from_fn(16, |_, _| rng.random::<f64>()).unwrap();
            let s = solve_cold(&c).unwrap();
            let mt = min_trick(&c, &s.duals.u);
            assert!(mt.duals.is_feasible(&c, 0.0));
            assert!((mt.duals.objective() - s.assignment.total_cost).abs() < 1e-9);
            for j in 0..16 {
                assert!(mt.duals.v[j] >= s.duals.v[j] - 1e-12);
            }
            assert!(equality_density(&c, &mt.duals, 1e-5) >= 1.0);
        }
    }
}
