use super::LapError;
use crate::duals::Assignment;
use crate::matrix::CostMatrix;
use crate::scalar::Scalar;

pub const BRUTE_FORCE_MAX_N: usize = 10;

/// Exact minimum over all `n!` permutations, enumerated in lexicographic
/// order so the first strict minimum is the lexicographically smallest.
pub fn brute_force<T: Scalar>(c: &CostMatrix<T>) -> Result<Assignment<T>, LapError> {
    let n = c.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(LapError::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = c.assignment_cost(&perm);
    while next_permutation(&mut perm) {
        let cost = c.assignment_cost(&perm);
        if cost < best_cost {
            best_cost = cost;
            best.copy_from_slice(&perm);
        }
    }
    Ok(Assignment {
        row_to_col: best,
        total_cost: best_cost,
    })
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let c = CostMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        let a = brute_force(&c).unwrap();
        assert_eq!((a.total_cost, a.row_to_col), (2.0, vec![0, 1]));

        let c =
            CostMatrix::from_rows(&[[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]]).unwrap();
        let a = brute_force(&c).unwrap();
        assert_eq!((a.total_cost, a.row_to_col), (5.0, vec![1, 0, 2]));

        let c = CostMatrix::from_rows(&[[5.0]]).unwrap();
        let a = brute_force(&c).unwrap();
        assert_eq!((a.total_cost, a.row_to_col), (5.0, vec![0]));
    }

    #[test]
    fn ties_prefer_lexicographically_smallest() {
        let c = CostMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(brute_force(&c).unwrap().row_to_col, vec![0, 1]);
    }

    #[test]
    fn enumerates_all_permutations() {
        let mut p = vec![0, 1, 2, 3];
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 24);
    }

    #[test]
    fn too_large() {
        let c = CostMatrix::new(11, vec![0.0; 121]).unwrap();
        assert!(matches!(
            brute_force(&c),
            Err(LapError::TooLarge { n: 11, .. })
        ));
    }
}
