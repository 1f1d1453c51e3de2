use crate::scalar::Scalar;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("cost matrix must have n >= 1")]
    Empty,
    #[error("expected {expected} entries for an n x n matrix, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite cost at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// Dense square cost matrix stored row-major.
///
/// Forbidden edges are stored as a finite `sentinel` cost instead of
/// infinity so shortest-path arithmetic stays NaN free.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T = f64> {
    n: usize,
    values: Vec<T>,
    sentinel: Option<T>,
}

impl<T: Scalar> CostMatrix<T> {
    pub fn new(n: usize, values: Vec<T>) -> Result<Self, MatrixError> {
        if n == 0 {
            return Err(MatrixError::Empty);
        }
        if values.len() != n * n {
            return Err(MatrixError::Shape {
                expected: n * n,
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|x| !x.is_finite()) {
            return Err(MatrixError::NonFinite {
                row: k / n,
                col: k % n,
            });
        }
        Ok(Self {
            n,
            values,
            sentinel: None,
        })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self, MatrixError> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n {
                return Err(MatrixError::Shape {
                    expected: n * n,
                    got: n * r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(n, values)
    }

    /// Builds a matrix where `f(i, j)` gives each entry.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self, MatrixError> {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Self::new(n, values)
    }

    /// Attaches the masked-edge sentinel. The value must be finite.
    pub fn with_sentinel(mut self, sentinel: T) -> Result<Self, MatrixError> {
        if !sentinel.is_finite() {
            return Err(MatrixError::NonFinite { row: 0, col: 0 });
        }
        self.sentinel = Some(sentinel);
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks_exact(self.n)
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn sentinel(&self) -> Option<T> {
        self.sentinel
    }

    /// True when `(i, j)` carries the sentinel cost.
    #[inline]
    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        self.sentinel.is_some_and(|s| self.get(i, j) == s)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// `max - min` over all entries.
    pub fn range(&self) -> T {
        self.max() - self.min()
    }

    /// Sentinel value for masking edges of this matrix: `max + n * range`
    /// (falls back to `max + n` for constant matrices).
    pub fn masking_sentinel(&self) -> T {
        let range = self.range();
        let span = if range > T::zero() { range } else { T::one() };
        self.max() + T::lit(self.n as f64) * span
    }

    /// Row-permuted copy: row `i` of the result is row `perm[i]` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut values = Vec::with_capacity(n * n);
        for &p in perm {
            values.extend_from_slice(self.row(p));
        }
        Self {
            n,
            values,
            sentinel: self.sentinel,
        }
    }

    /// Column-permuted copy: column `j` of the result is column `perm[j]` of `self`.
    pub fn permute_cols(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            let row = self.row(i);
            values.extend(perm.iter().map(|&p| row[p]));
        }
        Self {
            n,
            values,
            sentinel: self.sentinel,
        }
    }

    /// Sum of `C[i][row_to_col[i]]`.
    pub fn assignment_cost(&self, row_to_col: &[usize]) -> T {
        row_to_col
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &j)| acc + self.get(i, j))
    }

    /// Converts to another scalar type (e.g. `f64 -> f32`).
    pub fn cast<U: Scalar>(&self) -> Result<CostMatrix<U>, MatrixError> {
        let values = self
            .values
            .iter()
            .map(|&x| U::from_f64(x.to_f64_lossy()).unwrap_or(U::nan()))
            .collect();
        let mut out = CostMatrix::new(self.n, values)?;
        out.sentinel = self.sentinel.and_then(|s| U::from_f64(s.to_f64_lossy()));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert_eq!(CostMatrix::<f64>::new(0, vec![]), Err(MatrixError::Empty));
        assert_eq!(
            CostMatrix::new(2, vec![0.0, 1.0, f64::NAN, 2.0]),
            Err(MatrixError::NonFinite { row: 1, col: 0 })
        );
        assert!(matches!(
            CostMatrix::new(2, vec![0.0; 3]),
            Err(MatrixError::Shape { .. })
        ));
    }

    #[test]
    fn sentinel_formula() {
        let c = CostMatrix::from_rows(&[[1.0, 3.0], [2.0, 0.0]]).unwrap();
        // max 3 + n 2 * range 3
        assert_eq!(c.masking_sentinel(), 9.0);
        let c = c.with_sentinel(9.0).unwrap();
        assert!(!c.is_masked(0, 1));
    }

    #[test]
    fn permutations() {
        let c = CostMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(c.permute_rows(&[1, 0]).values(), &[3.0, 4.0, 1.0, 2.0]);
        assert_eq!(c.permute_cols(&[1, 0]).values(), &[2.0, 1.0, 4.0, 3.0]);
    }
}
