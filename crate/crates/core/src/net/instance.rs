use crate::duals::DualPotentials;
use crate::matrix::CostMatrix;
use crate::warmstart::FeatureMatrix;

/// Training example: a cost matrix, its full 21-wide features and
/// gauge-fixed optimal duals with the optimal assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub c: CostMatrix<f64>,
    pub features: FeatureMatrix,
    /// Optimal row potentials with `mean(u_star) = 0`.
    pub u_star: Vec<f64>,
    pub v_star: Vec<f64>,
    /// Optimal assignment; the edges `(i, row_to_col[i])` form M*.
    pub row_to_col: Vec<usize>,
}

impl LabeledInstance {
    pub fn n(&self) -> usize {
        self.c.n()
    }

    pub fn optimal_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col.iter().copied().enumerate()
    }

    pub fn duals(&self) -> DualPotentials<f64> {
        DualPotentials::new(self.u_star.clone(), self.v_star.clone())
    }

    /// Feasibility within `tol` and tightness of every optimal edge within `tol`.
    pub fn labels_valid(&self, tol: f64) -> bool {
        let d = self.duals();
        d.is_feasible(&self.c, tol)
            && self.optimal_edges().all(|(i, j)| {
                d.reduced_cost(&self.c, i, j).abs() <= tol * self.c.get(i, j).abs().max(1.0)
            })
    }
}
