//! Row-centric features.
//!
//! Every statistic of row `i` is computed from the sorted row (or the sorted
//! multiset of its column ranks), so the result does not depend on the order
//! of columns, down to the last bit.

use crate::matrix::CostMatrix;
use ndarray::{s, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const FEATURE_NAMES: [&str; 21] = [
    "row_min",
    "row_max",
    "row_mean",
    "row_std",
    "entropy",
    "difficulty",
    "near_best",
    "is_col_best",
    "k_mean",
    "k_std",
    "rank_mean",
    "rank_std",
    "norm_rank",
    "pe_sin_1",
    "pe_cos_1",
    "pe_sin_2",
    "pe_cos_2",
    "pe_sin_4",
    "pe_cos_4",
    "pe_sin_8",
    "pe_cos_8",
];

const NUM_STATISTICS: usize = 13;
const PE_FREQUENCIES: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
const DIFFICULTY_GUARD: f64 = 1e-12;
const STD_FLOOR: f64 = 1e-8;

/// Feature set width. The narrow modes are prefixes of the full layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum FeatureDim {
    /// Distribution statistics only.
    D4,
    /// Everything except the positional encodings.
    D13,
    #[default]
    D21,
}

impl FeatureDim {
    pub fn width(self) -> usize {
        match self {
            Self::D4 => 4,
            Self::D13 => 13,
            Self::D21 => 21,
        }
    }

    pub fn from_width(d: usize) -> Option<Self> {
        match d {
            4 => Some(Self::D4),
            13 => Some(Self::D13),
            21 => Some(Self::D21),
            _ => None,
        }
    }
}

/// `n x d` matrix, row `i` describing cost row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn from_array(values: Array2<f64>) -> Self {
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.d();
        &self.values.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    /// The first `dim.width()` columns.
    pub fn truncated(&self, dim: FeatureDim) -> Self {
        let w = dim.width().min(self.d());
        Self {
            values: self.values.slice(s![.., ..w]).to_owned(),
        }
    }

    /// Rows reordered so that row `i` of the result is row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let d = self.d();
        let mut out = Array2::zeros((perm.len(), d));
        for (i, &p) in perm.iter().enumerate() {
            out.row_mut(i).assign(&self.values.row(p));
        }
        Self { values: out }
    }

    pub fn into_array(self) -> Array2<f64> {
        self.values
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-row statistics from the ascending row and the ascending list of the
/// row's column ranks.
fn row_statistics(sorted: &[f64], sorted_ranks: &[f64], col_best: usize, k: usize) -> [f64; 13] {
    let n = sorted.len();
    let nf = n as f64;
    let min = sorted[0];
    let max = sorted[n - 1];
    let (mean, std) = mean_std(sorted);

    // softmax of the negated row, shifted by the minimum for stability
    let weights: Vec<f64> = sorted.iter().map(|&x| (-(x - min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let entropy = weights
        .iter()
        .map(|&w| {
            let p = w / z;
            if p > 0.0 {
                -p * p.ln()
            } else {
                0.0
            }
        })
        .sum::<f64>()
        .max(0.0);

    let mean_gap = if n > 1 {
        sorted.windows(2).map(|w| w[1] - w[0]).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    let difficulty = 1.0 / (mean_gap + DIFFICULTY_GUARD);

    let threshold = min + 0.1 * min.abs();
    let near_best = sorted.iter().take_while(|&&x| x <= threshold).count() as f64 / nf;
    let is_col_best = col_best as f64 / nf;

    let (k_mean, k_std) = mean_std(&sorted[..k.min(n)]);

    let scale = if n > 1 { 1.0 / (nf - 1.0) } else { 0.0 };
    let (rank_mean, rank_std) = mean_std(sorted_ranks);
    let rank_mean = rank_mean * scale;
    let rank_std = rank_std * scale;
    let norm_rank = 1.0 - rank_mean;

    [
        min,
        max,
        mean,
        std,
        entropy,
        difficulty,
        near_best,
        is_col_best,
        k_mean,
        k_std,
        rank_mean,
        rank_std,
        norm_rank,
    ]
}

/// Computes the row features of `c`.
///
/// The 13 statistics are z-scored across rows (per instance, per feature,
/// std floored at 1e-8); the positional encodings `sin/cos(2 pi f i / n)` for
/// `f` in {1, 2, 4, 8} are left raw. `k` is the local-context window.
pub fn extract_features(c: &CostMatrix<f64>, dim: FeatureDim, k: usize) -> FeatureMatrix {
    let n = c.n();
    let stats = raw_row_statistics(c, k);

    let width = dim.width();
    let mut out = Array2::<f64>::zeros((n, width));
    let n_stats = width.min(NUM_STATISTICS);
    for f in 0..n_stats {
        let column: Vec<f64> = stats.iter().map(|s| s[f]).collect();
        let (mean, std) = mean_std(&column);
        let std = std.max(STD_FLOOR);
        for (i, x) in column.iter().enumerate() {
            out[[i, f]] = (x - mean) / std;
        }
    }
    if width > NUM_STATISTICS {
        for i in 0..n {
            let phase = 2.0 * PI * i as f64 / n as f64;
            for (m, &freq) in PE_FREQUENCIES.iter().enumerate() {
                out[[i, NUM_STATISTICS + 2 * m]] = (freq * phase).sin();
                out[[i, NUM_STATISTICS + 2 * m + 1]] = (freq * phase).cos();
            }
        }
    }
    FeatureMatrix { values: out }
}

/// Raw (un-normalized) statistics of every row, in `FEATURE_NAMES` order.
pub fn raw_row_statistics(c: &CostMatrix<f64>, k: usize) -> Vec<[f64; 13]> {
    let n = c.n();
    let k = k.max(1);
    // ranks[j][i]: entries of column j strictly below C[i][j]
    let ranks: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut col: Vec<(f64, u32)> =
                c.rows().zip(0u32..).map(|(row, i)| (row[j], i)).collect();
            col.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut rank = vec![0u32; n];
            let mut first = 0;
            for (pos, &(x, i)) in col.iter().enumerate() {
                if x != col[first].0 {
                    first = pos;
                }
                rank[i as usize] = first as u32;
            }
            rank
        })
        .collect();
    // lowest row index wins a column minimum tie
    let mut best_val = vec![f64::INFINITY; n];
    let mut best_row = vec![0usize; n];
    for (i, row) in c.rows().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if x < best_val[j] {
                best_val[j] = x;
                best_row[j] = i;
            }
        }
    }
    let mut col_best = vec![0usize; n];
    for &i in &best_row {
        col_best[i] += 1;
    }

    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut sorted = c.row(i).to_vec();
            sorted.sort_unstable_by(f64::total_cmp);
            let mut row_ranks: Vec<u32> = ranks.iter().map(|col| col[i]).collect();
            row_ranks.sort_unstable();
            let row_ranks: Vec<f64> = row_ranks.into_iter().map(f64::from).collect();
            row_statistics(&sorted, &row_ranks, col_best[i], k)
        })
        .collect()
}
