use super::DataError;
use crate::matrix::CostMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Counter-based generator for `(seed, stream)`. Distinct streams of the
/// same seed are independent, so instance `k` of a dataset can be generated
/// on its own.
pub fn instance_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// i.i.d. `U(0, 1)` entries.
pub fn gen_dense(n: usize, seed: u64) -> Result<CostMatrix, DataError> {
    let mut rng = instance_rng(seed, 0);
    Ok(CostMatrix::from_fn(n, |_, _| rng.random::<f64>())?)
}

pub const DEFAULT_LEVELS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];
pub const DEFAULT_LEVEL_PROBS: [f64; 5] = [0.45, 0.25, 0.15, 0.10, 0.05];

/// Parameters of the block-structured generator.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub n: usize,
    pub num_groups: usize,
    pub levels: Vec<f64>,
    pub level_probs: Vec<f64>,
    /// Diagonal group pairs draw only from the this many cheapest levels.
    pub diagonal_levels: usize,
    /// Explicit `L x L` base costs, row-major; overrides the level draw.
    pub base_costs: Option<Vec<f64>>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl BlockParams {
    /// Defaults: `L = max(1, n / 10)` groups, noise `0.05 * level range`.
    pub fn new(n: usize, seed: u64) -> Self {
        let levels = DEFAULT_LEVELS.to_vec();
        let range = levels[levels.len() - 1] - levels[0];
        Self {
            n,
            num_groups: (n / 10).max(1),
            levels,
            level_probs: DEFAULT_LEVEL_PROBS.to_vec(),
            diagonal_levels: 2,
            base_costs: None,
            noise_sigma: 0.05 * range,
            seed,
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::BadParams(m.to_string()));
        if self.n == 0 {
            return bad("n must be positive");
        }
        if self.num_groups == 0 || self.num_groups > self.n {
            return bad("need 1 <= L <= n");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and >= 0");
        }
        if self.levels.is_empty() || self.levels.len() != self.level_probs.len() {
            return bad("levels and probabilities must match");
        }
        if self.diagonal_levels == 0 || self.diagonal_levels > self.levels.len() {
            return bad("diagonal_levels out of range");
        }
        if let Some(b) = &self.base_costs {
            if b.len() != self.num_groups * self.num_groups {
                return bad("base_costs must be L x L");
            }
        }
        Ok(())
    }

    /// Group of row or column `i`: contiguous blocks of `ceil(n / L)`.
    pub fn group_of(&self, i: usize) -> usize {
        let size = self.n.div_ceil(self.num_groups);
        i / size
    }
}

/// Block-structured costs: group-pair base cost plus Gaussian noise,
/// clamped at zero.
pub fn gen_block(p: &BlockParams) -> Result<CostMatrix, DataError> {
    p.validate()?;
    let mut rng = instance_rng(p.seed, 0);
    let l = p.num_groups;
    let base = match &p.base_costs {
        Some(b) => b.clone(),
        None => {
            let all = WeightedIndex::new(&p.level_probs)
                .map_err(|e| DataError::BadParams(e.to_string()))?;
            let diag = WeightedIndex::new(&p.level_probs[..p.diagonal_levels])
                .map_err(|e| DataError::BadParams(e.to_string()))?;
            let mut b = vec![0.0; l * l];
            for g in 0..l {
                for h in 0..l {
                    let k = if g == h {
                        diag.sample(&mut rng)
                    } else {
                        all.sample(&mut rng)
                    };
                    b[g * l + h] = p.levels[k];
                }
            }
            b
        }
    };
    let noise = Normal::new(0.0, p.noise_sigma).map_err(|e| DataError::BadParams(e.to_string()))?;
    let groups: Vec<usize> = (0..p.n).map(|i| p.group_of(i)).collect();
    let c = CostMatrix::from_fn(p.n, |i, j| {
        let mut x = base[groups[i] * l + groups[j]];
        if p.noise_sigma > 0.0 {
            x += noise.sample(&mut rng);
        }
        x.max(0.0)
    })?;
    Ok(c)
}

/// Replaces `round(mask_fraction * n^2)` uniformly chosen edges by the
/// sentinel cost. A hidden random perfect matching is never masked, so
/// every row and column keeps a real edge and a sentinel-free assignment
/// exists.
pub fn sparsify(c: &CostMatrix, mask_fraction: f64, seed: u64) -> Result<CostMatrix, DataError> {
    if !(0.0..=0.9).contains(&mask_fraction) {
        return Err(DataError::BadMaskFraction(mask_fraction));
    }
    let n = c.n();
    let requested = (mask_fraction * (n * n) as f64).round() as usize;
    if requested == 0 {
        return Ok(c.clone());
    }
    let available = n * n - n;
    if requested > available {
        return Err(DataError::InfeasibleMask {
            requested,
            available,
        });
    }
    let mut rng = instance_rng(seed, 1);
    let mut hidden: Vec<usize> = (0..n).collect();
    hidden.shuffle(&mut rng);

    // maskable edge k enumerates (i, j) with j != hidden[i]
    let sentinel = c.masking_sentinel();
    let mut values = c.values().to_vec();
    for k in index::sample(&mut rng, available, requested) {
        let i = k / (n - 1);
        let mut j = k % (n - 1);
        if j >= hidden[i] {
            j += 1;
        }
        values[i * n + j] = sentinel;
    }
    Ok(CostMatrix::new(n, values)?.with_sentinel(sentinel)?)
}
