//! Forward and reverse passes of the row potential predictor.
//!
//! Stage one encodes every feature row independently with a residual MLP and
//! reads an initial estimate through the output head. Stage two looks at the
//! K smallest pseudo-reduced costs `C[i][j] - u_init[i]` of the row, projects
//! them into the hidden state and reads the final estimate through the same
//! head. With [`RefineCosts::Row`] rows never exchange information except
//! through `C`; with [`RefineCosts::Reduced`] they also see the column
//! minima of the initial estimate.
//!
//! The network works in units of [`cost_scale`]: costs are divided by it on
//! the way in and both estimates are multiplied by it on the way out, so a
//! model trained at one instance size sees inputs and targets of the same
//! magnitude at another.

use super::instance::LabeledInstance;
use super::params::{Activation, ModelParams, RefineCosts, RefinePooling, ResidualBlock};
use super::NetError;
use crate::matrix::CostMatrix;
use crate::warmstart::{min_trick, FeatureMatrix};
use ndarray::{Array1, Array2, Axis};

const LN_EPS: f64 = 1e-5;
/// Order statistic used by [`cost_scale`].
const SCALE_WINDOW: usize = 8;

/// Typical spacing between the cheapest entries of a row: the mean over
/// rows of `(x_(w) - x_(0)) / w` with `x_(k)` the k-th smallest entry and
/// `w = min(8, n - 1)`. It scales with the costs, ignores constant shifts
/// and, looking only at the cheapest entries, masked edges. Falls back to
/// `1` when it is not a positive finite number.
pub fn cost_scale(c: &CostMatrix<f64>) -> f64 {
    let n = c.n();
    if n < 2 {
        return 1.0;
    }
    let w = SCALE_WINDOW.min(n - 1);
    let mut buf = vec![0.0; n];
    let mut gaps: Vec<f64> = c
        .rows()
        .map(|row| {
            buf.copy_from_slice(row);
            let (lower, &mut x_w, _) = buf.select_nth_unstable_by(w, f64::total_cmp);
            let x_0 = lower.iter().copied().fold(f64::INFINITY, f64::min);
            (x_w - x_0) / w as f64
        })
        .collect();
    // summing in sorted order makes the result independent of row order
    gaps.sort_unstable_by(f64::total_cmp);
    let s = gaps.iter().sum::<f64>() / n as f64;
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

struct BlockCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    z: Array2<f64>,
    a: Array2<f64>,
    pre: Array2<f64>,
}

/// Intermediate values kept for the reverse pass.
pub struct ForwardCache {
    x: Array2<f64>,
    blocks: Vec<BlockCache>,
    h: Array2<f64>,
    /// Per row, the column behind every refinement slot (padded like the values).
    slots: Vec<Vec<usize>>,
    /// Min-trick argmin rows of `u_init`, for reduced-cost refinement.
    init_argmin: Vec<usize>,
    refine_in: Array2<f64>,
    h2: Array2<f64>,
    /// [`cost_scale`] of the instance.
    pub scale: f64,
    /// Both estimates in cost units.
    pub u_init: Array1<f64>,
    pub u: Array1<f64>,
}

fn activate(act: Activation, x: &Array2<f64>) -> Array2<f64> {
    match act {
        Activation::Relu => x.mapv(|v| v.max(0.0)),
        Activation::Tanh => x.mapv(f64::tanh),
    }
}

fn layer_norm(
    h: &Array2<f64>,
    gain: &Array1<f64>,
    bias: &Array1<f64>,
) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    let width = h.ncols() as f64;
    let mean = h.sum_axis(Axis(1)) / width;
    let centered = h - &mean.view().insert_axis(Axis(1));
    let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / width;
    let inv_std = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    let xhat = centered * inv_std.view().insert_axis(Axis(1));
    let z = &xhat * gain + bias;
    (xhat, inv_std, z)
}

/// Columns of the `k` smallest entries of `row` in ascending order (lowest
/// index first on ties), padded to `width` by repeating the largest.
fn smallest_columns(row: &[f64], k: usize, width: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    let k = k.clamp(1, idx.len());
    let cmp = |a: &usize, b: &usize| row[*a].total_cmp(&row[*b]).then(a.cmp(b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    let last = idx[idx.len() - 1];
    idx.resize(width.max(idx.len()), last);
    idx.truncate(width);
    idx
}

impl ModelParams {
    fn check_shapes(&self, f: &FeatureMatrix, c: &CostMatrix<f64>) -> Result<(), NetError> {
        if f.d() != self.config.input_dim() {
            return Err(NetError::ShapeMismatch(format!(
                "feature width {} but model expects {}",
                f.d(),
                self.config.input_dim()
            )));
        }
        if f.n() != c.n() {
            return Err(NetError::ShapeMismatch(format!(
                "{} feature rows for an n = {} matrix",
                f.n(),
                c.n()
            )));
        }
        Ok(())
    }

    /// Predicted row potentials `u_hat`, length `n`.
    pub fn forward(&self, f: &FeatureMatrix, c: &CostMatrix<f64>) -> Result<Vec<f64>, NetError> {
        Ok(self.forward_cached(f, c, self.config.refine_k)?.u.to_vec())
    }

    /// Like [`ModelParams::forward`] but only the `k` best columns are
    /// inspected (padded to the model's K).
    pub fn forward_top_k(
        &self,
        f: &FeatureMatrix,
        c: &CostMatrix<f64>,
        k: usize,
    ) -> Result<Vec<f64>, NetError> {
        Ok(self.forward_cached(f, c, k)?.u.to_vec())
    }

    pub fn forward_cached(
        &self,
        f: &FeatureMatrix,
        c: &CostMatrix<f64>,
        k: usize,
    ) -> Result<ForwardCache, NetError> {
        self.check_shapes(f, c)?;
        let cfg = &self.config;
        let n = c.n();
        let x = f.view().to_owned();
        let mut h = x.dot(&self.w_in) + &self.b_in;

        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (xhat, inv_std, z) = layer_norm(&h, &b.ln_gain, &b.ln_bias);
            let pre = z.dot(&b.w1) + &b.b1;
            let a = activate(cfg.activation, &pre);
            h = h + a.dot(&b.w2) + &b.b2;
            caches.push(BlockCache {
                xhat,
                inv_std,
                z,
                a,
                pre,
            });
        }

        let scale = cost_scale(c);
        let b_out = self.b_out[0];
        // scaled units from here on
        let u_init = h.dot(&self.w_out) + b_out;

        let k_eff = k.min(cfg.refine_k).min(n).max(1);
        let (v_init, init_argmin) = match cfg.refine_costs {
            RefineCosts::Row => (vec![0.0; n], Vec::new()),
            RefineCosts::Reduced => {
                let u_cost: Vec<f64> = u_init.iter().map(|u| u * scale).collect();
                let mt = min_trick(c, &u_cost);
                (mt.duals.v.iter().map(|v| v / scale).collect(), mt.argmin)
            }
        };
        let width = cfg.refine_width();
        let mut refine_in = Array2::<f64>::zeros((n, width));
        let mut slots = Vec::with_capacity(n);
        let mut scratch = vec![0.0; n];
        for i in 0..n {
            let shift = u_init[i];
            for ((s, &x), &vj) in scratch.iter_mut().zip(c.row(i)).zip(&v_init) {
                *s = (x / scale - shift) - vj;
            }
            let cols = smallest_columns(&scratch, k_eff, cfg.refine_k);
            let mut out = refine_in.row_mut(i);
            match cfg.pooling {
                RefinePooling::Sorted => {
                    for (o, &j) in out.iter_mut().zip(&cols) {
                        *o = scratch[j];
                    }
                }
                RefinePooling::Mean => {
                    out[0] = cols.iter().map(|&j| scratch[j]).sum::<f64>() / cols.len() as f64
                }
                RefinePooling::Max => out[0] = scratch[cols[cols.len() - 1]],
            }
            slots.push(cols);
        }
        let h2 = &h + &(refine_in.dot(&self.w_ref) + &self.b_ref);
        let u = h2.dot(&self.w_out) + b_out;

        Ok(ForwardCache {
            x,
            blocks: caches,
            h,
            slots,
            init_argmin,
            refine_in,
            h2,
            scale,
            u_init: u_init * scale,
            u: u * scale,
        })
    }

    /// Gradient of a scalar objective given `grad_u = d objective / d u_hat`.
    ///
    /// Matrix gradients are written into standard-layout buffers so they
    /// flatten in the same order as the parameters.
    pub fn backward_from(&self, cache: &ForwardCache, grad_u: &[f64]) -> ModelParams {
        let cfg = &self.config;
        let mut g = self.zeros_like();
        // into scaled units
        let gu = Array1::from_iter(grad_u.iter().map(|g| g * cache.scale));
        let col = |v: &Array1<f64>| v.view().insert_axis(Axis(1)).to_owned();

        // final head
        g.w_out = cache.h2.t().dot(&gu);
        g.b_out[0] = gu.sum();
        let g_h2 = col(&gu).dot(&self.w_out.view().insert_axis(Axis(0)));

        // refinement branch
        g.w_ref.assign(&cache.refine_in.t().dot(&g_h2));
        g.b_ref = g_h2.sum_axis(Axis(0));
        let g_refine = g_h2.dot(&self.w_ref.t());
        // every slot value is C[i][j] / s - u_init[i] (- v_init[j]); selections
        // are held fixed, v_init[j] routes to its argmin row
        let mut g_u_init = Array1::<f64>::zeros(gu.len());
        for (i, cols) in cache.slots.iter().enumerate() {
            let g_row = g_refine.row(i);
            for (s, &j) in cols.iter().enumerate() {
                let g_slot = match cfg.pooling {
                    RefinePooling::Sorted => g_row[s],
                    RefinePooling::Mean => g_row[0] / cols.len() as f64,
                    RefinePooling::Max if s + 1 == cols.len() => g_row[0],
                    RefinePooling::Max => 0.0,
                };
                g_u_init[i] -= g_slot;
                if cfg.refine_costs == RefineCosts::Reduced {
                    g_u_init[cache.init_argmin[j]] += g_slot;
                }
            }
        }

        // intermediate head, shared weights
        g.w_out = g.w_out + cache.h.t().dot(&g_u_init);
        g.b_out[0] += g_u_init.sum();
        let mut g_h = g_h2 + col(&g_u_init).dot(&self.w_out.view().insert_axis(Axis(0)));

        for (k, b) in self.blocks.iter().enumerate().rev() {
            let bc = &cache.blocks[k];
            let gb = &mut g.blocks[k];
            gb.w2.assign(&bc.a.t().dot(&g_h));
            gb.b2 = g_h.sum_axis(Axis(0));
            let g_a = g_h.dot(&b.w2.t());
            let g_pre = match cfg.activation {
                Activation::Relu => {
                    let mut gp = g_a;
                    gp.zip_mut_with(&bc.pre, |g, &p| {
                        if p <= 0.0 {
                            *g = 0.0
                        }
                    });
                    gp
                }
                Activation::Tanh => g_a * &bc.a.mapv(|a| 1.0 - a * a),
            };
            gb.w1.assign(&bc.z.t().dot(&g_pre));
            gb.b1 = g_pre.sum_axis(Axis(0));
            let g_z = g_pre.dot(&b.w1.t());
            gb.ln_gain = (&g_z * &bc.xhat).sum_axis(Axis(0));
            gb.ln_bias = g_z.sum_axis(Axis(0));
            g_h = g_h + layer_norm_backward(b, bc, &g_z);
        }

        g.w_in.assign(&cache.x.t().dot(&g_h));
        g.b_in = g_h.sum_axis(Axis(0));
        g
    }

    /// Loss and parameter gradient on one labeled instance.
    pub fn loss_and_grad(
        &self,
        inst: &LabeledInstance,
        lambda_cs: f64,
    ) -> Result<(LossValue, ModelParams), NetError> {
        let f = inst.features.truncated(self.config.feature_dim);
        let cache = self.forward_cached(&f, &inst.c, self.config.refine_k)?;
        let lv = loss(cache.u.as_slice().expect("contiguous"), inst, lambda_cs);
        let g = self.backward_from(&cache, &lv.grad_u);
        Ok((lv, g))
    }
}

fn layer_norm_backward(b: &ResidualBlock, bc: &BlockCache, g_z: &Array2<f64>) -> Array2<f64> {
    let width = g_z.ncols() as f64;
    let g_xhat = g_z * &b.ln_gain;
    let mean_g = g_xhat.sum_axis(Axis(1)) / width;
    let mean_gx = (&g_xhat * &bc.xhat).sum_axis(Axis(1)) / width;
    let mut out = g_xhat - mean_g.view().insert_axis(Axis(1));
    out -= &(&bc.xhat * &mean_gx.view().insert_axis(Axis(1)));
    out * bc.inv_std.view().insert_axis(Axis(1))
}

/// Loss value, its two terms and `d loss / d u_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub mae: f64,
    pub slackness: f64,
    pub grad_u: Vec<f64>,
    /// Minimizing row of each column after the min trick.
    pub argmin: Vec<usize>,
}

/// `MAE(u_hat, u*) + lambda * sum over optimal edges of relu(C - u_hat - v_hat)`
/// with `v_hat` built from `u_hat` by the min trick.
///
/// The gradient of `v_hat[j]` is routed entirely to `u_hat[argmin[j]]`.
/// Subgradients at kinks: `sign(0) = 0` and `relu'(0) = 0`.
pub fn loss(u_hat: &[f64], inst: &LabeledInstance, lambda_cs: f64) -> LossValue {
    let n = u_hat.len();
    let nf = n as f64;
    let mut grad = vec![0.0; n];
    let mut mae = 0.0;
    for i in 0..n {
        let diff = u_hat[i] - inst.u_star[i];
        mae += diff.abs();
        grad[i] += if diff > 0.0 {
            1.0 / nf
        } else if diff < 0.0 {
            -1.0 / nf
        } else {
            0.0
        };
    }
    mae /= nf;

    let mt = min_trick(&inst.c, u_hat);
    let mut slack = 0.0;
    if lambda_cs != 0.0 {
        for (i, &j) in inst.row_to_col.iter().enumerate() {
            let r = (inst.c.get(i, j) - u_hat[i]) - mt.duals.v[j];
            if r > 0.0 {
                slack += r;
                grad[i] -= lambda_cs;
                grad[mt.argmin[j]] += lambda_cs;
            }
        }
    }
    LossValue {
        total: mae + lambda_cs * slack,
        mae,
        slackness: slack,
        grad_u: grad,
        argmin: mt.argmin,
    }
}
