use super::instance::LabeledInstance;
use super::params::ModelParams;
use super::NetError;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub scheduler_factor: f64,
    pub scheduler_patience: usize,
    /// Relative improvement needed to reset the plateau counter.
    pub scheduler_threshold: f64,
    pub lambda_cs: f64,
    /// Instances per optimizer step.
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub val_fraction: f64,
    /// Return the parameters with the best validation loss instead of the last ones.
    pub keep_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            scheduler_factor: 0.5,
            scheduler_patience: 10,
            scheduler_threshold: 1e-4,
            lambda_cs: 0.1,
            batch: 8,
            epochs: 100,
            seed: 0,
            val_fraction: 0.1,
            keep_best: false,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_mae: f64,
    pub lr: f64,
    pub lambda_cs: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
}

impl TrainOutcome {
    /// Training log as line-delimited JSON.
    pub fn log_jsonl(&self) -> String {
        self.log
            .iter()
            .map(|e| serde_json::to_string(e).expect("plain struct serializes"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Adaptive moments with decoupled weight decay.
struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for k in 0..params.len() {
            let g = grad[k];
            self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * g;
            self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[k] / bc1;
            let v_hat = self.v[k] / bc2;
            params[k] -= lr * cfg.weight_decay * params[k];
            params[k] -= lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
}

/// Halves (by `factor`) the learning rate after `patience` epochs without
/// relative improvement of the monitored loss.
struct Plateau {
    best: f64,
    bad_epochs: usize,
}

impl Plateau {
    fn update(&mut self, metric: f64, lr: &mut f64, cfg: &TrainConfig) {
        if metric < self.best * (1.0 - cfg.scheduler_threshold) {
            self.best = metric;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs > cfg.scheduler_patience {
                *lr *= cfg.scheduler_factor;
                self.bad_epochs = 0;
            }
        }
    }
}

/// Mean `(loss, mae)` over `set`.
pub fn evaluate(
    params: &ModelParams,
    set: &[&LabeledInstance],
    lambda_cs: f64,
) -> Result<(f64, f64), NetError> {
    let parts: Vec<(f64, f64)> = set
        .par_iter()
        .map(|inst| {
            let f = inst.features.truncated(params.config.feature_dim);
            let u = params.forward(&f, &inst.c)?;
            let lv = super::model::loss(&u, inst, lambda_cs);
            Ok((lv.total, lv.mae))
        })
        .collect::<Result<_, NetError>>()?;
    let k = parts.len().max(1) as f64;
    Ok(parts
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0 / k, a.1 + p.1 / k)))
}

/// Trains `init` on `dataset`.
///
/// A `val_fraction` share of the instances (at least one; the whole set when
/// it has a single instance) is held out to drive the plateau scheduler.
/// Per-instance gradients may be computed in parallel but are reduced in
/// index order, so the result depends only on the inputs and `cfg.seed`.
pub fn train(
    init: ModelParams,
    dataset: &[LabeledInstance],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, NetError> {
    if dataset.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let (train_idx, val_idx): (Vec<usize>, Vec<usize>) = if dataset.len() == 1 {
        (vec![0], vec![0])
    } else {
        let n_val =
            ((dataset.len() as f64 * cfg.val_fraction).ceil() as usize).clamp(1, dataset.len() - 1);
        (order[n_val..].to_vec(), order[..n_val].to_vec())
    };
    let val_set: Vec<&LabeledInstance> = val_idx.iter().map(|&i| &dataset[i]).collect();

    let mut params = init;
    let mut flat = params.to_flat();
    let mut opt = AdamW::new(flat.len());
    let mut lr = cfg.lr;
    let mut plateau = Plateau {
        best: f64::INFINITY,
        bad_epochs: 0,
    };
    let mut best = (f64::INFINITY, params.clone());
    let mut log = Vec::with_capacity(cfg.epochs + 1);

    let (val_loss, val_mae) = evaluate(&params, &val_set, cfg.lambda_cs)?;
    let train_set: Vec<&LabeledInstance> = train_idx.iter().map(|&i| &dataset[i]).collect();
    let (train_loss, _) = evaluate(&params, &train_set, cfg.lambda_cs)?;
    log.push(EpochLog {
        epoch: 0,
        train_loss,
        val_loss,
        val_mae,
        lr,
        lambda_cs: cfg.lambda_cs,
    });

    let batch = cfg.batch.max(1);
    let mut shuffled = train_idx.clone();
    for epoch in 1..=cfg.epochs {
        shuffled.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in shuffled.chunks(batch) {
            let results: Vec<_> = chunk
                .par_iter()
                .map(|&i| params.loss_and_grad(&dataset[i], cfg.lambda_cs))
                .collect::<Result<_, NetError>>()?;
            let mut grad = params.zeros_like();
            for (lv, g) in &results {
                epoch_loss += lv.total;
                grad.add_assign(g);
            }
            grad.scale(1.0 / chunk.len() as f64);
            opt.step(&mut flat, &grad.to_flat(), lr, cfg);
            params.load_flat(&flat);
        }
        let train_loss = epoch_loss / shuffled.len() as f64;
        let (val_loss, val_mae) = evaluate(&params, &val_set, cfg.lambda_cs)?;
        if cfg.keep_best && val_loss < best.0 {
            best = (val_loss, params.clone());
        }
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            val_mae,
            lr,
            lambda_cs: cfg.lambda_cs,
        });
        plateau.update(val_loss, &mut lr, cfg);
    }

    let params = if cfg.keep_best && best.0.is_finite() {
        best.1
    } else {
        params
    };
    Ok(TrainOutcome { params, log })
}
