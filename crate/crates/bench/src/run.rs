//! Runs every strategy of an experiment on identical instances.

use crate::record::RunRecord;
use crate::spec::{ExperimentSpec, Generator, Strategy};
use anyhow::Context;
use dualseed::baselines::{
    seed_learned_median, seed_linreg, seed_random, seed_row_mean, seed_subgradient, train_linreg,
    LinearModel, SubgradientConfig,
};
use dualseed::datagen::{
    gen_block, gen_dense, gen_labels_with, instance_rng, read_dataset, read_matrix, sparsify,
    write_dataset, BlockParams, Dataset,
};
use dualseed::lap::solve_cold_with;
use dualseed::net::{load_checkpoint_for, LabeledInstance, ModelParams};
use dualseed::warmstart::{seeded_pipeline, warm_solve, FeatureDim, PipelineConfig, PipelineError};
use dualseed::CostMatrix;
use rand::Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

/// Subgradient budget when neither the spec nor a neural run fixes one.
pub const DEFAULT_SUBGRADIENT_BUDGET_NS: u64 = 1_000_000;

/// Trained non-neural baselines: pooled linear regressions per feature width
/// and learned medians per instance size.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Baselines {
    pub linreg: BTreeMap<usize, LinearModel>,
    pub median: BTreeMap<usize, Vec<f64>>,
}

impl Baselines {
    /// Fits a linear model for every feature width and a learned median for
    /// every instance size present in `instances`.
    pub fn fit(instances: &[LabeledInstance]) -> anyhow::Result<Self> {
        let mut out = Self::default();
        if instances.is_empty() {
            return Ok(out);
        }
        for dim in [FeatureDim::D4, FeatureDim::D13, FeatureDim::D21] {
            out.linreg
                .insert(dim.width(), train_linreg(instances, dim)?);
        }
        let mut by_n: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
        for inst in instances {
            by_n.entry(inst.n()).or_default().push(inst.u_star.clone());
        }
        for (n, duals) in by_n {
            out.median.insert(n, seed_learned_median(&duals)?);
        }
        Ok(out)
    }

    pub fn from_dataset(ds: &Dataset) -> Self {
        let mut out = Self::default();
        for (key, values) in &ds.named {
            if let Some(d) = key.strip_prefix("linreg_d").and_then(|d| d.parse().ok()) {
                if let Some(m) = LinearModel::from_vec(values) {
                    out.linreg.insert(d, m);
                }
            } else if let Some(n) = key.strip_prefix("median_n").and_then(|n| n.parse().ok()) {
                out.median.insert(n, values.clone());
            }
        }
        out
    }

    pub fn to_dataset(&self) -> Dataset {
        let mut ds = Dataset::default();
        for (d, m) in &self.linreg {
            ds.named.insert(format!("linreg_d{d}"), m.to_vec());
        }
        for (n, v) in &self.median {
            ds.named.insert(format!("median_n{n}"), v.clone());
        }
        ds
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let ds = read_dataset(path, 10)
            .with_context(|| format!("reading baselines {}", path.display()))?;
        Ok(Self::from_dataset(&ds))
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        write_dataset(path, &self.to_dataset())
            .with_context(|| format!("writing baselines {}", path.display()))
    }
}

/// Everything an experiment needs besides the spec.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub model: Option<ModelParams>,
    pub baselines: Baselines,
}

impl Resources {
    /// Loads the checkpoint and baselines the spec's strategies need.
    pub fn load(spec: &ExperimentSpec) -> anyhow::Result<Self> {
        let mut res = Self::default();
        if spec.strategies.contains(&Strategy::Neural) {
            let path = spec
                .model_path()
                .context("the neural strategy needs `model`")?;
            res.model = Some(
                load_checkpoint_for(path, spec.pipeline.feature_dim)
                    .with_context(|| format!("loading checkpoint {}", path.display()))?,
            );
        }
        if let Some(path) = &spec.baselines {
            res.baselines = Baselines::load(path)?;
        }
        Ok(res)
    }
}

/// Seed of instance `(n, trial)` in an experiment seeded with `seed`.
pub fn instance_seed(seed: u64, n: usize, trial: usize) -> u64 {
    instance_rng(seed, ((n as u64) << 32) | trial as u64).random()
}

/// Builds the instance of one grid cell, including optional masking.
pub fn make_instance(
    spec: &ExperimentSpec,
    n: usize,
    trial: usize,
) -> anyhow::Result<(CostMatrix, u64)> {
    let s = instance_seed(spec.seed, n, trial);
    let c = match &spec.generator {
        Generator::Dense => gen_dense(n, s)?,
        Generator::Block => gen_block(&BlockParams::new(n, s))?,
        Generator::File(path) => {
            read_matrix(path).with_context(|| format!("reading {}", path.display()))?
        }
    };
    let c = if spec.mask_fraction > 0.0 {
        sparsify(&c, spec.mask_fraction, s ^ 0x5eed)?
    } else {
        c
    };
    Ok((c, s))
}

/// Sizes of the grid: the file generator has a single size, its own.
pub fn grid_sizes(spec: &ExperimentSpec) -> anyhow::Result<Vec<usize>> {
    match &spec.generator {
        Generator::File(path) => Ok(vec![read_matrix(path)
            .with_context(|| format!("reading {}", path.display()))?
            .n()]),
        _ => Ok(spec.sizes.clone()),
    }
}

/// Shared per-instance state across the strategies of one cell.
struct CellContext<'a> {
    spec: &'a ExperimentSpec,
    res: &'a Resources,
    c: &'a CostMatrix,
    instance_seed: u64,
    /// Gauge-fixed optimal row potentials, computed on demand, untimed.
    u_star: Option<Vec<f64>>,
    /// Model stage time of the neural run on this instance.
    neural_model_ns: Option<u64>,
}

fn strategy_error(msg: impl Into<String>) -> PipelineError {
    PipelineError::Model(dualseed::net::NetError::ShapeMismatch(msg.into()))
}

impl CellContext<'_> {
    fn ensure_labels(&mut self) -> anyhow::Result<()> {
        if self.u_star.is_none() {
            let inst = gen_labels_with(self.c, self.spec.pipeline.feature_k)?;
            self.u_star = Some(inst.u_star);
        }
        Ok(())
    }

    /// One run of `strategy`, filling `rec` with the measurements.
    fn run(&mut self, strategy: Strategy, rec: &mut RunRecord) -> anyhow::Result<()> {
        let cfg: &PipelineConfig = &self.spec.pipeline;
        let c = self.c;
        let n = c.n();
        if strategy == Strategy::OptimalOracle {
            self.ensure_labels()?;
        }
        let t = Instant::now();
        let outcome = match strategy {
            Strategy::Cold => {
                let sol = solve_cold_with(c, &cfg.solver_options())?;
                rec.wall_ns = t.elapsed().as_nanos() as u64;
                rec.solver_ns = rec.wall_ns;
                rec.total_cost = sol.assignment.total_cost;
                rec.set_stats(&sol.stats);
                return Ok(());
            }
            Strategy::Neural => {
                let model = self.res.model.as_ref().context("no model loaded")?;
                warm_solve(c, model, cfg)
            }
            Strategy::RowMean => seeded_pipeline(c, cfg, false, |c, _| Ok(seed_row_mean(c))),
            Strategy::Random => {
                seeded_pipeline(c, cfg, false, |c, _| Ok(seed_random(c, self.instance_seed)))
            }
            Strategy::Linreg => {
                let width = cfg.feature_dim.width();
                let model = self.res.baselines.linreg.get(&width);
                seeded_pipeline(c, cfg, true, |_, f| {
                    let m = model.ok_or_else(|| {
                        strategy_error(format!("no linreg weights for d = {width}"))
                    })?;
                    Ok(seed_linreg(f.expect("features requested"), m))
                })
            }
            Strategy::Median => {
                let median = self.res.baselines.median.get(&n);
                seeded_pipeline(c, cfg, false, |_, _| {
                    let m = median
                        .ok_or_else(|| strategy_error(format!("no learned median for n = {n}")))?;
                    seed_learned_median(std::slice::from_ref(m))
                        .map_err(|e| strategy_error(e.to_string()))
                })
            }
            Strategy::Subgradient => {
                let budget = match (self.spec.subgradient_budget_ns, self.neural_model_ns) {
                    (0, Some(ns)) => ns.max(1),
                    (0, None) => DEFAULT_SUBGRADIENT_BUDGET_NS,
                    (ns, _) => ns,
                };
                let sg = SubgradientConfig {
                    time_budget_ns: budget,
                    ..SubgradientConfig::default()
                };
                seeded_pipeline(c, cfg, false, |c, _| Ok(seed_subgradient(c, &sg)))
            }
            Strategy::OptimalOracle => {
                let u = self.u_star.clone().expect("labels computed above");
                seeded_pipeline(c, cfg, false, move |_, _| Ok(u))
            }
        };
        rec.wall_ns = t.elapsed().as_nanos() as u64;
        let (_, report) = outcome?;
        rec.set_report(&report);
        if strategy == Strategy::Neural {
            self.neural_model_ns = Some(report.stage_times.features + report.stage_times.model);
        }
        Ok(())
    }
}

/// Runs one grid cell: every strategy, sequentially, on the same instance.
fn run_cell(spec: &ExperimentSpec, res: &Resources, n: usize, trial: usize) -> Vec<RunRecord> {
    match make_instance(spec, n, trial) {
        Ok((c, seed)) => run_on_instance(spec, res, &c, seed, trial),
        Err(e) => spec
            .strategies
            .iter()
            .map(|&s| {
                let mut r = RunRecord::empty(&spec.generator.label(), s, n, trial, 0);
                r.error = Some(format!("{e:#}"));
                r
            })
            .collect(),
    }
}

/// Runs every strategy of `spec` on `c`, sequentially, returning records in
/// strategy order. Failures are recorded, not raised. The neural strategy
/// runs first so a matched subgradient budget can use its forward time.
pub fn run_on_instance(
    spec: &ExperimentSpec,
    res: &Resources,
    c: &CostMatrix,
    instance_seed: u64,
    trial: usize,
) -> Vec<RunRecord> {
    let label = spec.generator.label();
    let mut ctx = CellContext {
        spec,
        res,
        c,
        instance_seed,
        u_star: None,
        neural_model_ns: None,
    };
    let mut order = spec.strategies.clone();
    order.sort_by_key(|&s| s != Strategy::Neural);
    let mut records = Vec::with_capacity(order.len());
    for strategy in order {
        let mut rec = RunRecord::empty(&label, strategy, c.n(), trial, instance_seed);
        if spec.warmup && trial == 0 {
            let mut scratch = rec.clone();
            let _ = ctx.run(strategy, &mut scratch);
            rec.warmed_up = true;
        }
        if let Err(e) = ctx.run(strategy, &mut rec) {
            rec.error = Some(format!("{e:#}"));
        }
        records.push(rec);
    }
    records.sort_by_key(|r| r.strategy);
    records
}

/// Runs the full grid. Cells may run in parallel; the strategies of one
/// instance always run sequentially on one worker. Records come back ordered
/// by `(n, trial, strategy)`. Failures are recorded per record.
pub fn run_experiment(spec: &ExperimentSpec, res: &Resources) -> anyhow::Result<Vec<RunRecord>> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> = grid_sizes(spec)?
        .into_iter()
        .flat_map(|n| (0..spec.trials).map(move |t| (n, t)))
        .collect();
    let per_cell: Vec<Vec<RunRecord>> = if spec.parallel {
        cells
            .par_iter()
            .map(|&(n, t)| run_cell(spec, res, n, t))
            .collect()
    } else {
        cells
            .iter()
            .map(|&(n, t)| run_cell(spec, res, n, t))
            .collect()
    };
    Ok(per_cell.into_iter().flatten().collect())
}

/// Loads resources and runs the grid.
pub fn run_spec(spec: &ExperimentSpec) -> anyhow::Result<Vec<RunRecord>> {
    let res = Resources::load(spec)?;
    run_experiment(spec, &res)
}

/// Feature width parsed from a CLI or spec value.
pub fn feature_dim(d: usize) -> anyhow::Result<FeatureDim> {
    FeatureDim::from_width(d).with_context(|| format!("feature width must be 4, 13 or 21, got {d}"))
}
