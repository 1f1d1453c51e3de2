use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dualseed::datagen::{
    gen_block, gen_dense, gen_labels_with, read_csv, read_dataset, read_matrix, write_dataset,
    BlockParams, Dataset,
};
use dualseed::net::{save_checkpoint, train, Activation, ModelConfig, ModelParams, TrainConfig};
use dualseed::CostMatrix;
use dualseed_bench::calibrate::{calibrate_tau, gate_samples, gated_effort};
use dualseed_bench::run::{
    feature_dim, instance_seed, run_on_instance, run_spec, Baselines, Resources,
};
use dualseed_bench::spec::{ExperimentSpec, Generator, Strategy};
use dualseed_bench::stats::{breakdown_table, cost_mismatches, summarize, write_csv};
use dualseed_bench::sweep::{
    sweep_features, sweep_noise, sweep_permutation, sweep_sparsity, sweep_topk,
};
use dualseed_bench::{read_records, write_records, RunRecord};
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

/// Learned dual warm starts for the linear assignment problem.
#[derive(Parser)]
#[command(name = "dualseed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate labeled instances (or a single matrix) to a file.
    Gen(GenArgs),
    /// Train the row potential network and the non-neural baselines.
    Train(TrainArgs),
    /// Solve one matrix with one strategy and print the run record as JSON.
    Solve(SolveArgs),
    /// Run an experiment spec; write records and optionally a summary.
    Bench(BenchArgs),
    /// Run a sensitivity sweep and write a CSV.
    Sweep(SweepArgs),
    /// Summarize previously written records.
    Report(ReportArgs),
    /// Re-calibrate the density gate threshold for the spec's model.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    /// Spec naming the model and the validation grid.
    #[arg(long)]
    spec: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Dense,
    Block,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "dense")]
    generator: GenKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write only the first cost matrix, unlabeled.
    #[arg(long)]
    matrix_only: bool,
    #[arg(long, default_value_t = 10)]
    feature_k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled dataset written by `gen`.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Also fit the linear and learned-median baselines into this file.
    #[arg(long)]
    baselines: Option<PathBuf>,
    /// Training log as line-delimited JSON.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 21)]
    feature_dim: usize,
    #[arg(long, default_value_t = 10)]
    feature_k: usize,
    #[arg(long, default_value_t = 192)]
    hidden: usize,
    #[arg(long, default_value_t = 3)]
    blocks: usize,
    #[arg(long, default_value_t = 16)]
    refine_k: usize,
    #[arg(long)]
    tanh: bool,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Keep the epoch with the lowest validation loss rather than the last.
    #[arg(long)]
    keep_best: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    /// Matrix file (binary, or CSV when the name ends in `.csv`).
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, default_value = "cold")]
    strategy: Strategy,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    baselines: Option<PathBuf>,
    #[arg(long, default_value_t = 21)]
    feature_dim: usize,
    #[arg(long, default_value_t = 1.2)]
    tau: f64,
    #[arg(long, default_value_t = 16)]
    refine_k: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment spec (`key = value` lines).
    #[arg(long)]
    spec: PathBuf,
    /// Records as line-delimited JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Noise,
    Sparsity,
    Topk,
    Perm,
    Features,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(value_enum)]
    kind: SweepKind,
    #[arg(long)]
    spec: PathBuf,
    /// Comma-separated axis values; each sweep has its own default. For
    /// `perm` a single value: the number of permutations.
    #[arg(long)]
    values: Option<String>,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    records: PathBuf,
    /// Summary CSV; stdout when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Stage breakdown CSV over the non-cold records.
    #[arg(long)]
    breakdown: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn parse_values<T: std::str::FromStr>(values: Option<&str>, default: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    values
        .unwrap_or(default)
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|e| anyhow::anyhow!("bad sweep value `{s}`: {e}"))
        })
        .collect()
}

fn read_spec(path: &Path) -> anyhow::Result<ExperimentSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ExperimentSpec::parse(&text)?)
}

fn load_matrix(path: &Path) -> anyhow::Result<CostMatrix> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let c = if is_csv {
        read_csv(BufReader::new(File::open(path)?))?
    } else {
        read_matrix(path)?
    };
    Ok(c)
}

fn cmd_gen(a: GenArgs) -> anyhow::Result<()> {
    let make = |i: usize| {
        let s = instance_seed(a.seed, a.n, i);
        match a.generator {
            GenKind::Dense => gen_dense(a.n, s),
            GenKind::Block => gen_block(&BlockParams::new(a.n, s)),
        }
    };
    if a.matrix_only {
        dualseed::datagen::write_matrix(&a.out, &make(0)?)?;
        return Ok(());
    }
    let instances = (0..a.count)
        .into_par_iter()
        .map(|i| Ok(gen_labels_with(&make(i)?, a.feature_k)?))
        .collect::<anyhow::Result<Vec<_>>>()?;
    write_dataset(
        &a.out,
        &Dataset {
            instances,
            ..Dataset::default()
        },
    )?;
    eprintln!(
        "wrote {} instances of n = {} to {}",
        a.count,
        a.n,
        a.out.display()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> anyhow::Result<()> {
    let ds = read_dataset(&a.data, a.feature_k)?;
    let config = ModelConfig {
        feature_dim: feature_dim(a.feature_dim)?,
        hidden: a.hidden,
        num_blocks: a.blocks,
        refine_k: a.refine_k,
        activation: if a.tanh {
            Activation::Tanh
        } else {
            Activation::Relu
        },
        ..ModelConfig::default()
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        lr: a.lr,
        batch: a.batch,
        lambda_cs: a.lambda,
        seed: a.seed,
        keep_best: a.keep_best,
        ..TrainConfig::default()
    };
    let outcome = train(ModelParams::init(config, a.seed), &ds.instances, &cfg)?;
    save_checkpoint(&outcome.params, &a.out)?;
    if let Some(last) = outcome.log.last() {
        eprintln!(
            "epoch {}: train loss {:.6}, val loss {:.6}, val mae {:.6}",
            last.epoch, last.train_loss, last.val_loss, last.val_mae
        );
    }
    if let Some(path) = &a.log {
        std::fs::write(path, outcome.log_jsonl() + "\n")?;
    }
    if let Some(path) = &a.baselines {
        Baselines::fit(&ds.instances)?.save(path)?;
    }
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> anyhow::Result<()> {
    let c = load_matrix(&a.matrix)?;
    let mut spec = ExperimentSpec {
        generator: Generator::File(a.matrix.clone()),
        sizes: vec![c.n()],
        trials: 1,
        strategies: vec![a.strategy],
        model: a.model,
        baselines: a.baselines,
        warmup: false,
        ..ExperimentSpec::default()
    };
    spec.pipeline.feature_dim = feature_dim(a.feature_dim)?;
    spec.pipeline.tau = a.tau;
    spec.pipeline.refine_k = a.refine_k;
    spec.validate()?;
    let res = Resources::load(&spec)?;
    let rec = run_on_instance(&spec, &res, &c, 0, 0).remove(0);
    println!("{}", serde_json::to_string_pretty(&rec)?);
    if let Some(e) = &rec.error {
        bail!("{e}");
    }
    Ok(())
}

fn write_summary(records: &[RunRecord], path: Option<&Path>) -> anyhow::Result<()> {
    let failures: BTreeSet<(Strategy, usize, &str)> = records
        .iter()
        .filter_map(|r| Some((r.strategy, r.n, r.error.as_deref()?)))
        .collect();
    for (strategy, n, e) in failures {
        eprintln!("warning: {strategy} at n = {n} failed: {e}");
    }
    let bad = cost_mismatches(records);
    if !bad.is_empty() {
        eprintln!("warning: strategies disagree on the optimal cost for {bad:?}");
    }
    write_csv(output(path)?, &summarize(records)?)
}

fn cmd_bench(a: BenchArgs) -> anyhow::Result<()> {
    let spec = read_spec(&a.spec)?;
    let records = run_spec(&spec)?;
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!(
            "{failed} of {} runs failed; see the `error` field",
            records.len()
        );
    }
    write_records(output(a.out.as_deref())?, &records)?;
    if let Some(path) = &a.summary {
        write_summary(&records, Some(path))?;
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> anyhow::Result<()> {
    let spec = read_spec(&a.spec)?;
    let values = a.values.as_deref();
    let out = output(a.out.as_deref())?;
    match a.kind {
        SweepKind::Noise => write_csv(
            out,
            &sweep_noise(&spec, &parse_values(values, "0,0.05,0.1,0.2,0.4")?)?,
        ),
        SweepKind::Sparsity => {
            let res = Resources::load(&spec)?;
            write_csv(
                out,
                &sweep_sparsity(&spec, &res, &parse_values(values, "0,0.1,0.3,0.5")?)?,
            )
        }
        SweepKind::Topk => {
            let res = Resources::load(&spec)?;
            write_csv(
                out,
                &sweep_topk(&spec, &res, &parse_values(values, "4,8,16,32")?)?,
            )
        }
        SweepKind::Perm => {
            let res = Resources::load(&spec)?;
            let count: Vec<usize> = parse_values(values, "10")?;
            let [count] = count[..] else {
                bail!("the permutation sweep takes a single count");
            };
            let report = sweep_permutation(&spec, &res, count)?;
            for s in &report.summary {
                eprintln!(
                    "{}: wall std {:.0} ns over {} permutations, costs identical: {}",
                    s.strategy, s.std_wall_ns, s.permutations, s.costs_identical
                );
            }
            write_csv(out, &report.runs)
        }
        SweepKind::Features => {
            let dims = parse_values::<usize>(values, "4,13,21")?
                .into_iter()
                .map(feature_dim)
                .collect::<anyhow::Result<Vec<_>>>()?;
            let mut base = spec.clone();
            base.strategies.retain(|&s| s != Strategy::Neural);
            let res = Resources::load(&base)?;
            write_csv(out, &sweep_features(&spec, &res, &dims)?)
        }
    }
}

fn cmd_report(a: ReportArgs) -> anyhow::Result<()> {
    let file =
        File::open(&a.records).with_context(|| format!("opening {}", a.records.display()))?;
    let records = read_records(BufReader::new(file))?;
    write_summary(&records, a.summary.as_deref())?;
    if let Some(path) = &a.breakdown {
        let staged: Vec<RunRecord> = records
            .into_iter()
            .filter(|r| r.strategy != Strategy::Cold)
            .collect();
        write_csv(output(Some(path))?, &breakdown_table(&staged)?)?;
    }
    Ok(())
}

fn cmd_calibrate(a: CalibrateArgs) -> anyhow::Result<()> {
    let mut spec = read_spec(&a.spec)?;
    spec.strategies = vec![Strategy::Neural];
    let res = Resources::load(&spec)?;
    let model = res.model.as_ref().context("the spec names no model")?;
    let samples = gate_samples(&spec, model)?;
    let tau = calibrate_tau(&samples);
    let cold: usize = samples.iter().map(|s| s.cold_steps).sum();
    println!("tau = {tau}");
    println!(
        "dual updates over {} instances: gated {}, cold {cold}",
        samples.len(),
        gated_effort(&samples, tau)
    );
    Ok(())
}

fn main() -> anyhow::Result<()> {
    if let Ok(threads) = std::env::var("DUALSEED_THREADS") {
        let threads: usize = threads
            .parse()
            .context("DUALSEED_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()?;
    }
    match Cli::parse().command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
        Command::Calibrate(a) => cmd_calibrate(a),
    }
}
