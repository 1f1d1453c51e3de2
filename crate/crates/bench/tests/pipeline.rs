use dualseed::datagen::{gen_dense, gen_labels, write_matrix};
use dualseed::net::{save_checkpoint, train, ModelConfig, ModelParams, TrainConfig};
use dualseed_bench::stats::cost_mismatches;
use dualseed_bench::{
    read_records, run_spec, summarize, write_records, Baselines, ExperimentSpec, RunRecord,
    Strategy,
};
use std::path::Path;
use std::process::Command;

/// A small model and baselines fitted on `n = 24` and `n = 32` instances,
/// saved in `dir`. Learned medians exist only for sizes seen in training.
fn fit_resources(dir: &Path) {
    let data: Vec<_> = [24, 32]
        .into_iter()
        .flat_map(|n| (0..6).map(move |s| gen_labels(&gen_dense(n, s).unwrap()).unwrap()))
        .collect();
    let config = ModelConfig {
        hidden: 16,
        num_blocks: 1,
        ..ModelConfig::default()
    };
    let cfg = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let out = train(ModelParams::init(config, 1), &data, &cfg).unwrap();
    save_checkpoint(&out.params, dir.join("model.rdn")).unwrap();
    Baselines::fit(&data)
        .unwrap()
        .save(&dir.join("baselines.ds"))
        .unwrap();
}

#[test]
fn every_strategy_runs_from_a_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    fit_resources(dir.path());
    let text = format!(
        "# all seed strategies on one small grid\n\
         generator = dense\n\
         sizes = 24, 32\n\
         trials = 3\n\
         seed = 11\n\
         strategies = cold, neural, row_mean, random, linreg, median, subgradient, optimal_oracle\n\
         model = {}\n\
         baselines = {}\n\
         tau = 0\n",
        dir.path().join("model.rdn").display(),
        dir.path().join("baselines.ds").display(),
    );
    let spec = ExperimentSpec::parse(&text).unwrap();
    let records = run_spec(&spec).unwrap();
    assert_eq!(records.len(), 2 * 3 * 8);
    assert!(records.iter().all(RunRecord::is_ok), "{records:#?}");
    assert!(cost_mismatches(&records).is_empty());

    let mut buf = Vec::new();
    write_records(&mut buf, &records).unwrap();
    assert_eq!(read_records(&buf[..]).unwrap(), records);

    let summary = summarize(&records).unwrap();
    assert_eq!(summary.len(), 2 * 8);
    for cell in &summary {
        assert_eq!(cell.trials, 3);
        if cell.strategy == Strategy::Cold {
            assert!((cell.mean_ratio - 1.0).abs() < 1e-12);
        }
        if cell.strategy == Strategy::OptimalOracle {
            assert_eq!(cell.mean_dual_update_steps, 0.0);
            assert_eq!(cell.mean_greedy_rate, 1.0);
        }
    }
}

#[test]
fn cli_solves_a_generated_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("c.bin");
    let status = Command::new(env!("CARGO_BIN_EXE_dualseed"))
        .args(["gen", "--n", "20", "--seed", "4", "--matrix-only", "--out"])
        .arg(&matrix)
        .status()
        .unwrap();
    assert!(status.success());

    let solve = |strategy: &str| -> RunRecord {
        let out = Command::new(env!("CARGO_BIN_EXE_dualseed"))
            .args(["solve", "--tau", "0", "--strategy", strategy, "--matrix"])
            .arg(&matrix)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let cold = solve("cold");
    let oracle = solve("optimal_oracle");
    assert_eq!(cold.n, 20);
    assert_eq!(cold.total_cost, oracle.total_cost);
    assert_eq!(oracle.dual_update_steps, 0);

    // the written matrix is the generator's
    let c = gen_dense(20, dualseed_bench::run::instance_seed(4, 20, 0)).unwrap();
    let again = dir.path().join("again.bin");
    write_matrix(&again, &c).unwrap();
    assert_eq!(
        std::fs::read(&matrix).unwrap(),
        std::fs::read(&again).unwrap()
    );
}
