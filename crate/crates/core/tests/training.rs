use dualseed::datagen::{gen_dense, gen_labels};
use dualseed::lap::{solve_cold, solve_seeded};
use dualseed::net::{
    evaluate, load_checkpoint, loss, save_checkpoint, train, ModelConfig, ModelParams, TrainConfig,
};
use dualseed::warmstart::{min_trick, warm_solve, PipelineConfig};

fn labeled(seeds: std::ops::Range<u64>, n: usize) -> Vec<dualseed::net::LabeledInstance> {
    seeds
        .map(|s| gen_labels(&gen_dense(n, s).unwrap()).unwrap())
        .collect()
}

#[test]
fn short_training_run_improves_the_seed() {
    let train_set = labeled(0..24, 64);
    let test_set = labeled(500..504, 64);
    let config = ModelConfig {
        hidden: 32,
        num_blocks: 2,
        ..ModelConfig::default()
    };
    let init = ModelParams::init(config, 3);
    let cfg = TrainConfig {
        epochs: 15,
        batch: 4,
        ..TrainConfig::default()
    };
    let test_refs: Vec<_> = test_set.iter().collect();
    let (before, _) = evaluate(&init, &test_refs, cfg.lambda_cs).unwrap();
    let out = train(init, &train_set, &cfg).unwrap();
    let (after, _) = evaluate(&out.params, &test_refs, cfg.lambda_cs).unwrap();
    // labels are centered, so predicting zero is the natural constant baseline
    let zero: f64 = test_set
        .iter()
        .map(|inst| loss(&vec![0.0; inst.c.n()], inst, cfg.lambda_cs).total)
        .sum::<f64>()
        / test_set.len() as f64;
    assert!(after < before, "held-out loss {before} -> {after}");
    assert!(
        after < 0.6 * zero,
        "held-out loss {after} vs {zero} for the zero prediction"
    );
    assert_eq!(out.log.len(), cfg.epochs + 1);
    assert!(out.log.last().unwrap().train_loss < out.log[0].train_loss);

    // every held-out solve stays exact, through the checkpoint round trip
    let dir = std::env::temp_dir().join(format!("dualseed-training-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("model.rdn");
    save_checkpoint(&out.params, &path).unwrap();
    let model = load_checkpoint(&path).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    for inst in &test_set {
        let cold = solve_cold(&inst.c).unwrap();
        let (sol, _) = warm_solve(&inst.c, &model, &PipelineConfig::default()).unwrap();
        assert_eq!(sol.assignment.total_cost, cold.assignment.total_cost);
        let u = model.forward(&inst.features, &inst.c).unwrap();
        let seeded = solve_seeded(&inst.c, &min_trick(&inst.c, &u).duals).unwrap();
        assert_eq!(seeded.assignment.total_cost, cold.assignment.total_cost);
    }
}
