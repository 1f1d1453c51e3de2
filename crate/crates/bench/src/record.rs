//! One timed strategy run on one instance, stored as line-delimited JSON.

use crate::spec::Strategy;
use dualseed::lap::SolveStats;
use dualseed::warmstart::{PipelineReport, StageTimes};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub generator: String,
    pub strategy: Strategy,
    pub n: usize,
    pub trial: usize,
    pub instance_seed: u64,
    /// NaN for failed runs, written as `null`.
    #[serde(deserialize_with = "nan_if_null")]
    pub total_cost: f64,
    /// End to end, every stage included.
    pub wall_ns: u64,
    pub features_ns: u64,
    pub model_ns: u64,
    pub min_trick_ns: u64,
    pub fallback_check_ns: u64,
    pub solver_ns: u64,
    /// Equality subgraph density of the seed; absent for cold runs.
    pub density_rho: Option<f64>,
    pub fallback_triggered: bool,
    pub greedy_matched: usize,
    pub free_rows: usize,
    pub augment_searches: usize,
    pub dual_update_steps: usize,
    pub greedy_match_rate: f64,
    /// An untimed warm-up run of this (strategy, n) preceded the timed runs.
    pub warmed_up: bool,
    pub error: Option<String>,
}

fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl RunRecord {
    /// Record skeleton for `(strategy, n, trial)` with nothing measured yet.
    pub fn empty(
        generator: &str,
        strategy: Strategy,
        n: usize,
        trial: usize,
        instance_seed: u64,
    ) -> Self {
        Self {
            generator: generator.to_string(),
            strategy,
            n,
            trial,
            instance_seed,
            total_cost: f64::NAN,
            wall_ns: 0,
            features_ns: 0,
            model_ns: 0,
            min_trick_ns: 0,
            fallback_check_ns: 0,
            solver_ns: 0,
            density_rho: None,
            fallback_triggered: false,
            greedy_matched: 0,
            free_rows: 0,
            augment_searches: 0,
            dual_update_steps: 0,
            greedy_match_rate: 0.0,
            warmed_up: false,
            error: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn set_stats(&mut self, stats: &SolveStats) {
        self.greedy_matched = stats.greedy_matched;
        self.free_rows = stats.free_rows;
        self.augment_searches = stats.augment_searches;
        self.dual_update_steps = stats.dual_update_steps;
        self.greedy_match_rate = stats.greedy_match_rate();
    }

    pub fn set_report(&mut self, report: &PipelineReport) {
        let t = &report.stage_times;
        self.features_ns = t.features;
        self.model_ns = t.model;
        self.min_trick_ns = t.min_trick;
        self.fallback_check_ns = t.fallback_check;
        self.solver_ns = t.solver;
        self.density_rho = Some(report.density_rho);
        self.fallback_triggered = report.fallback_triggered;
        self.total_cost = report.total_cost;
        self.set_stats(&report.solve_stats);
    }

    pub fn stage_times(&self) -> StageTimes {
        StageTimes {
            features: self.features_ns,
            model: self.model_ns,
            min_trick: self.min_trick_ns,
            fallback_check: self.fallback_check_ns,
            solver: self.solver_ns,
        }
    }

    /// The record with every timing field zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        Self {
            wall_ns: 0,
            features_ns: 0,
            model_ns: 0,
            min_trick_ns: 0,
            fallback_check_ns: 0,
            solver_ns: 0,
            ..self.clone()
        }
    }
}

pub fn write_records<W: Write>(mut w: W, records: &[RunRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> anyhow::Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| anyhow::anyhow!("record line {}: {e}", idx + 1))?;
        out.push(rec);
    }
    Ok(out)
}
