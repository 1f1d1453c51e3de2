//! Summary statistics over run records: mean-of-ratios speedups against the
//! cold solver, confidence intervals, run-time stability and stage breakdowns.

use crate::record::RunRecord;
use crate::spec::Strategy;
use dualseed::warmstart::STAGE_NAMES;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use thiserror::Error;

/// Two-sided 95% quantile of the standard normal.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("{strategy} at n = {n} has {trials} successful trial(s); a confidence interval needs at least 2")]
    InsufficientTrials {
        strategy: Strategy,
        n: usize,
        trials: usize,
    },
    #[error("no cold run for {generator} n = {n} trial {trial}")]
    MissingBaseline {
        generator: String,
        n: usize,
        trial: usize,
    },
    #[error("{strategy} at n = {n}, trial {trial} only timed the solver stage")]
    SingleStageRecord {
        strategy: Strategy,
        n: usize,
        trial: usize,
    },
    #[error("no records to summarize")]
    Empty,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Sample standard deviation (Bessel-corrected); zero for a single value.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Midpoint median.
pub fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Population coefficient of variation `std / mean`.
pub fn coefficient_of_variation(xs: &[f64]) -> f64 {
    population_std(xs) / mean(xs)
}

/// Half width of the normal-approximation 95% interval of the mean.
pub fn ci_half_width(xs: &[f64]) -> f64 {
    Z95 * sample_std(xs) / (xs.len() as f64).sqrt()
}

/// One `(generator, strategy, n)` cell of the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub generator: String,
    pub strategy: Strategy,
    pub n: usize,
    pub trials: usize,
    /// Mean over trials of `T_cold / T_strategy`, end to end.
    pub mean_ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub median_ratio: f64,
    pub cv_wall: f64,
    pub mean_wall_ns: f64,
    pub min_wall_ns: u64,
    pub max_wall_ns: u64,
    pub mean_greedy_rate: f64,
    pub mean_augment_searches: f64,
    /// `1 - mean(augment_searches) / mean(cold augment_searches)`.
    pub augment_reduction: f64,
    pub mean_dual_update_steps: f64,
    pub fallback_rate: f64,
    /// Mean seed density; empty for cold runs.
    pub mean_rho: Option<f64>,
    pub errors: usize,
}

type InstanceKey = (String, usize, usize);

/// Summarizes every `(generator, strategy, n)` cell. Each timed run is
/// paired with the cold run on the same instance; failed runs are counted
/// but excluded from the statistics, and a cell in which every run failed
/// is left out.
pub fn summarize(records: &[RunRecord]) -> Result<Vec<CellSummary>, StatsError> {
    if records.is_empty() {
        return Err(StatsError::Empty);
    }
    let cold: BTreeMap<InstanceKey, &RunRecord> = records
        .iter()
        .filter(|r| r.strategy == Strategy::Cold && r.is_ok())
        .map(|r| ((r.generator.clone(), r.n, r.trial), r))
        .collect();
    let mut cells: BTreeMap<(String, usize, Strategy), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        cells
            .entry((r.generator.clone(), r.n, r.strategy))
            .or_default()
            .push(r);
    }

    let mut out = Vec::with_capacity(cells.len());
    for ((generator, n, strategy), cell) in cells {
        let ok: Vec<&RunRecord> = cell.iter().copied().filter(|r| r.is_ok()).collect();
        if ok.is_empty() {
            continue;
        }
        if ok.len() < 2 {
            return Err(StatsError::InsufficientTrials {
                strategy,
                n,
                trials: ok.len(),
            });
        }
        let mut ratios = Vec::with_capacity(ok.len());
        let mut cold_searches = Vec::with_capacity(ok.len());
        for r in &ok {
            let base = cold.get(&(generator.clone(), n, r.trial)).ok_or_else(|| {
                StatsError::MissingBaseline {
                    generator: generator.clone(),
                    n,
                    trial: r.trial,
                }
            })?;
            ratios.push(base.wall_ns as f64 / r.wall_ns.max(1) as f64);
            cold_searches.push(base.augment_searches as f64);
        }
        let walls: Vec<f64> = ok.iter().map(|r| r.wall_ns as f64).collect();
        let field = |f: fn(&RunRecord) -> f64| mean(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        let mean_ratio = mean(&ratios);
        let half = ci_half_width(&ratios);
        let mean_searches = field(|r| r.augment_searches as f64);
        let mean_cold_searches = mean(&cold_searches);
        let rhos: Vec<f64> = ok.iter().filter_map(|r| r.density_rho).collect();
        out.push(CellSummary {
            generator,
            strategy,
            n,
            trials: ok.len(),
            mean_ratio,
            ci_low: mean_ratio - half,
            ci_high: mean_ratio + half,
            median_ratio: median(&ratios),
            cv_wall: coefficient_of_variation(&walls),
            mean_wall_ns: mean(&walls),
            min_wall_ns: ok.iter().map(|r| r.wall_ns).min().unwrap_or(0),
            max_wall_ns: ok.iter().map(|r| r.wall_ns).max().unwrap_or(0),
            mean_greedy_rate: field(|r| r.greedy_match_rate),
            mean_augment_searches: mean_searches,
            augment_reduction: if mean_cold_searches > 0.0 {
                1.0 - mean_searches / mean_cold_searches
            } else {
                0.0
            },
            mean_dual_update_steps: field(|r| r.dual_update_steps as f64),
            fallback_rate: field(|r| r.fallback_triggered as u8 as f64),
            mean_rho: (!rhos.is_empty()).then(|| mean(&rhos)),
            errors: cell.len() - ok.len(),
        });
    }
    Ok(out)
}

/// Mean stage times of one `(strategy, n)` cell, in milliseconds and as a
/// share of the summed stage time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub strategy: Strategy,
    pub n: usize,
    pub features_ms: f64,
    pub model_ms: f64,
    pub min_trick_ms: f64,
    pub fallback_check_ms: f64,
    pub solver_ms: f64,
    pub total_ms: f64,
    pub features_pct: f64,
    pub model_pct: f64,
    pub min_trick_pct: f64,
    pub fallback_check_pct: f64,
    pub solver_pct: f64,
    /// `(features + model + min_trick + fallback_check) / solver`, median over trials.
    pub median_overhead_ratio: f64,
}

impl BreakdownRow {
    pub fn stage_ms(&self) -> [f64; 5] {
        [
            self.features_ms,
            self.model_ms,
            self.min_trick_ms,
            self.fallback_check_ms,
            self.solver_ms,
        ]
    }

    pub fn stage_pct(&self) -> [f64; 5] {
        [
            self.features_pct,
            self.model_pct,
            self.min_trick_pct,
            self.fallback_check_pct,
            self.solver_pct,
        ]
    }
}

/// Runtime breakdown per `(strategy, n)` over the successful records. Cold
/// runs have no pipeline stages and are rejected, as is any other record
/// that only timed the solver.
pub fn breakdown_table(records: &[RunRecord]) -> Result<Vec<BreakdownRow>, StatsError> {
    let mut cells: BTreeMap<(Strategy, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        let t = r.stage_times();
        if t.overhead() == 0 {
            return Err(StatsError::SingleStageRecord {
                strategy: r.strategy,
                n: r.n,
                trial: r.trial,
            });
        }
        cells.entry((r.strategy, r.n)).or_default().push(r);
    }
    if cells.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(cells
        .into_iter()
        .map(|((strategy, n), cell)| {
            let mut ms = [0.0; STAGE_NAMES.len()];
            for r in &cell {
                for (m, t) in ms.iter_mut().zip(r.stage_times().as_array()) {
                    *m += t as f64 / 1e6;
                }
            }
            ms.iter_mut().for_each(|m| *m /= cell.len() as f64);
            let total: f64 = ms.iter().sum();
            let pct = ms.map(|m| 100.0 * m / total);
            let ratios: Vec<f64> = cell
                .iter()
                .map(|r| {
                    let t = r.stage_times();
                    t.overhead() as f64 / t.solver.max(1) as f64
                })
                .collect();
            BreakdownRow {
                strategy,
                n,
                features_ms: ms[0],
                model_ms: ms[1],
                min_trick_ms: ms[2],
                fallback_check_ms: ms[3],
                solver_ms: ms[4],
                total_ms: total,
                features_pct: pct[0],
                model_pct: pct[1],
                min_trick_pct: pct[2],
                fallback_check_pct: pct[3],
                solver_pct: pct[4],
                median_overhead_ratio: median(&ratios),
            }
        })
        .collect())
}

/// Instances whose strategies disagree on the optimal cost beyond a relative
/// `1e-9`, as `(generator, n, trial)`.
pub fn cost_mismatches(records: &[RunRecord]) -> Vec<(String, usize, usize)> {
    let mut costs: BTreeMap<InstanceKey, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        costs
            .entry((r.generator.clone(), r.n, r.trial))
            .or_default()
            .push(r.total_cost);
    }
    costs
        .into_iter()
        .filter(|(_, cs)| {
            let first = cs[0];
            cs.iter()
                .any(|&c| (c - first).abs() > 1e-9 * first.abs().max(1.0))
        })
        .map(|(k, _)| k)
        .collect()
}

/// Writes rows as CSV with a header derived from the field names.
pub fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T]) -> anyhow::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(strategy: Strategy, trial: usize, wall_ns: u64) -> RunRecord {
        let mut r = RunRecord::empty("dense", strategy, 8, trial, trial as u64);
        r.wall_ns = wall_ns;
        r.solver_ns = wall_ns;
        r.total_cost = 1.0;
        r
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-6
    }

    #[test]
    fn cold_against_itself_is_exactly_one() {
        let rs: Vec<_> = (0..4)
            .map(|t| rec(Strategy::Cold, t, 100 + 37 * t as u64))
            .collect();
        let s = summarize(&rs).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mean_ratio, 1.0);
        assert_eq!(s[0].median_ratio, 1.0);
        assert_eq!(s[0].ci_high - s[0].ci_low, 0.0);
        assert_eq!(s[0].augment_reduction, 0.0);
    }

    #[test]
    fn constant_ratio_has_zero_width() {
        let mut rs = Vec::new();
        for t in 0..5 {
            rs.push(rec(Strategy::Cold, t, 200 * (t as u64 + 1)));
            rs.push(rec(Strategy::Neural, t, 100 * (t as u64 + 1)));
        }
        let s = summarize(&rs).unwrap();
        let neural = s.iter().find(|c| c.strategy == Strategy::Neural).unwrap();
        assert_eq!(neural.mean_ratio, 2.0);
        assert_eq!(neural.ci_high - neural.ci_low, 0.0);
    }

    #[test]
    fn hand_computed_statistics() {
        // ratios 1, 2, 4: mean 7/3, sample std sqrt(7/3), median 2
        let mut rs = Vec::new();
        for (t, (c, w)) in [(100, 100), (200, 100), (400, 100)].into_iter().enumerate() {
            rs.push(rec(Strategy::Cold, t, c));
            rs.push(rec(Strategy::Random, t, w));
        }
        let s = summarize(&rs).unwrap();
        let r = s.iter().find(|c| c.strategy == Strategy::Random).unwrap();
        assert!(close(r.mean_ratio, 7.0 / 3.0));
        let half = Z95 * (7.0f64 / 3.0).sqrt() / 3.0f64.sqrt();
        assert!(close(r.ci_high - r.ci_low, 2.0 * half));
        assert!(close(r.ci_high - r.ci_low, 3.457052));
        assert!(close(r.median_ratio, 2.0));
        assert_eq!(r.cv_wall, 0.0);
    }

    #[test]
    fn population_cv() {
        assert!(close(coefficient_of_variation(&[1.0, 2.0, 3.0]), 0.408248));
        let rs: Vec<_> = (0..3)
            .map(|t| rec(Strategy::Cold, t, t as u64 + 1))
            .collect();
        assert!(close(summarize(&rs).unwrap()[0].cv_wall, 0.408248));
    }

    #[test]
    fn median_and_std_helpers() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(sample_std(&[5.0]), 0.0);
        assert!(close(population_std(&[1.0, 2.0, 3.0]), 0.816497));
    }

    #[test]
    fn errors_are_reported() {
        assert_eq!(summarize(&[]), Err(StatsError::Empty));
        let one = vec![rec(Strategy::Cold, 0, 10)];
        assert!(matches!(
            summarize(&one),
            Err(StatsError::InsufficientTrials { trials: 1, .. })
        ));
        let orphan = vec![rec(Strategy::Random, 0, 10), rec(Strategy::Random, 1, 10)];
        assert!(matches!(
            summarize(&orphan),
            Err(StatsError::MissingBaseline { trial: 0, .. })
        ));
    }

    #[test]
    fn cells_without_a_successful_run_are_left_out() {
        let mut rs: Vec<_> = (0..2).map(|t| rec(Strategy::Cold, t, 10)).collect();
        for t in 0..2 {
            let mut r = rec(Strategy::Median, t, 5);
            r.error = Some("no learned median".into());
            rs.push(r);
        }
        let s = summarize(&rs).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].strategy, Strategy::Cold);
    }

    #[test]
    fn failed_runs_are_excluded_and_counted() {
        let mut rs: Vec<_> = (0..3).map(|t| rec(Strategy::Cold, t, 10)).collect();
        for t in 0..3 {
            rs.push(rec(Strategy::Random, t, 5));
        }
        rs[5].error = Some("boom".into());
        let s = summarize(&rs).unwrap();
        let r = s.iter().find(|c| c.strategy == Strategy::Random).unwrap();
        assert_eq!((r.trials, r.errors), (2, 1));
        assert_eq!(r.mean_ratio, 2.0);
    }

    #[test]
    fn breakdown_percentages_sum_to_100() {
        let mut rs = Vec::new();
        for t in 0..3 {
            let mut r = rec(Strategy::Neural, t, 0);
            r.features_ns = 1_000_000 * (t as u64 + 1);
            r.model_ns = 2_000_000;
            r.min_trick_ns = 300_000;
            r.fallback_check_ns = 100_000;
            r.solver_ns = 5_000_000;
            rs.push(r);
        }
        let b = breakdown_table(&rs).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0].stage_pct().iter().sum::<f64>() - 100.0).abs() < 0.1);
        assert!(close(b[0].features_ms, 2.0));
        assert!(close(b[0].total_ms, b[0].stage_ms().iter().sum()));
        assert!(close(b[0].median_overhead_ratio, 4.4 / 5.0));
    }

    #[test]
    fn breakdown_rejects_single_stage_records() {
        let rs = vec![rec(Strategy::Cold, 0, 10)];
        assert!(matches!(
            breakdown_table(&rs),
            Err(StatsError::SingleStageRecord { .. })
        ));
        assert_eq!(breakdown_table(&[]), Err(StatsError::Empty));
    }

    #[test]
    fn mismatched_costs_are_flagged() {
        let mut rs = vec![
            rec(Strategy::Cold, 0, 1),
            rec(Strategy::Neural, 0, 1),
            rec(Strategy::Cold, 1, 1),
        ];
        assert!(cost_mismatches(&rs).is_empty());
        rs[1].total_cost = 1.5;
        assert_eq!(cost_mismatches(&rs), vec![("dense".to_string(), 8, 0)]);
    }

    #[test]
    fn csv_has_fixed_header() {
        let rs: Vec<_> = (0..2).map(|t| rec(Strategy::Cold, t, 10)).collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &summarize(&rs).unwrap()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with(
            "generator,strategy,n,trials,mean_ratio,ci_low,ci_high,median_ratio,cv_wall"
        ));
        assert_eq!(text.lines().count(), 2);
    }
}
