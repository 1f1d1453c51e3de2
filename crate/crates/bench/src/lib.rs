//! Experiment harness for learned dual warm starts: runs seed strategies on
//! shared instances, summarizes speedups and solver effort, and drives the
//! sensitivity sweeps. The `dualseed` binary is a thin front end over it.

pub mod calibrate;
pub mod record;
pub mod run;
pub mod spec;
pub mod stats;
pub mod sweep;

pub use record::{read_records, write_records, RunRecord};
pub use run::{run_experiment, run_spec, Baselines, Resources};
pub use spec::{ExperimentSpec, Generator, SpecError, Strategy};
pub use stats::{breakdown_table, summarize, BreakdownRow, CellSummary, StatsError};
