//! Warm-start pipeline: features, row potential prediction, column
//! potentials by the min trick, equality-density gate, seeded solve.

mod features;
mod min_trick;
mod pipeline;

pub use features::{
    extract_features, raw_row_statistics, FeatureDim, FeatureMatrix, FEATURE_NAMES,
};
pub use min_trick::{equality_density, min_trick, reduced_dual_objective, MinTrick};
pub use pipeline::{
    seeded_pipeline, warm_solve, PipelineConfig, PipelineError, PipelineReport, StageTimes,
    STAGE_NAMES,
};
