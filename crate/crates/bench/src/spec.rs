//! Experiment specifications, read from `key = value` text files.
//!
//! ```text
//! # comments start with '#'
//! generator = dense            # dense | block | file:<path>
//! sizes = 64, 128
//! trials = 10
//! strategies = cold, neural, random
//! seed = 0
//! model = model.rdn            # checkpoint for the neural strategy
//! model_d13 = model13.rdn      # per feature width, for the feature sweep
//! baselines = baselines.lapd   # linreg weights and learned medians
//! eps = 1e-5
//! tau = 1.2
//! eq_tol = 1e-9
//! refine_k = 16
//! feature_k = 10
//! feature_dim = 21
//! mask_fraction = 0
//! subgradient_budget_ns = 0    # 0: match the measured model time
//! warmup = true
//! ```

use dualseed::warmstart::{FeatureDim, PipelineConfig};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {msg}")]
    BadValue {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("invalid spec: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    Dense,
    Block,
    File(PathBuf),
}

impl Generator {
    pub fn label(&self) -> String {
        match self {
            Self::Dense => "dense".into(),
            Self::Block => "block".into(),
            Self::File(p) => format!("file:{}", p.display()),
        }
    }
}

impl FromStr for Generator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dense" => Ok(Self::Dense),
            "block" => Ok(Self::Block),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Self::File(PathBuf::from(p))),
                _ => Err(format!("unknown generator `{s}`")),
            },
        }
    }
}

/// A seed strategy; the order of variants is the report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Cold,
    Neural,
    RowMean,
    Random,
    Linreg,
    Median,
    Subgradient,
    OptimalOracle,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Self::Cold,
        Self::Neural,
        Self::RowMean,
        Self::Random,
        Self::Linreg,
        Self::Median,
        Self::Subgradient,
        Self::OptimalOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cold => "cold",
            Self::Neural => "neural",
            Self::RowMean => "row_mean",
            Self::Random => "random",
            Self::Linreg => "linreg",
            Self::Median => "median",
            Self::Subgradient => "subgradient",
            Self::OptimalOracle => "optimal_oracle",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub generator: Generator,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub strategies: Vec<Strategy>,
    pub pipeline: PipelineConfig,
    /// Checkpoint for the neural strategy at `pipeline.feature_dim`.
    pub model: Option<PathBuf>,
    /// Checkpoints per feature width, used by the feature sweep.
    pub models: BTreeMap<usize, PathBuf>,
    /// Dataset file holding linreg weights and learned medians.
    pub baselines: Option<PathBuf>,
    pub seed: u64,
    pub mask_fraction: f64,
    /// Wall-clock cap of the subgradient baseline; 0 matches the neural
    /// model's measured forward time on the same instance.
    pub subgradient_budget_ns: u64,
    /// One untimed run per (strategy, n) before the first timed trial.
    pub warmup: bool,
    /// Run independent (n, trial) cells concurrently. Off by default so
    /// wall-clock times are not distorted by contention.
    pub parallel: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            generator: Generator::Dense,
            sizes: vec![64],
            trials: 3,
            strategies: vec![Strategy::Cold],
            pipeline: PipelineConfig::default(),
            model: None,
            models: BTreeMap::new(),
            baselines: None,
            seed: 0,
            mask_fraction: 0.0,
            subgradient_budget_ns: 0,
            warmup: true,
            parallel: false,
        }
    }
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

fn parse_one<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("`{value}`: {e}"))
}

impl ExperimentSpec {
    /// Parses a spec file body. Unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let mut spec = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(SpecError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            spec.set(key, value).map_err(|msg| match msg {
                None => SpecError::UnknownKey {
                    line,
                    key: key.to_string(),
                },
                Some(msg) => SpecError::BadValue {
                    line,
                    key: key.to_string(),
                    msg,
                },
            })?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Sets one key. `Err(None)` means the key is unknown.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Option<String>> {
        let p = &mut self.pipeline;
        match key {
            "generator" => self.generator = value.parse()?,
            "sizes" => self.sizes = parse_list(value)?,
            "trials" => self.trials = parse_one(value)?,
            "strategies" => self.strategies = parse_list(value)?,
            "seed" => self.seed = parse_one(value)?,
            "model" => self.model = Some(PathBuf::from(value)),
            "baselines" => self.baselines = Some(PathBuf::from(value)),
            "eps" => p.eps = parse_one(value)?,
            "tau" => p.tau = parse_one(value)?,
            "eq_tol" => p.eq_tol = parse_one(value)?,
            "refine_k" => p.refine_k = parse_one(value)?,
            "feature_k" => p.feature_k = parse_one(value)?,
            "feature_dim" => {
                let d: usize = parse_one(value)?;
                p.feature_dim = FeatureDim::from_width(d)
                    .ok_or_else(|| format!("feature_dim must be 4, 13 or 21, got {d}"))?;
            }
            "mask_fraction" => self.mask_fraction = parse_one(value)?,
            "subgradient_budget_ns" => self.subgradient_budget_ns = parse_one(value)?,
            "warmup" => self.warmup = parse_one(value)?,
            "parallel" => self.parallel = parse_one(value)?,
            _ => match key
                .strip_prefix("model_d")
                .and_then(|d| d.parse::<usize>().ok())
            {
                Some(d) if FeatureDim::from_width(d).is_some() => {
                    self.models.insert(d, PathBuf::from(value));
                }
                _ => return Err(None),
            },
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let bad = |m: &str| Err(SpecError::Invalid(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy is required");
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return bad("sizes must be a non-empty list of positive integers");
        }
        let p = &self.pipeline;
        if p.eps.is_nan()
            || p.eps <= 0.0
            || p.tau.is_nan()
            || p.tau < 0.0
            || p.refine_k == 0
            || p.feature_k == 0
        {
            return bad("pipeline needs eps > 0, tau >= 0, refine_k >= 1, feature_k >= 1");
        }
        if !(0.0..1.0).contains(&self.mask_fraction) {
            return bad("mask_fraction must lie in [0, 1)");
        }
        Ok(())
    }

    /// Checkpoint for the configured feature width.
    pub fn model_path(&self) -> Option<&PathBuf> {
        self.models
            .get(&self.pipeline.feature_dim.width())
            .or(self.model.as_ref())
    }
}
