//! Run configuration shared by the pipeline, trace snapshots and the CLI.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DEFAULT_MIN_COMPONENT_SIZE, DEFAULT_SIMILARITY_THRESHOLD};
use crate::metrics::GroundingConfig;
use crate::pipeline::ClientMode;
use crate::strategies::{EndpointConfig, StrategyConfig};
use crate::traversal::LensSpec;

pub const DEFAULT_MAX_PAPERS: usize = 10;
pub const DEFAULT_TEMPERATURE: f64 = 0.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub refinement: String,
    pub extraction: String,
    pub exploration: String,
    pub synthesis: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let model = "gpt-4o".to_string();
        Self {
            refinement: model.clone(),
            extraction: model.clone(),
            exploration: model.clone(),
            synthesis: model,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub strategy: StrategyConfig,
    pub max_papers: usize,
    pub temperature: f64,
    pub lens: Option<LensSpec>,
    pub mode: ClientMode,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Zero every timestamp so traces are byte-comparable.
    pub deterministic: bool,
    pub controversy_augment: bool,
    /// Share of retrieval slots given to the controversy/limitation query.
    pub controversy_fraction: f64,
    pub similarity_threshold: f64,
    pub min_component_size: usize,
    pub resolution: f64,
    pub max_inter_edges: usize,
    pub top_pairs: usize,
    pub endpoints: EndpointConfig,
    pub max_turns: usize,
    pub n_hypotheses: usize,
    pub grounding: GroundingConfig,
    pub models: ModelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strategy: StrategyConfig::default(),
            max_papers: DEFAULT_MAX_PAPERS,
            temperature: DEFAULT_TEMPERATURE,
            lens: None,
            mode: ClientMode::Mock,
            seed: 0,
            output_dir: None,
            deterministic: false,
            controversy_augment: true,
            controversy_fraction: 0.3,
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            min_component_size: DEFAULT_MIN_COMPONENT_SIZE,
            resolution: 1.0,
            max_inter_edges: 0,
            top_pairs: 3,
            endpoints: EndpointConfig::default(),
            max_turns: 6,
            n_hypotheses: 3,
            grounding: GroundingConfig::default(),
            models: ModelConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        let invalid = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.max_papers == 0 {
            return invalid("max_papers must be at least 1");
        }
        if self.max_turns == 0 {
            return invalid("max_turns must be at least 1");
        }
        if self.n_hypotheses == 0 {
            return invalid("n_hypotheses must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.controversy_fraction) {
            return invalid("controversy_fraction must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return invalid("similarity_threshold must lie in [0, 1]");
        }
        if self.min_component_size == 0 {
            return invalid("min_component_size must be at least 1");
        }
        if self.resolution.is_nan() || self.resolution <= 0.0 {
            return invalid("resolution must be positive");
        }
        Ok(())
    }

    /// Reads a JSON configuration file; absent fields take their defaults.
    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }
}
