//! One TOML file configuring every stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bon::EvalConfig;
use crate::curation::CurationConfig;
use crate::decontam::DecontamConfig;
use crate::error::{Error, Result};
use crate::gateway::GeneratorConfig;
use crate::pairs::SamplerConfig;
use crate::reward::TrainerConfig;

/// Default input and output locations; command-line paths take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub test_sets: Option<PathBuf>,
    pub references: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub log_level: String,
    pub curation: CurationConfig,
    pub decontamination: DecontamConfig,
    pub generator: GeneratorConfig,
    pub cross_check: GeneratorConfig,
    pub sampler: SamplerConfig,
    pub trainer: TrainerConfig,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            log_level: "info".into(),
            curation: CurationConfig::default(),
            decontamination: DecontamConfig::default(),
            generator: GeneratorConfig::default(),
            cross_check: GeneratorConfig::cross_check_default(),
            sampler: SamplerConfig::default(),
            trainer: TrainerConfig::default(),
            eval: EvalConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(raw: &str) -> Result<Self> {
        let config: PipelineConfig = toml::from_str(raw).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&raw)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Resets every tuned constant to its reference value, keeping paths, endpoints,
    /// seeds and the log level.
    pub fn apply_reference_defaults(&mut self) {
        let fresh = PipelineConfig::default();
        self.curation = fresh.curation;
        self.decontamination.ngram_size = fresh.decontamination.ngram_size;
        self.decontamination.lcs_threshold = fresh.decontamination.lcs_threshold;
        self.sampler.group_size = fresh.sampler.group_size;
        self.sampler.window_k = fresh.sampler.window_k;
        self.sampler.strategy = fresh.sampler.strategy;
        self.trainer.loss = fresh.trainer.loss;
        self.eval.n = fresh.eval.n;
        self.eval.pool_size = fresh.eval.pool_size;
        self.eval.num_seeds = fresh.eval.num_seeds;
        self.generator.enable_constraint_evolution = false;
    }

    /// Applies a root seed to every seeded stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.sampler.seed = seed;
        self.trainer.seed = seed;
        self.eval.seed_base = seed;
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            self.curation.validate(),
            self.decontamination.validate(),
            self.generator.validate(),
            self.cross_check.validate(),
            self.sampler.validate(),
            self.trainer.validate(),
            self.eval.validate().map_err(|e| e.to_string()),
        ];
        checks
            .into_iter()
            .collect::<std::result::Result<Vec<()>, String>>()
            .map(|_| ())
            .map_err(Error::Config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_reference_constants() {
        let c = PipelineConfig::default();
        assert_eq!(c.curation.max_prompt_words, 300);
        assert_eq!(c.curation.max_response_words, 2500);
        assert_eq!(c.decontamination.ngram_size, 13);
        assert_eq!(c.decontamination.lcs_threshold, 0.60);
        assert_eq!(c.sampler.group_size, 6);
        assert_eq!(c.sampler.window_k, 14);
        assert_eq!((c.eval.n, c.eval.pool_size, c.eval.num_seeds), (8, 64, 100));
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        let partial = PipelineConfig::from_toml_str("[eval]\nn = 2\npool_size = 4\n").unwrap();
        assert_eq!(partial.eval.n, 2);
        assert_eq!(partial.curation, CurationConfig::default());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let err = PipelineConfig::from_toml_str("[trainer]\nlearning_rate = -1.0\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(PipelineConfig::from_toml_str("[eval]\nn = 100\n").is_err());
        assert!(PipelineConfig::from_toml_str("not toml [").is_err());
    }

    #[test]
    fn reference_defaults_reset_constants_only() {
        let mut c = PipelineConfig::from_toml_str(
            "[curation]\nmax_prompt_words = 10\n[sampler]\nwindow_k = 3\nseed = 5\n[paths]\ninput = \"x.jsonl\"\n",
        )
        .unwrap();
        c.apply_reference_defaults();
        assert_eq!(c.curation.max_prompt_words, 300);
        assert_eq!(c.sampler.window_k, 14);
        assert_eq!(c.sampler.seed, 5);
        assert_eq!(c.paths.input, Some(PathBuf::from("x.jsonl")));
    }
}
