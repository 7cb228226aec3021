use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use windnet::datagen::DatasetConfig;
use windnet::model::ModelConfig;
use windnet::trainer::TrainConfig;

use crate::UsageError;

/// Everything a run can be configured with. Every command reads the same
/// document and ignores the sections it does not need; command-line flags
/// take precedence over values from the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Source of all randomness: corpus synthesis, wind, initialization and
    /// batch order.
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub dataset: DatasetConfig,
    pub synth: SynthConfig,
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// Number of synthetic desired-signal files in the corpus.
    pub files: usize,
    pub duration_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            files: 40,
            duration_s: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub manifest: Option<PathBuf>,
    pub weights: Option<PathBuf>,
}

impl RunConfig {
    /// Parses a config file. Errors carry the JSON path of the offending key.
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let at = e.path().to_string();
            if at == "." {
                e.inner().to_string()
            } else {
                format!("at `{at}`: {}", e.inner())
            }
        })
    }

    /// Pushes the single seed into every component that draws random numbers.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
        // Keep the wind streams apart from the corpus streams drawn from the same seed.
        self.dataset.wind.seed = seed ^ 0x9e37_79b9_7f4a_7c15;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::parse("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_names_its_path() {
        let err = RunConfig::parse(r#"{"train": {"epochz": 3}}"#).unwrap_err();
        assert!(err.contains("train"), "{err}");
        assert!(err.contains("epochz"), "{err}");
    }

    #[test]
    fn wrong_type_names_its_path() {
        let err = RunConfig::parse(r#"{"model": {"scale": "big"}}"#).unwrap_err();
        assert!(err.contains("model.scale"), "{err}");
    }

    #[test]
    fn shipped_example_parses() {
        let cfg = RunConfig::parse(include_str!("../../../configs/toy-rejection.json")).unwrap();
        assert_eq!(cfg.model.scale, 0.25);
        assert_eq!(cfg.train.batch_size, 2);
        cfg.model.validate().unwrap();
        cfg.train.validate().unwrap();
    }

    #[test]
    fn defaults_round_trip() {
        let text = serde_json::to_string(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), RunConfig::default());
    }
}
