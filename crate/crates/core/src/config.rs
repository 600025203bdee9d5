//! Pipeline configuration, loaded from one TOML file.
//!
//! Every key is optional and unknown keys are rejected. Defaults:
//!
//! ```toml
//! [prompt]
//! pattern = "A {gender}, with {education} grade education, {race} race, age is {age} and income is {income}."
//! separator = " "
//!
//! [augment]
//! marks = [",", ".", "!", "'", "?"]
//! copies = 20
//! max_rate = 0.1
//! seed = 0
//!
//! [labels]
//! names = ["conscientiousness", "openness", "extraversion", "agreeableness", "emotional_stability",
//!          "perspective_taking", "personal_distress", "fantasy", "empathic_concern"]
//! ranges = [[1, 7], [1, 7], [1, 7], [1, 7], [1, 7], [1, 5], [1, 5], [1, 5], [1, 5]]
//!
//! [columns]
//! id = "id"
//! essay = "essay"
//! gender = "gender"
//! education = "education"
//! race = "race"
//! age = "age"
//! income = "income"
//! origin = "origin_id"
//!
//! [train]
//! lambda = 1.0
//! feature_dim = 262144
//! copies = 0          # augmented copies generated inside `train`
//!
//! [ensemble]
//! backends = []       # empty: every loaded model and remote backend, in load order
//! clamp = false
//! allow_partial = false
//!
//! [service]
//! bind = "0.0.0.0"
//! port = 8000
//! max_essay_chars = 20000
//! max_in_flight = 4   # per websocket connection
//! # log_path = "predictions.jsonl"
//! log_inputs = true   # essays are stored in the log; false keeps only their hash
//!
//! # [[remote]]
//! # id = "m2"
//! # url = "http://127.0.0.1:9001"
//! # timeout_ms = 10000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentationConfig, DEFAULT_COPIES, DEFAULT_MARKS, DEFAULT_MAX_RATE};
use crate::corpus::{ColumnNames, CorpusSchema};
use crate::features::{check_feature_dim, DEFAULT_FEATURE_DIM};
use crate::prompt::PromptTemplate;
use crate::scores::LabelSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub prompt: PromptSettings,
    pub augment: AugmentSettings,
    pub labels: LabelSet,
    pub columns: ColumnNames,
    pub train: TrainSettings,
    pub ensemble: EnsembleSettings,
    pub service: ServiceSettings,
    pub remote: Vec<RemoteSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSettings {
    pub pattern: String,
    pub separator: String,
}

impl Default for PromptSettings {
    fn default() -> Self {
        PromptSettings {
            pattern: PromptTemplate::PROSE_PATTERN.into(),
            separator: PromptTemplate::DEFAULT_SEPARATOR.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSettings {
    pub marks: Vec<String>,
    pub copies: u32,
    pub max_rate: f64,
    pub seed: u64,
}

impl Default for AugmentSettings {
    fn default() -> Self {
        AugmentSettings {
            marks: DEFAULT_MARKS.iter().map(|c| c.to_string()).collect(),
            copies: DEFAULT_COPIES,
            max_rate: DEFAULT_MAX_RATE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub lambda: f64,
    pub feature_dim: usize,
    pub copies: u32,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            lambda: 1.0,
            feature_dim: DEFAULT_FEATURE_DIM,
            copies: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSettings {
    pub backends: Vec<String>,
    pub clamp: bool,
    pub allow_partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSettings {
    pub bind: String,
    pub port: u16,
    pub max_essay_chars: usize,
    pub max_in_flight: usize,
    pub log_path: Option<PathBuf>,
    /// Write each composed input (prompt and essay) into the log, not just its hash.
    pub log_inputs: bool,
}

pub const DEFAULT_PORT: u16 = 8000;
pub const PORT_ENV: &str = "PPIPE_PORT";

impl Default for ServiceSettings {
    fn default() -> Self {
        ServiceSettings {
            bind: "0.0.0.0".into(),
            port: DEFAULT_PORT,
            max_essay_chars: 20_000,
            max_in_flight: 4,
            log_path: None,
            log_inputs: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteSettings {
    pub id: String,
    pub url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    10_000
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.template()?;
        self.augmentation()?.validate()?;
        self.labels.validate()?;
        check_feature_dim(self.train.feature_dim)?;
        if !(self.train.lambda >= 0.0 && self.train.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "train.lambda must be >= 0, got {}",
                self.train.lambda
            )));
        }
        if self.service.max_in_flight == 0 {
            return Err(Error::Config("service.max_in_flight must be positive".into()));
        }
        for (i, r) in self.remote.iter().enumerate() {
            if r.id.is_empty() || self.remote[..i].iter().any(|o| o.id == r.id) {
                return Err(Error::Config(format!(
                    "remote backend id {:?} is empty or repeated",
                    r.id
                )));
            }
        }
        Ok(())
    }

    pub fn template(&self) -> Result<PromptTemplate> {
        PromptTemplate::new(&self.prompt.pattern, &self.prompt.separator)
    }

    pub fn augmentation(&self) -> Result<AugmentationConfig> {
        Ok(AugmentationConfig {
            marks: AugmentationConfig::marks_from_strings(&self.augment.marks)?,
            copies: self.augment.copies,
            max_rate: self.augment.max_rate,
            seed: self.augment.seed,
        })
    }

    pub fn schema(&self) -> CorpusSchema {
        CorpusSchema {
            columns: self.columns.clone(),
            labels: self.labels.clone(),
        }
    }
}

/// Port to listen on: `PPIPE_PORT` when set (passed in as `env_value`), else the configured port.
pub fn resolve_port(configured: u16, env_value: Option<&str>) -> Result<u16> {
    match env_value {
        None => Ok(configured),
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{PORT_ENV}={v:?} is not a valid port"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = PipelineConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.service.port, 8000);
        assert_eq!(cfg.service.bind, "0.0.0.0");
        assert_eq!(cfg.template().unwrap(), PromptTemplate::prose());
        assert_eq!(cfg.augmentation().unwrap(), AugmentationConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml_str("[prompt]\npatern = \"x\"").is_err());
        assert!(PipelineConfig::from_toml_str("colour = 1").is_err());
    }

    #[test]
    fn prompt_pattern_key() {
        let cfg = PipelineConfig::from_toml_str(&format!(
            "[prompt]\npattern = {:?}\nseparator = \"\"\n",
            PromptTemplate::CODE_VERBATIM_PATTERN
        ))
        .unwrap();
        assert_eq!(cfg.template().unwrap(), PromptTemplate::code_verbatim());
        assert!(PipelineConfig::from_toml_str("[prompt]\npattern = \"{gender} only\"").is_err());
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn documented_defaults_parse() {
        // The module docs list every default; they must parse to the same config.
        let doc = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").strip_prefix(' ').unwrap_or(""))
            .collect::<Vec<_>>()
            .join("\n");
        assert_eq!(PipelineConfig::from_toml_str(&doc).unwrap(), PipelineConfig::default());
    }

    #[test]
    fn port_override() {
        assert_eq!(resolve_port(8000, None).unwrap(), 8000);
        assert_eq!(resolve_port(8000, Some("9123")).unwrap(), 9123);
        assert!(resolve_port(8000, Some("http")).is_err());
    }
}
