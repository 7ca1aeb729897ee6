use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use revdetect_core::classifier::{GbdtHyperparams, SearchSpace};
use revdetect_core::evaluation::EvalConfig;
use revdetect_core::features::FeatureConfig;
use revdetect_core::providers::ProviderConfig;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfigs {
    pub chat: ProviderConfig,
    pub embed: ProviderConfig,
    pub score: ProviderConfig,
}

impl Default for ProviderConfigs {
    fn default() -> Self {
        Self {
            chat: ProviderConfig::stub("stub-chat"),
            embed: ProviderConfig::stub("stub-embed"),
            score: ProviderConfig::stub("stub-score"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Share of papers assigned to training.
    pub fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { fraction: 0.8, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub models: Vec<String>,
    pub clean_model: String,
    pub extraction_model: String,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            models: ["gpt-4o", "claude-3.5-sonnet", "gemini-1.5-pro", "llama-3.1-70b"]
                .map(String::from)
                .to_vec(),
            clean_model: "gpt-4o-mini".into(),
            extraction_model: "gpt-4o-mini".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub out: Option<PathBuf>,
    /// Raw corpus files read by `ingest`.
    pub inputs: Vec<PathBuf>,
    /// Directory of prompt template overrides.
    pub templates_dir: Option<PathBuf>,
    pub providers: ProviderConfigs,
    pub features: FeatureConfig,
    pub hyperparams: GbdtHyperparams,
    pub search: SearchSpace,
    pub split: SplitConfig,
    /// Confidence threshold for selective prediction.
    pub theta: f64,
    pub generation: GenerationConfig,
    pub evaluation: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            out: None,
            inputs: Vec::new(),
            templates_dir: None,
            providers: ProviderConfigs::default(),
            features: FeatureConfig::default(),
            hyperparams: GbdtHyperparams::default(),
            search: SearchSpace::default(),
            split: SplitConfig::default(),
            theta: 0.8,
            generation: GenerationConfig::default(),
            evaluation: EvalConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses a TOML file. Relative paths inside it are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.out.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.templates_dir.as_mut() {
            resolve(p);
        }
        cfg.inputs.iter_mut().for_each(resolve);
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        for p in self.inputs.iter().chain(&self.templates_dir) {
            if !p.exists() {
                return Err(CliError::config(format!("{} does not exist", p.display())));
            }
        }
        for (name, p) in [
            ("chat", &self.providers.chat),
            ("embed", &self.providers.embed),
            ("score", &self.providers.score),
        ] {
            p.validate()
                .map_err(|e| CliError::config(format!("providers.{name}: {e}")))?;
        }
        self.features
            .validate()
            .map_err(|e| CliError::config(format!("features: {e}")))?;
        self.hyperparams
            .validate()
            .map_err(|e| CliError::config(format!("hyperparams: {e}")))?;
        if !(self.split.fraction > 0.0 && self.split.fraction < 1.0) {
            return Err(CliError::config(format!(
                "split.fraction {} outside (0, 1)",
                self.split.fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(CliError::config(format!("theta {} outside [0, 1]", self.theta)));
        }
        if self.generation.models.is_empty() {
            return Err(CliError::config("generation.models is empty"));
        }
        let ev = &self.evaluation;
        if ev.fpr_targets.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(CliError::config("evaluation.fpr_targets must lie in [0, 1]"));
        }
        if ev.theta_grid.is_empty() || ev.theta_grid.iter().any(|t| !t.is_finite()) {
            return Err(CliError::config("evaluation.theta_grid must be non-empty and finite"));
        }
        Ok(())
    }
}
