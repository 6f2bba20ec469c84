//! TOML configuration: model endpoint, prompt options, OMPScore registry
//! overrides and the parser keyword table. API keys never live here; the
//! `[llm]` section only names the environment variable that holds one.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::directive::{DirectiveParser, DEFAULT_CLAUSE_KEYWORDS};
use crate::llm::GenerationConfig;
use crate::ompscore::{Sensitivity, SensitivityRegistry};
use crate::oracle::HeuristicConfig;
use crate::prompt::{ClauseDetail, ModelFamily, PromptBuilder, PromptTemplates};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSection {
    pub family: ModelFamily,
    pub clause_detail: ClauseDetail,
    pub corrected_spelling: bool,
    /// Template override files, relative to the config file.
    pub basic_template: Option<PathBuf>,
    pub guided_template: Option<PathBuf>,
    pub codellama_basic_template: Option<PathBuf>,
    pub codellama_guided_template: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParserSection {
    /// Replaces the built-in clause keyword table when set.
    pub clause_keywords: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub assume_may_alias: bool,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            assume_may_alias: HeuristicConfig::default().assume_may_alias,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub llm: GenerationConfig,
    pub prompt: PromptSection,
    /// Clause keyword → `order-sensitive` / `order-insensitive`.
    pub registry: BTreeMap<String, String>,
    pub parser: ParserSection,
    pub oracle: OracleSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Config {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        if cfg.llm.replay_dir.is_relative() {
            cfg.llm.replay_dir = base_dir.join(&cfg.llm.replay_dir);
        }
        if cfg.llm.max_in_flight == 0 {
            return Err(ConfigError::Invalid("llm.max_in_flight must be at least 1".into()));
        }
        cfg.registry()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Config::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn registry(&self) -> Result<SensitivityRegistry, ConfigError> {
        let mut reg = SensitivityRegistry::default();
        for (k, v) in &self.registry {
            let s: Sensitivity = v
                .parse()
                .map_err(|e| ConfigError::Invalid(format!("registry.{k}: {e}")))?;
            reg.set(k, s);
        }
        Ok(reg)
    }

    pub fn parser(&self) -> Result<DirectiveParser, ConfigError> {
        let keywords: Vec<String> = match &self.parser.clause_keywords {
            Some(k) => k.clone(),
            None => DEFAULT_CLAUSE_KEYWORDS.iter().map(|s| s.to_string()).collect(),
        };
        Ok(DirectiveParser::new(keywords, self.registry()?))
    }

    pub fn heuristic(&self) -> HeuristicConfig {
        HeuristicConfig {
            assume_may_alias: self.oracle.assume_may_alias,
        }
    }

    pub fn prompt_builder(&self) -> Result<PromptBuilder, ConfigError> {
        let mut templates = PromptTemplates::default();
        let p = &self.prompt;
        let slots = [
            (&p.basic_template, &mut templates.basic),
            (&p.guided_template, &mut templates.guided),
            (&p.codellama_basic_template, &mut templates.codellama_basic),
            (&p.codellama_guided_template, &mut templates.codellama_guided),
        ];
        for (path, slot) in slots {
            if let Some(path) = path {
                *slot = PromptTemplates::read_template(&self.base_dir.join(path))
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            }
        }
        Ok(PromptBuilder {
            templates,
            clause_detail: p.clause_detail,
            corrected_spelling: p.corrected_spelling,
        })
    }
}
