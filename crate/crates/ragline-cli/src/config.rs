//! Pipeline configuration: one TOML file, every key optional, with flag
//! overrides applied on top (flags always win). Credentials never appear
//! here — the API key travels only through the `RAGLINE_API_KEY`
//! environment variable.

use std::path::{Path, PathBuf};

use ragline::chunker::SplitterConfig;
use ragline::embedder::EmbedderConfig;
use ragline::generator::GenerationConfig;
use ragline::retriever::RetrievalConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// File consulted when `--config` is not given.
pub const DEFAULT_CONFIG_FILE: &str = "ragline.toml";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory of source documents (plus optional corpus.manifest.json).
    pub corpus_dir: PathBuf,
    /// Directory holding the persisted vector index.
    pub index_dir: PathBuf,
    /// Prompt template file; the built-in template when unset.
    pub template: Option<PathBuf>,
    pub splitter: SplitterConfig,
    pub embedder: EmbedderConfig,
    pub retrieval: RetrievalConfig,
    pub generation: GenerationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus_dir: PathBuf::from("corpus"),
            index_dir: PathBuf::from("index"),
            template: None,
            splitter: SplitterConfig::default(),
            embedder: EmbedderConfig::default(),
            retrieval: RetrievalConfig::default(),
            generation: GenerationConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Load from `--config` (which must exist when given), else from
    /// `ragline.toml` in the working directory, else defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Self, CliError> {
        let path = match explicit {
            Some(path) => {
                if !path.is_file() {
                    return Err(CliError::Input(format!(
                        "config file not found: {}",
                        path.display()
                    )));
                }
                Some(path.to_path_buf())
            }
            None => {
                let default = PathBuf::from(DEFAULT_CONFIG_FILE);
                default.is_file().then_some(default)
            }
        };
        match path {
            Some(path) => {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Input(format!("reading {}: {e}", path.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Input(format!("parsing {}: {e}", path.display())))
            }
            None => Ok(PipelineConfig::default()),
        }
    }
}
