//! World configuration as TOML.
//!
//! Keys mirror [`WorldConfig`] field names; the heuristic constants live in a
//! `[heuristics]` table. Omitted keys take their defaults, unknown keys are
//! rejected.
//!
//! ```toml
//! n_seekers = 2
//! n_hiders = 1
//! max_time = 60.0
//!
//! [heuristics]
//! lambda_wall = 3.0
//! ```

use std::path::{Path, PathBuf};

use hideseek_core::config::{ConfigError, WorldConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

pub fn parse_config(text: &str) -> Result<WorldConfig, ConfigFileError> {
    let config: WorldConfig = toml::from_str(text)?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<WorldConfig, ConfigFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io { path: path.to_owned(), source })?;
    parse_config(&text)
}

pub fn to_toml(config: &WorldConfig) -> String {
    toml::to_string(config).expect("WorldConfig always serializes")
}
