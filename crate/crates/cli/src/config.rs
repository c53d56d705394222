//! JSON run configuration.
//!
//! A config file is a single JSON object whose keys are the fields of
//! [`SimulationConfig`]. Missing keys take their defaults and an empty file
//! means "all defaults". Unknown keys and out-of-range values are rejected
//! with the offending key path in the message.

use std::path::Path;

use sea_walk_core::simulation::SimulationConfig;

use crate::error::{CliError, Result};

pub fn parse_config(path: &Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_str(&text, &path.display().to_string())
}

/// Parse and validate `text`; `origin` labels error messages.
pub fn parse_config_str(text: &str, origin: &str) -> Result<SimulationConfig> {
    let config = if text.trim().is_empty() {
        SimulationConfig::default()
    } else {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let inner = e.into_inner();
            let message = if key == "." { inner.to_string() } else { format!("at `{key}`: {inner}") };
            CliError::Config { path: origin.to_string(), message }
        })?
    };
    config.validate().map_err(|e| CliError::Config { path: origin.to_string(), message: e.to_string() })?;
    Ok(config)
}
