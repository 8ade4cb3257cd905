use std::path::Path;

use evofuzz::EngineConfig;

use crate::error::CliError;

/// Reads a flat `key = value` file (TOML syntax) into an [`EngineConfig`],
/// then applies `key=value` overrides in order. Missing keys keep their
/// defaults; unknown keys are rejected.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<EngineConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            parse_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => EngineConfig::default(),
    };
    for kv in overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {kv:?} is not key=value")))?;
        cfg.set(k.trim(), v.trim()).map_err(|e| CliError::Config(e.to_string()))?;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<EngineConfig, toml::de::Error> {
    toml::from_str(text)
}

/// The configuration in the same flat format [`parse_config`] reads.
pub fn render_config(cfg: &EngineConfig) -> String {
    toml::to_string(cfg).expect("config is plain scalars")
}
