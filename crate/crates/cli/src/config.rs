//! Plain-text key=value run configuration mirroring `SimConfig`.
//!
//! Lines are `key = value`, `#` starts a comment, unknown keys and bad
//! values are reported with their line number. Missing keys fall back to
//! the documented defaults.

use lcsim::adversary::AdversaryTag;
use lcsim::engine::SimConfig;
use lcsim::strategy::StrategyTag;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for `{key}`")]
    BadValue { line: usize, key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Default: the four-node full-difficulty example configuration.
pub fn default_config() -> SimConfig {
    SimConfig {
        n: 4,
        b: 0,
        p: 1.0,
        rounds: 8,
        strategy: StrategyTag::UniformRandom,
        adversary: AdversaryTag::None,
        selective_relay: false,
        vdf_mode: false,
        seed: 1,
    }
}

pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let mut cfg = default_config();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| ConfigError::Syntax { line, text: content.to_string() })?;
        let bad = || ConfigError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
        };
        match key {
            "n" => cfg.n = value.parse().map_err(|_| bad())?,
            "b" => cfg.b = value.parse().map_err(|_| bad())?,
            "p" => cfg.p = value.parse().map_err(|_| bad())?,
            "rounds" | "t" => cfg.rounds = value.parse().map_err(|_| bad())?,
            "strategy" => cfg.strategy = StrategyTag::parse(value).ok_or_else(bad)?,
            "adversary" => cfg.adversary = AdversaryTag::parse(value).ok_or_else(bad)?,
            "selective_relay" => cfg.selective_relay = value.parse().map_err(|_| bad())?,
            "vdf_mode" => cfg.vdf_mode = value.parse().map_err(|_| bad())?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
            _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
        }
    }
    cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(cfg)
}
