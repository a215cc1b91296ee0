//! Engine configuration.
//!
//! Every section defaults to the published constants, so an empty file is
//! a valid configuration. Values can be overridden per key with
//! `section.key=value` strings (TOML value syntax on the right-hand side).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::content::PromptTemplates;
use crate::gating::{ClassifierBands, GateConfig};
use crate::fusion::FusionWeights;
use crate::signal::SignalConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid override `{0}`: expected section.key=value")]
    Override(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Order of the two temporal stages between fusion and gating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageOrder {
    /// Rolling mean over frame scores, then interpolation at each tick.
    #[default]
    WindowThenSmooth,
    /// Interpolation of the raw score at each tick, then a rolling mean of the tick outputs.
    SmoothThenWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Interpolation coefficient applied once per state tick.
    pub alpha: f64,
    /// Rolling window length in seconds.
    pub window: f64,
    /// State update ticks per second.
    pub tick_rate: f64,
    pub order: StageOrder,
    pub weights: FusionWeights,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            alpha: 0.35,
            window: 4.0,
            tick_rate: 10.0,
            order: StageOrder::WindowThenSmooth,
            weights: FusionWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContentConfig {
    /// Seconds a level must hold before content is requested for it.
    pub debounce: f64,
    /// Seconds before a provider request resolves to static text.
    pub timeout: f64,
    /// Replace text on an open panel when newer content arrives.
    pub live_swap: bool,
    /// Simulated provider latency (session seconds) for deterministic replay.
    pub mock_latency: f64,
    pub levels: PromptTemplates,
}

impl Default for ContentConfig {
    fn default() -> Self {
        ContentConfig {
            debounce: 2.0,
            timeout: 4.0,
            live_swap: false,
            mock_latency: 0.8,
            levels: PromptTemplates::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Environment variable holding the bearer credential.
    pub credential_env: String,
    pub workers: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            endpoint: None,
            credential_env: "ENGAGE_PROVIDER_TOKEN".into(),
            workers: 2,
        }
    }
}

impl ProviderConfig {
    pub fn credential(&self) -> Option<String> {
        std::env::var(&self.credential_env).ok().filter(|s| !s.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub signal: SignalConfig,
    pub fusion: FusionConfig,
    pub classifier: ClassifierBands,
    pub gates: GateConfig,
    pub content: ContentConfig,
    pub provider: ProviderConfig,
    /// Line-delimited content cache loaded before and saved after a replay.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_path: Option<PathBuf>,
}

impl EngineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        Self::from_toml_with_overrides::<&str>(s, &[])
    }

    /// Parses `s`, applies `section.key=value` overrides, and validates.
    pub fn from_toml_with_overrides<S: AsRef<str>>(s: &str, overrides: &[S]) -> Result<Self, ConfigError> {
        let mut doc: toml::Table = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o.as_ref())?;
        }
        let cfg: EngineConfig = doc.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = ConfigError::Invalid;
        self.signal.validate().map_err(inv)?;
        self.fusion.weights.validate().map_err(|e| inv(e.to_string()))?;
        let f = &self.fusion;
        if !(0.0..=1.0).contains(&f.alpha) {
            return Err(inv(format!("fusion.alpha must lie in [0, 1], got {}", f.alpha)));
        }
        if !(f.window.is_finite() && f.window > 0.0) {
            return Err(inv(format!("fusion.window must be positive, got {}", f.window)));
        }
        if !(f.tick_rate.is_finite() && f.tick_rate > 0.0) {
            return Err(inv(format!("fusion.tick_rate must be positive, got {}", f.tick_rate)));
        }
        self.classifier.validate().map_err(inv)?;
        self.gates.validate().map_err(inv)?;
        let c = &self.content;
        for (name, v) in [("debounce", c.debounce), ("timeout", c.timeout), ("mock_latency", c.mock_latency)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(inv(format!("content.{name} must be non-negative, got {v}")));
            }
        }
        c.levels.validate().map_err(inv)?;
        if self.provider.kind == ProviderKind::Remote && self.provider.endpoint.is_none() {
            return Err(inv("provider.kind = \"remote\" requires provider.endpoint".into()));
        }
        Ok(())
    }

    /// Short stable hash of the effective configuration.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }
}

fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(spec.to_owned()))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::Override(spec.to_owned()));
    }
    let raw = raw.trim();
    // Bare words that are not TOML literals are taken as strings.
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    let (last, parents) = keys.split_last().expect("non-empty");
    let mut table = doc;
    for k in parents {
        table = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override(spec.to_owned()))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
