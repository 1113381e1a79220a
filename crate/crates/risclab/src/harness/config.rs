//! Experiment configuration: schema, validation, overrides, hashing.
//!
//! Configs are TOML with an explicit `schema_version`; unknown keys are
//! rejected so typos fail loudly before any run starts. Dotted-path
//! `--set key=value` overrides are applied to the raw TOML tree, which
//! keeps the same validation path for files and overrides. The config
//! hash is the SHA-256 of the canonical re-serialization and identifies
//! compatible runs during aggregation.

use crate::env::{DeploymentConfig, EnvError, GridSpec};
use crate::learner::AgentConfig;
use crate::switching::{ControllerKind, SwitchConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("TOML parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported schema_version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("invalid field {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("override {0:?} is not of the form key=value")]
    MalformedOverride(String),
    #[error("environment error: {0}")]
    Env(#[from] EnvError),
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Which environment a run uses: a builtin id (`four_rooms`, `chain:<n>`)
/// or a plain-text map file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvChoice {
    pub builtin: Option<String>,
    pub map_path: Option<PathBuf>,
}

impl Default for EnvChoice {
    fn default() -> Self {
        Self {
            builtin: Some("four_rooms".to_string()),
            map_path: None,
        }
    }
}

impl EnvChoice {
    pub fn build(&self) -> Result<GridSpec, ConfigError> {
        match (&self.builtin, &self.map_path) {
            (Some(id), None) => {
                if id == "four_rooms" {
                    Ok(GridSpec::four_rooms())
                } else if let Some(len) = id.strip_prefix("chain:") {
                    let len: usize = len.parse().map_err(|_| {
                        invalid("env.builtin", format!("bad chain length in {id:?}"))
                    })?;
                    Ok(GridSpec::chain(len)?)
                } else {
                    Err(invalid(
                        "env.builtin",
                        format!("unknown builtin {id:?} (try \"four_rooms\" or \"chain:<n>\")"),
                    ))
                }
            }
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                    path: path.clone(),
                    source,
                })?;
                Ok(GridSpec::parse_map(&text)?)
            }
            _ => Err(invalid(
                "env",
                "exactly one of env.builtin or env.map_path must be set",
            )),
        }
    }
}

/// Switching-policy section; the minimum length is given as a fraction of
/// the maximum and rounded down to whole steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwitchSection {
    pub zeta: f64,
    pub min_length_fraction: f64,
    pub max_length: u64,
    pub beta: f64,
    /// Hand-off threshold for the reverse-curriculum baseline.
    pub rc_threshold: f64,
    /// Score competency with the exact ε-greedy mixture.
    pub eps_mixture_competency: bool,
}

impl Default for SwitchSection {
    fn default() -> Self {
        Self {
            zeta: 0.5,
            min_length_fraction: 0.0,
            max_length: 100,
            beta: 0.95,
            rc_threshold: 0.2,
            eps_mixture_competency: false,
        }
    }
}

impl SwitchSection {
    pub fn to_switch_config(&self) -> Result<SwitchConfig, ConfigError> {
        SwitchConfig::from_fraction(self.zeta, self.min_length_fraction, self.max_length, self.beta)
            .map_err(|e| invalid("switch", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Evaluate every this many training steps.
    pub cadence: u64,
    pub episodes: u32,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            cadence: 1_000,
            episodes: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuccessCriticSection {
    pub learning_rate: f64,
}

impl Default for SuccessCriticSection {
    fn default() -> Self {
        Self { learning_rate: 1e-3 }
    }
}

/// The complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub controller: ControllerKind,
    pub seeds: Vec<u64>,
    /// Steps at which Q/Q_F snapshots are captured for heatmaps.
    pub snapshot_steps: Vec<u64>,
    pub env: EnvChoice,
    pub agent: AgentConfig,
    pub success_critic: SuccessCriticSection,
    pub switch: SwitchSection,
    pub deployment: DeploymentConfig,
    pub eval: EvalSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            controller: ControllerKind::Risc,
            seeds: vec![0, 1, 2, 3, 4],
            snapshot_steps: Vec::new(),
            env: EnvChoice::default(),
            agent: AgentConfig::default(),
            success_critic: SuccessCriticSection::default(),
            switch: SwitchSection::default(),
            deployment: DeploymentConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML text, applies dotted-path overrides, and validates.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut value: toml::Value = toml::from_str(text)?;
        for raw in overrides {
            apply_override(&mut value, raw)?;
        }
        let config: ExperimentConfig = value.try_into()?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed required"));
        }
        self.agent
            .validate()
            .map_err(|reason| invalid("agent", reason))?;
        self.switch.to_switch_config()?;
        if !(0.0..=1.0).contains(&self.switch.rc_threshold) {
            return Err(invalid("switch.rc_threshold", "must lie in [0,1]"));
        }
        self.deployment
            .validate()
            .map_err(|e| invalid("deployment", e.to_string()))?;
        if self.eval.cadence == 0 {
            return Err(invalid("eval.cadence", "must be positive"));
        }
        if self.eval.episodes == 0 {
            return Err(invalid("eval.episodes", "must be positive"));
        }
        if self.success_critic.learning_rate <= 0.0 {
            return Err(invalid("success_critic.learning_rate", "must be positive"));
        }
        // Force the env choice to resolve so a bad id fails at validation
        // time, not mid-sweep. Map files are read lazily at run time.
        if let (Some(_), None) = (&self.env.builtin, &self.env.map_path) {
            self.env.build()?;
        }
        if let (None, None) | (Some(_), Some(_)) = (&self.env.builtin, &self.env.map_path) {
            return Err(invalid(
                "env",
                "exactly one of env.builtin or env.map_path must be set",
            ));
        }
        Ok(())
    }

    /// Canonical serialization; field order is fixed by the struct.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, as lowercase hex.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_canonical_toml().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// A short human-readable label: controller plus bootstrap strategy.
    pub fn label(&self) -> String {
        let strategy = match self.agent.bootstrap_strategy {
            crate::learner::BootstrapStrategy::TimeoutNonterminal => "nonterminal",
            crate::learner::BootstrapStrategy::TimeoutTerminal => "terminal",
        };
        format!("{}-{}", self.controller.as_str(), strategy)
    }
}

/// Applies one `key.path=value` override to a TOML tree, creating
/// intermediate tables as needed. The value is parsed as TOML; bare words
/// that fail to parse are treated as strings.
pub fn apply_override(root: &mut toml::Value, raw: &str) -> Result<(), ConfigError> {
    let (path, raw_value) = raw
        .split_once('=')
        .ok_or_else(|| ConfigError::MalformedOverride(raw.to_string()))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(ConfigError::MalformedOverride(raw.to_string()));
    }
    let value = parse_toml_value(raw_value.trim());

    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for segment in &segments[..segments.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| ConfigError::MalformedOverride(raw.to_string()))?;
        node = table
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| ConfigError::MalformedOverride(raw.to_string()))?;
    table.insert(segments[segments.len() - 1].to_string(), value);
    Ok(())
}

fn parse_toml_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Value>(&wrapped) {
        Ok(toml::Value::Table(mut t)) => t.remove("v").unwrap(),
        _ => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let config = ExperimentConfig::default();
        config.validate().unwrap();
        let text = config.to_canonical_toml();
        let parsed = ExperimentConfig::from_toml(&text, &[]).unwrap();
        assert_eq!(parsed, config);
        assert_eq!(parsed.hash(), config.hash());
    }

    #[test]
    fn sparse_config_fills_defaults() {
        let config = ExperimentConfig::from_toml("controller = \"fbrl\"", &[]).unwrap();
        assert_eq!(config.controller, ControllerKind::Fbrl);
        assert_eq!(config.agent.batch_size, 128);
        assert_eq!(config.deployment.total_train_steps, 50_000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("controler = \"risc\"", &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)), "{err}");
        let err =
            ExperimentConfig::from_toml("[agent]\nlearning_rte = 0.1", &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)), "{err}");
    }

    #[test]
    fn schema_version_is_checked() {
        let err = ExperimentConfig::from_toml("schema_version = 9", &[]).unwrap_err();
        assert!(matches!(
            err,
            ConfigError::SchemaVersion { found: 9, expected: 1 }
        ));
    }

    #[test]
    fn overrides_apply_with_types() {
        let config = ExperimentConfig::from_toml(
            "",
            &[
                "controller=naive".to_string(),
                "switch.zeta=0.25".to_string(),
                "seeds=[7, 8]".to_string(),
                "agent.batch_size=32".to_string(),
            ],
        )
        .unwrap();
        assert_eq!(config.controller, ControllerKind::Naive);
        assert_eq!(config.switch.zeta, 0.25);
        assert_eq!(config.seeds, vec![7, 8]);
        assert_eq!(config.agent.batch_size, 32);
    }

    #[test]
    fn malformed_override_is_rejected() {
        let err = ExperimentConfig::from_toml("", &["zeta".to_string()]).unwrap_err();
        assert!(matches!(err, ConfigError::MalformedOverride(_)));
    }

    #[test]
    fn validation_catches_field_errors() {
        let err = ExperimentConfig::from_toml("switch.zeta = 1.5", &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { .. }), "{err}");
        let err = ExperimentConfig::from_toml("seeds = []", &[]).unwrap_err();
        assert!(err.to_string().contains("seeds"));
        let err = ExperimentConfig::from_toml("env.builtin = \"mystery\"", &[]).unwrap_err();
        assert!(err.to_string().contains("mystery"));
    }

    #[test]
    fn hash_distinguishes_configs() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.controller = ControllerKind::Fbrl;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn chain_builtin_builds() {
        let config = ExperimentConfig::from_toml("env.builtin = \"chain:5\"", &[]).unwrap();
        let spec = config.env.build().unwrap();
        assert_eq!(spec.free_cells().len(), 5);
    }
}
