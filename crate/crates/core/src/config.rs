//! The handler configuration file: general parameters, per-device handling
//! settings, per-app suppression flags and any custom schemes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apps::{AppId, AppSpec};
use crate::checkpoint::RollbackStrategy;
use crate::device::{home, Registry, TypeClass};
use crate::value::{DeviceId, Tick, Value};

/// One fault-handling function in a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Replicate,
    Retry,
    SoftRestart,
    HardRestart,
    Rollback,
    Notify,
}

impl Step {
    /// Position in the canonical numbering, 1 to 6.
    pub fn number(self) -> u8 {
        match self {
            Step::Replicate => 1,
            Step::Retry => 2,
            Step::SoftRestart => 3,
            Step::HardRestart => 4,
            Step::Rollback => 5,
            Step::Notify => 6,
        }
    }

    pub fn from_number(n: u8) -> Option<Step> {
        [
            Step::Replicate,
            Step::Retry,
            Step::SoftRestart,
            Step::HardRestart,
            Step::Rollback,
            Step::Notify,
        ]
        .get(usize::from(n).checked_sub(1)?)
        .copied()
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Step::Replicate => "replicate",
            Step::Retry => "retry",
            Step::SoftRestart => "soft_restart",
            Step::HardRestart => "hard_restart",
            Step::Rollback => "rollback",
            Step::Notify => "notify",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scheme {
    pub name: String,
    pub steps: Vec<Step>,
}

impl Scheme {
    pub const BUILTIN_NAMES: [&'static str; 4] =
        ["conservative", "transient_resistant", "long_restart", "time_sensitive"];

    pub fn builtin(name: &str) -> Option<Scheme> {
        let order: &[u8] = match name {
            "conservative" => &[1, 2, 3, 4, 5, 6],
            "transient_resistant" => &[1, 3, 4, 5, 6],
            "long_restart" => &[1, 2, 5, 3, 4, 6],
            "time_sensitive" => &[1, 5, 2, 3, 4, 6],
            _ => return None,
        };
        Some(Scheme {
            name: name.to_string(),
            steps: order.iter().map(|n| Step::from_number(*n).expect("1..=6")).collect(),
        })
    }

    pub fn builtins() -> Vec<Scheme> {
        Self::BUILTIN_NAMES
            .iter()
            .map(|n| Self::builtin(n).expect("builtin"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotifyTrigger {
    Occurred,
    Repaired,
    Unrepaired,
}

impl fmt::Display for NotifyTrigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NotifyTrigger::Occurred => "occurred",
            NotifyTrigger::Repaired => "repaired",
            NotifyTrigger::Unrepaired => "unrepaired",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RedundancyConfig {
    pub enabled: bool,
    /// Ticks of history compared.
    pub window: Tick,
    /// Minimum fraction of ticks on which both devices agree.
    pub agreement: f64,
    /// Maximum difference between per-state change rates.
    pub transition_tolerance: f64,
}

impl Default for RedundancyConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            window: 5_000,
            agreement: 0.99,
            transition_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneralConfig {
    /// Longest delay between a fault starting and its report. Checkpoints
    /// wait this long before committing, and repairs are confirmed over it.
    pub identification_upper_bound: Tick,
    pub checkpoint_ttl: Tick,
    /// Absolute tolerance for matching numeric sensor values in checkpoints.
    pub sensor_match_tolerance: f64,
    pub redundancy_detection: RedundancyConfig,
}

impl Default for GeneralConfig {
    fn default() -> Self {
        Self {
            identification_upper_bound: 1,
            checkpoint_ttl: 20_000,
            sensor_match_tolerance: 2.0,
            redundancy_detection: RedundancyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub scheme: String,
    #[serde(default)]
    pub replicas: Vec<DeviceId>,
    pub rollback_strategy: RollbackStrategy,
    pub retry_max: Tick,
    pub restart_attempts: u32,
    #[serde(default)]
    pub notify_triggers: BTreeSet<NotifyTrigger>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail_safe_state: Option<Value>,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            scheme: "conservative".to_string(),
            replicas: Vec::new(),
            rollback_strategy: RollbackStrategy::FailNorm,
            retry_max: 30,
            restart_attempts: 3,
            notify_triggers: BTreeSet::from([NotifyTrigger::Unrepaired]),
            fail_safe_state: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default)]
    pub suppression_enabled: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub general: GeneralConfig,
    #[serde(default)]
    pub devices: BTreeMap<DeviceId, DeviceConfig>,
    #[serde(default)]
    pub apps: BTreeMap<AppId, AppConfig>,
    /// Custom schemes by name, as lists of steps.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub schemes: BTreeMap<String, Vec<Step>>,
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> SchemaError {
    SchemaError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

/// Scheme picked for a device class when generating defaults.
pub fn default_scheme_for(class: TypeClass) -> &'static str {
    match class {
        TypeClass::S3 => "transient_resistant",
        TypeClass::S5 | TypeClass::S6 => "time_sensitive",
        _ => "conservative",
    }
}

impl ConfigFile {
    /// Defaults for every registered device, chosen by type class.
    pub fn init(registry: &Registry, apps: &[AppSpec]) -> Self {
        let mut cfg = ConfigFile::default();
        for spec in registry.specs() {
            let dc = if spec.is_virtual {
                DeviceConfig {
                    rollback_strategy: RollbackStrategy::Disabled,
                    notify_triggers: BTreeSet::new(),
                    ..DeviceConfig::default()
                }
            } else {
                DeviceConfig {
                    scheme: default_scheme_for(spec.type_class).to_string(),
                    rollback_strategy: if spec.is_actuator() { RollbackStrategy::Disabled } else { RollbackStrategy::FailNorm },
                    restart_attempts: spec.max_restart_attempts,
                    fail_safe_state: spec.fail_safe_state,
                    ..DeviceConfig::default()
                }
            };
            cfg.devices.insert(spec.id, dc);
        }
        for app in apps {
            cfg.apps.insert(
                app.id,
                AppConfig {
                    suppression_enabled: app.suppression_enabled,
                },
            );
        }
        cfg
    }

    /// Defaults for the default home, with its two replicated pairs listed.
    pub fn default_home(registry: &Registry, apps: &[AppSpec]) -> Self {
        let mut cfg = Self::init(registry, apps);
        for (a, b) in [(home::SMOKE, home::SMOKE_REPLICA), (home::LIGHT_LIVING, home::LIGHT_HALL)] {
            if registry.spec(a).is_some() && registry.spec(b).is_some() {
                cfg.add_replica(a, b);
                cfg.add_replica(b, a);
            }
        }
        cfg
    }

    pub fn add_replica(&mut self, device: DeviceId, replica: DeviceId) -> bool {
        let dc = self.devices.entry(device).or_default();
        if device == replica || dc.replicas.contains(&replica) {
            return false;
        }
        dc.replicas.push(replica);
        true
    }

    pub fn device(&self, id: DeviceId) -> &DeviceConfig {
        static FALLBACK: std::sync::OnceLock<DeviceConfig> = std::sync::OnceLock::new();
        self.devices
            .get(&id)
            .unwrap_or_else(|| FALLBACK.get_or_init(DeviceConfig::default))
    }

    pub fn scheme(&self, name: &str) -> Option<Scheme> {
        self.schemes
            .get(name)
            .map(|steps| Scheme {
                name: name.to_string(),
                steps: steps.clone(),
            })
            .or_else(|| Scheme::builtin(name))
    }

    pub fn scheme_for(&self, id: DeviceId) -> Scheme {
        self.scheme(&self.device(id).scheme)
            .unwrap_or_else(|| Scheme::builtin("conservative").expect("builtin"))
    }

    /// Applies `scheme` to every device.
    pub fn set_scheme_for_all(&mut self, scheme: &str) -> Result<(), SchemaError> {
        if self.scheme(scheme).is_none() {
            return Err(invalid("devices.*.scheme", format!("unknown scheme `{scheme}`")));
        }
        for dc in self.devices.values_mut() {
            dc.scheme = scheme.to_string();
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let g = &self.general;
        if g.checkpoint_ttl == 0 {
            return Err(invalid("general.checkpoint_ttl", "must be positive"));
        }
        if !(g.sensor_match_tolerance >= 0.0) {
            return Err(invalid("general.sensor_match_tolerance", "must be non-negative"));
        }
        let r = &g.redundancy_detection;
        if r.window == 0 {
            return Err(invalid("general.redundancy_detection.window", "must be positive"));
        }
        if !(0.0..=1.0).contains(&r.agreement) {
            return Err(invalid("general.redundancy_detection.agreement", "must lie in [0, 1]"));
        }
        if !(r.transition_tolerance >= 0.0) {
            return Err(invalid(
                "general.redundancy_detection.transition_tolerance",
                "must be non-negative",
            ));
        }
        for (name, steps) in &self.schemes {
            if steps.is_empty() {
                return Err(invalid(format!("schemes.{name}"), "must list at least one step"));
            }
        }
        for (id, dc) in &self.devices {
            let at = |field: &str| format!("devices.{id}.{field}");
            if self.scheme(&dc.scheme).is_none() {
                return Err(invalid(at("scheme"), format!("unknown scheme `{}`", dc.scheme)));
            }
            if dc.retry_max == 0 {
                return Err(invalid(at("retry_max"), "must be positive"));
            }
            if dc.restart_attempts == 0 {
                return Err(invalid(at("restart_attempts"), "must be positive"));
            }
            if dc.replicas.contains(id) {
                return Err(invalid(at("replicas"), "a device cannot replicate itself"));
            }
        }
        Ok(())
    }

    /// Checks device references against a registry.
    pub fn validate_against(&self, registry: &Registry) -> Result<(), SchemaError> {
        self.validate()?;
        for (id, dc) in &self.devices {
            let Some(spec) = registry.spec(*id) else {
                return Err(invalid(format!("devices.{id}"), "not a registered device"));
            };
            for r in &dc.replicas {
                if registry.spec(*r).is_none() {
                    return Err(invalid(format!("devices.{id}.replicas"), format!("unknown device {r}")));
                }
            }
            if let Some(v) = dc.fail_safe_state {
                if !spec.is_actuator() || !spec.value_domain.contains(v) {
                    return Err(invalid(format!("devices.{id}.fail_safe_state"), "not a valid actuator state"));
                }
            }
        }
        for id in registry.ids() {
            if !self.devices.contains_key(&id) {
                return Err(invalid(format!("devices.{id}"), "missing entry"));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SchemaError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let cfg: ConfigFile = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SchemaError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::builtin_apps;
    use crate::device::default_home;

    #[test]
    fn builtin_orders() {
        let n = |name: &str| -> Vec<u8> {
            Scheme::builtin(name).unwrap().steps.iter().map(|s| s.number()).collect()
        };
        assert_eq!(n("conservative"), vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(n("transient_resistant"), vec![1, 3, 4, 5, 6]);
        assert_eq!(n("long_restart"), vec![1, 2, 5, 3, 4, 6]);
        assert_eq!(n("time_sensitive"), vec![1, 5, 2, 3, 4, 6]);
        assert!(Scheme::builtin("reckless").is_none());
    }

    #[test]
    fn init_covers_every_device() {
        let reg = default_home();
        let cfg = ConfigFile::init(&reg, &builtin_apps());
        assert_eq!(cfg.devices.len(), reg.len());
        cfg.validate_against(&reg).unwrap();
        assert_eq!(cfg.apps.len(), 11);
        assert_eq!(cfg.device(home::DOOR_LOCK).fail_safe_state, Some(Value::ON));
    }

    #[test]
    fn save_load_round_trip() {
        let reg = default_home();
        let mut cfg = ConfigFile::default_home(&reg, &builtin_apps());
        cfg.schemes.insert("quick".into(), vec![Step::Replicate, Step::Notify]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        cfg.save(&path).unwrap();
        assert_eq!(ConfigFile::load(&path).unwrap(), cfg);
    }

    #[test]
    fn unknown_scheme_is_schema_error() {
        let reg = default_home();
        let mut cfg = ConfigFile::init(&reg, &builtin_apps());
        cfg.devices.get_mut(&home::MOTION).unwrap().scheme = "reckless".into();
        match ConfigFile::from_json(&cfg.to_json()) {
            Err(SchemaError::Invalid { path, .. }) => assert_eq!(path, "devices.1.scheme"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(matches!(
            ConfigFile::from_json(r#"{"general":{"bogus":1}}"#),
            Err(SchemaError::Json(_))
        ));
    }

    #[test]
    fn default_home_lists_replicas_both_ways() {
        let reg = default_home();
        let cfg = ConfigFile::default_home(&reg, &builtin_apps());
        assert_eq!(cfg.device(home::SMOKE).replicas, vec![home::SMOKE_REPLICA]);
        assert_eq!(cfg.device(home::LIGHT_HALL).replicas, vec![home::LIGHT_LIVING]);
    }
}
