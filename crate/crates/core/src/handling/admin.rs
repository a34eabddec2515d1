use std::collections::BTreeSet;

use thiserror::Error;

use crate::apps::{AppId, AppSpec};
use crate::checkpoint::RollbackStrategy;
use crate::config::{AppConfig, ConfigFile, DeviceConfig, NotifyTrigger, SchemaError};
use crate::device::{DeviceSpec, Registry};
use crate::value::{DeviceId, Tick, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {message}")]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<SchemaError> for ValidationError {
    fn from(e: SchemaError) -> Self {
        match e {
            SchemaError::Invalid { path, message } => Self::new(path, message),
            other => Self::new("config", other.to_string()),
        }
    }
}

/// Fields to change in a device's configuration; `None` leaves a field as is.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeviceConfigUpdate {
    pub scheme: Option<String>,
    pub replicas: Option<Vec<DeviceId>>,
    pub rollback_strategy: Option<RollbackStrategy>,
    pub retry_max: Option<Tick>,
    pub restart_attempts: Option<u32>,
    pub notify_triggers: Option<BTreeSet<NotifyTrigger>>,
    pub fail_safe_state: Option<Option<Value>>,
}

impl DeviceConfigUpdate {
    fn apply(&self, dc: &mut DeviceConfig) {
        if let Some(s) = &self.scheme {
            dc.scheme = s.clone();
        }
        if let Some(r) = &self.replicas {
            dc.replicas = r.clone();
        }
        if let Some(r) = self.rollback_strategy {
            dc.rollback_strategy = r;
        }
        if let Some(r) = self.retry_max {
            dc.retry_max = r;
        }
        if let Some(r) = self.restart_attempts {
            dc.restart_attempts = r;
        }
        if let Some(t) = &self.notify_triggers {
            dc.notify_triggers = t.clone();
        }
        if let Some(f) = self.fail_safe_state {
            dc.fail_safe_state = f;
        }
    }
}

/// Registers a device and gives it a default configuration.
pub fn add_device(registry: &mut Registry, config: &mut ConfigFile, spec: DeviceSpec) -> Result<(), ValidationError> {
    let id = spec.id;
    let mut next_reg = registry.clone();
    next_reg
        .add_device(spec)
        .map_err(|e| ValidationError::new(format!("devices.{id}"), e.to_string()))?;
    let mut next_cfg = config.clone();
    let defaults = ConfigFile::init(&next_reg, &[]);
    next_cfg.devices.insert(id, defaults.devices[&id].clone());
    next_cfg.validate_against(&next_reg)?;
    *registry = next_reg;
    *config = next_cfg;
    Ok(())
}

/// Unregisters a device and drops it from every replica list.
pub fn remove_device(registry: &mut Registry, config: &mut ConfigFile, id: DeviceId) -> Result<(), ValidationError> {
    if registry.redirects().values().any(|t| *t == id) {
        return Err(ValidationError::new(
            format!("devices.{id}"),
            "device is serving as an active replica",
        ));
    }
    registry
        .remove_device(id)
        .map_err(|e| ValidationError::new(format!("devices.{id}"), e.to_string()))?;
    config.devices.remove(&id);
    for dc in config.devices.values_mut() {
        dc.replicas.retain(|r| *r != id);
    }
    Ok(())
}

/// Applies `update` to each listed device. Nothing changes unless the result
/// is valid for all of them.
pub fn update_device_config(
    registry: &Registry,
    config: &mut ConfigFile,
    ids: &[DeviceId],
    update: &DeviceConfigUpdate,
) -> Result<(), ValidationError> {
    let mut next = config.clone();
    for id in ids {
        if registry.spec(*id).is_none() {
            return Err(ValidationError::new(format!("devices.{id}"), "not a registered device"));
        }
        update.apply(next.devices.entry(*id).or_default());
    }
    next.validate_against(registry)?;
    *config = next;
    Ok(())
}

/// Turns app suppression on or off for the listed apps.
pub fn update_app_config(
    apps: &mut [AppSpec],
    config: &mut ConfigFile,
    ids: &[AppId],
    suppression_enabled: bool,
) -> Result<(), ValidationError> {
    if let Some(missing) = ids.iter().find(|id| !apps.iter().any(|a| a.id == **id)) {
        return Err(ValidationError::new(format!("apps.{}", missing.0), "unknown app"));
    }
    for app in apps.iter_mut().filter(|a| ids.contains(&a.id)) {
        app.suppression_enabled = suppression_enabled;
        config.apps.insert(app.id, AppConfig { suppression_enabled });
    }
    Ok(())
}
