use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{DeviceError, DeviceSpec, Registry, TypeClass};
use crate::value::{Value, ValueDomain};

/// Ids of the default home's devices.
pub mod home {
    use crate::value::DeviceId;

    pub const MOTION: DeviceId = DeviceId(1);
    pub const CONTACT: DeviceId = DeviceId(2);
    pub const TEMPERATURE: DeviceId = DeviceId(3);
    /// 1 = user home.
    pub const PRESENCE: DeviceId = DeviceId(4);
    pub const SMOKE: DeviceId = DeviceId(5);
    pub const LEAK: DeviceId = DeviceId(6);
    pub const SMOKE_REPLICA: DeviceId = DeviceId(7);
    /// 1 = locked.
    pub const DOOR_LOCK: DeviceId = DeviceId(8);
    pub const COFFEE: DeviceId = DeviceId(9);
    pub const LIGHT_LIVING: DeviceId = DeviceId(10);
    pub const LIGHT_HALL: DeviceId = DeviceId(11);
    pub const ALARM: DeviceId = DeviceId(12);
    pub const AC: DeviceId = DeviceId(13);
    pub const HEATER: DeviceId = DeviceId(14);
    /// 1 = open.
    pub const WINDOW_LIVING: DeviceId = DeviceId(15);
    pub const WINDOW_BEDROOM: DeviceId = DeviceId(16);
    /// 1 = open.
    pub const WATER_VALVE: DeviceId = DeviceId(17);
    pub const PATIO_SMS: DeviceId = DeviceId(18);
    pub const INTRUDER_SMS: DeviceId = DeviceId(19);

    pub const SENSORS: [DeviceId; 7] = [MOTION, CONTACT, TEMPERATURE, PRESENCE, SMOKE, LEAK, SMOKE_REPLICA];
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing catalog: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

/// Seven sensors, ten actuators and two notification sinks.
pub fn default_catalog() -> Vec<DeviceSpec> {
    use TypeClass::*;
    let b = || ValueDomain::Binary;
    vec![
        DeviceSpec::new(1, "motion", S1, b()),
        DeviceSpec::new(2, "contact", S2, b()),
        DeviceSpec::new(3, "temperature", S3, ValueDomain::temperature()).with_initial(Value(72.0)),
        DeviceSpec::new(4, "presence", S4, b()),
        DeviceSpec::new(5, "smoke", S5, b()),
        DeviceSpec::new(6, "leak", S6, b()),
        DeviceSpec::new(7, "smoke_replica", S5, b()),
        DeviceSpec::new(8, "door_lock", A1, b())
            .with_fail_safe(Value::ON)
            .with_initial(Value::ON),
        DeviceSpec::new(9, "coffee", A1, b()),
        DeviceSpec::new(10, "light_living", A1, b()),
        DeviceSpec::new(11, "light_hall", A1, b()),
        DeviceSpec::new(12, "alarm", A2, b()),
        DeviceSpec::new(13, "ac", A2, b()),
        DeviceSpec::new(14, "heater", A2, b()).with_fail_safe(Value::OFF),
        DeviceSpec::new(15, "window_living", A2, b()).with_fail_safe(Value::OFF),
        DeviceSpec::new(16, "window_bedroom", A2, b()).with_fail_safe(Value::OFF),
        DeviceSpec::new(17, "water_valve", A2, b())
            .with_fail_safe(Value::OFF)
            .with_initial(Value::ON),
        DeviceSpec::sink(18, "patio_sms"),
        DeviceSpec::sink(19, "intruder_sms"),
    ]
}

pub fn default_home() -> Registry {
    Registry::with_devices(default_catalog()).expect("default catalog is valid")
}

/// Reads a JSON array of device specs.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<Vec<DeviceSpec>, CatalogError> {
    let specs: Vec<DeviceSpec> = serde_json::from_str(&fs::read_to_string(path)?)?;
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

pub fn save_catalog(path: impl AsRef<Path>, specs: &[DeviceSpec]) -> Result<(), CatalogError> {
    fs::write(path, serde_json::to_string_pretty(specs)?)?;
    Ok(())
}
