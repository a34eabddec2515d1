//! Devices, their static descriptions, and the registry every poll and
//! actuation flows through.

mod catalog;
mod registry;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::faults::FaultKind;
use crate::value::{DeviceId, Tick, Value, ValueDomain};

pub use catalog::{default_catalog, default_home, home, load_catalog, save_catalog, CatalogError};
pub use registry::{ActuationResult, DeviceCounters, Registry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DeviceKind {
    Sensor,
    Actuator,
}

/// Hardware class of a device. Sets the default power draw and read time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TypeClass {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    A1,
    A2,
}

impl TypeClass {
    pub const ALL: [TypeClass; 8] = [
        TypeClass::S1,
        TypeClass::S2,
        TypeClass::S3,
        TypeClass::S4,
        TypeClass::S5,
        TypeClass::S6,
        TypeClass::A1,
        TypeClass::A2,
    ];

    pub fn kind(self) -> DeviceKind {
        match self {
            TypeClass::A1 | TypeClass::A2 => DeviceKind::Actuator,
            _ => DeviceKind::Sensor,
        }
    }

    /// Power draw in milliwatts.
    pub fn power_mw(self) -> f64 {
        match self {
            TypeClass::S1 => 66.0,
            TypeClass::S2 => 0.1,
            TypeClass::S3 => 19.5,
            TypeClass::S4 => 1.3,
            TypeClass::S5 => 30.0,
            TypeClass::S6 => 80.0,
            TypeClass::A1 => 0.01,
            TypeClass::A2 => 100.0,
        }
    }

    /// Time to read one state, in milliseconds.
    pub fn read_latency_ms(self) -> f64 {
        match self {
            TypeClass::S3 => 37.5,
            TypeClass::S4 => 0.5,
            TypeClass::S5 => 0.96,
            _ => 0.1,
        }
    }
}

/// Static description of a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub id: DeviceId,
    pub name: String,
    pub kind: DeviceKind,
    pub type_class: TypeClass,
    pub value_domain: ValueDomain,
    pub power_mw: f64,
    pub read_latency_ms: f64,
    pub supports_soft_restart: bool,
    pub supports_hard_restart: bool,
    pub soft_restart_ms: f64,
    pub hard_restart_ms: f64,
    pub max_restart_attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail_safe_state: Option<Value>,
    /// State before the first poll.
    #[serde(default = "default_initial")]
    pub initial: Value,
    /// Notification sinks and other devices with no hardware behind them.
    /// They draw no power, never fault, and stay out of snapshots.
    #[serde(default, rename = "virtual")]
    pub is_virtual: bool,
}

fn default_initial() -> Value {
    Value::OFF
}

impl DeviceSpec {
    /// A device of `class` with the class defaults filled in.
    pub fn new(id: u32, name: &str, class: TypeClass, value_domain: ValueDomain) -> Self {
        Self {
            id: DeviceId(id),
            name: name.to_string(),
            kind: class.kind(),
            type_class: class,
            value_domain,
            power_mw: class.power_mw(),
            read_latency_ms: class.read_latency_ms(),
            supports_soft_restart: true,
            supports_hard_restart: true,
            soft_restart_ms: 3_000.0,
            hard_restart_ms: 15_000.0,
            max_restart_attempts: 3,
            fail_safe_state: None,
            initial: Value::OFF,
            is_virtual: false,
        }
    }

    /// A binary notification sink.
    pub fn sink(id: u32, name: &str) -> Self {
        Self {
            power_mw: 0.0,
            supports_soft_restart: false,
            supports_hard_restart: false,
            is_virtual: true,
            ..Self::new(id, name, TypeClass::A1, ValueDomain::Binary)
        }
    }

    pub fn with_fail_safe(mut self, v: Value) -> Self {
        self.fail_safe_state = Some(v);
        self
    }

    pub fn with_initial(mut self, v: Value) -> Self {
        self.initial = v;
        self
    }

    pub fn is_sensor(&self) -> bool {
        self.kind == DeviceKind::Sensor
    }

    pub fn is_actuator(&self) -> bool {
        self.kind == DeviceKind::Actuator
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let bad = |field: &str, reason: &str| {
            Err(DeviceError::Invalid {
                device: self.id,
                field: field.to_string(),
                reason: reason.to_string(),
            })
        };
        if !(self.power_mw >= 0.0) {
            return bad("power_mw", "must be non-negative");
        }
        if !(self.read_latency_ms >= 0.0) {
            return bad("read_latency_ms", "must be non-negative");
        }
        if !(self.soft_restart_ms >= 0.0) || !(self.hard_restart_ms >= 0.0) {
            return bad("restart_ms", "must be non-negative");
        }
        if self.max_restart_attempts < 1 {
            return bad("max_restart_attempts", "must be at least 1");
        }
        if self.kind != self.type_class.kind() {
            return bad("kind", "does not match type_class");
        }
        if let Some(v) = self.fail_safe_state {
            if self.kind != DeviceKind::Actuator {
                return bad("fail_safe_state", "only actuators have a fail-safe state");
            }
            if !self.value_domain.contains(v) {
                return bad("fail_safe_state", "outside value_domain");
            }
        }
        if !self.value_domain.contains(self.initial) {
            return bad("initial", "outside value_domain");
        }
        Ok(())
    }

    /// Ticks a restart of this device takes to complete.
    pub fn restart_ticks(&self, hard: bool) -> Tick {
        let ms = if hard {
            self.hard_restart_ms
        } else {
            self.soft_restart_ms
        };
        ((ms / 1000.0).ceil() as Tick).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Health {
    Ok,
    Faulty(FaultKind),
    Unresponsive,
    /// The device is suppressed; the value is the last one seen before.
    Suppressed,
}

/// One observation of a device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceState {
    pub device: DeviceId,
    pub value: Value,
    pub tick: Tick,
    pub health: Health,
}

/// Live values of every physical device, split by kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemSnapshot {
    pub sensor_states: BTreeMap<DeviceId, Value>,
    pub actuator_states: BTreeMap<DeviceId, Value>,
    pub tick: Tick,
}

impl SystemSnapshot {
    pub fn get(&self, id: DeviceId) -> Option<Value> {
        self.sensor_states
            .get(&id)
            .or_else(|| self.actuator_states.get(&id))
            .copied()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviceError {
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error("device {0} is not an actuator")]
    NotActuator(DeviceId),
    #[error("device {0} is suppressed")]
    SuppressedDevice(DeviceId),
    #[error("device {0} is unresponsive")]
    Unresponsive(DeviceId),
    #[error("value {value} outside the domain of device {device}")]
    OutOfDomain { device: DeviceId, value: Value },
    #[error("device {0} already registered")]
    Duplicate(DeviceId),
    #[error("device {device}: {field} {reason}")]
    Invalid {
        device: DeviceId,
        field: String,
        reason: String,
    },
    #[error("redirect {from} -> {to} would chain")]
    RedirectChain { from: DeviceId, to: DeviceId },
}
