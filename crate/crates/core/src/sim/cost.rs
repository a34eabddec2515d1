use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Timing and energy constants for the analytic models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostModel {
    /// Time for one hub CPU operation.
    pub cpu_op_ms: f64,
    /// Time to send a command to a device and get its answer.
    pub device_command_ms: f64,
    /// How long an actuator draws power for one state change.
    pub actuation_duration_ms: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            cpu_op_ms: 0.001,
            device_command_ms: 6.0,
            actuation_duration_ms: 1_000.0,
        }
    }
}

impl CostModel {
    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        serde_json::from_str(&fs::read_to_string(path)?).map_err(std::io::Error::other)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::write(path, serde_json::to_string_pretty(self).map_err(std::io::Error::other)?)
    }
}

/// Millijoules drawn at `power_mw` for `ms` milliseconds.
pub fn millijoules(power_mw: f64, ms: f64) -> f64 {
    power_mw * ms / 1_000.0
}
