//! Scalar building blocks shared by every module: device ids, poll ticks,
//! state values and value domains.

use std::fmt;

use serde::{Deserialize, Serialize};

/// One poll cycle. The simulation advances one tick per simulated second.
pub type Tick = u64;

/// Seconds in a simulated day, used to derive time-of-day from a tick.
pub const SECONDS_PER_DAY: Tick = 86_400;

/// Identifier of a registered device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub u32);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for DeviceId {
    fn from(v: u32) -> Self {
        DeviceId(v)
    }
}

/// A device state value.
///
/// Binary devices use `0.0`/`1.0`, integer devices whole numbers and real
/// devices any finite number inside their domain.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Value(pub f64);

impl Value {
    pub const OFF: Value = Value(0.0);
    pub const ON: Value = Value(1.0);

    pub fn is_on(self) -> bool {
        self.0 >= 0.5
    }

    pub fn as_f64(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.fract() == 0.0 {
            write!(f, "{}", self.0 as i64)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        if v {
            Value::ON
        } else {
            Value::OFF
        }
    }
}

/// The set of values a device can report or be actuated to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueDomain {
    Binary,
    Integer { min: i64, max: i64 },
    Real { min: f64, max: f64, unit: String },
}

impl ValueDomain {
    pub fn contains(&self, v: Value) -> bool {
        match self {
            ValueDomain::Binary => v.0 == 0.0 || v.0 == 1.0,
            ValueDomain::Integer { min, max } => {
                v.0.fract() == 0.0 && v.0 >= *min as f64 && v.0 <= *max as f64
            }
            ValueDomain::Real { min, max, .. } => v.0.is_finite() && v.0 >= *min && v.0 <= *max,
        }
    }

    /// Maps an arbitrary number onto the nearest member of the domain.
    pub fn clamp(&self, v: f64) -> Value {
        let v = if v.is_finite() { v } else { 0.0 };
        match self {
            ValueDomain::Binary => Value(if v >= 0.5 { 1.0 } else { 0.0 }),
            ValueDomain::Integer { min, max } => Value(v.round().clamp(*min as f64, *max as f64)),
            ValueDomain::Real { min, max, .. } => Value(v.clamp(*min, *max)),
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, ValueDomain::Binary)
    }

    pub fn is_numeric(&self) -> bool {
        !self.is_binary()
    }

    pub fn temperature() -> Self {
        ValueDomain::Real {
            min: 0.0,
            max: 120.0,
            unit: "F".to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_clamp_rounds() {
        let d = ValueDomain::Binary;
        assert_eq!(d.clamp(0.7), Value::ON);
        assert_eq!(d.clamp(-3.0), Value::OFF);
        assert!(d.contains(Value::ON));
        assert!(!d.contains(Value(0.5)));
    }

    #[test]
    fn real_clamp_bounds() {
        let d = ValueDomain::temperature();
        assert_eq!(d.clamp(130.0), Value(120.0));
        assert_eq!(d.clamp(-1.0), Value(0.0));
        assert_eq!(d.clamp(f64::NAN), Value(0.0));
        assert!(d.contains(Value(72.5)));
    }

    #[test]
    fn integer_clamp() {
        let d = ValueDomain::Integer { min: 0, max: 3 };
        assert_eq!(d.clamp(2.4), Value(2.0));
        assert_eq!(d.clamp(9.0), Value(3.0));
        assert!(!d.contains(Value(1.5)));
    }
}
