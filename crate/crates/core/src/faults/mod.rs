//! Fault model: fault kinds, scheduled faults, the active fault table, the
//! reading transforms applied while a fault is active, and the pluggable
//! fault-identification interface.

mod generate;
mod identify;
mod schedule;
mod transform;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::value::{DeviceId, Tick, Value};

pub use generate::{generate_schedule, FaultProfile, ScheduleParams};
pub use identify::{oracle_identify, FaultIdentifier, FaultReport, OracleConfig, PerfectOracle};
pub use schedule::{
    parse_fault_schedule, parse_fault_schedule_str, render_fault_schedule, write_fault_schedule,
    ScheduleError,
};
pub use transform::{transform_reading, Reading, TransformParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FaultKind {
    Power,
    Communication,
    CriticalError,
    Outlier,
    StuckAt,
    HighVariance,
    Spike,
}

impl FaultKind {
    pub const ALL: [FaultKind; 7] = [
        FaultKind::Power,
        FaultKind::Communication,
        FaultKind::CriticalError,
        FaultKind::Outlier,
        FaultKind::StuckAt,
        FaultKind::HighVariance,
        FaultKind::Spike,
    ];

    /// Fail-stop faults leave the device unresponsive.
    pub fn is_fail_stop(self) -> bool {
        matches!(
            self,
            FaultKind::Power | FaultKind::Communication | FaultKind::CriticalError
        )
    }

    /// A device with this fault still receives restart commands.
    ///
    /// Power and communication faults cut the device off entirely; a critical
    /// error halts the firmware but leaves the restart line reachable.
    pub fn acknowledges_restart(self) -> bool {
        !matches!(self, FaultKind::Power | FaultKind::Communication)
    }

    pub fn token(self) -> &'static str {
        match self {
            FaultKind::Power => "POWER",
            FaultKind::Communication => "COMMUNICATION",
            FaultKind::CriticalError => "CRITICAL_ERROR",
            FaultKind::Outlier => "OUTLIER",
            FaultKind::StuckAt => "STUCK_AT",
            FaultKind::HighVariance => "HIGH_VARIANCE",
            FaultKind::Spike => "SPIKE",
        }
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for FaultKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FaultKind::ALL
            .into_iter()
            .find(|k| k.token().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown fault kind `{s}`"))
    }
}

/// Which repair, if any, clears a fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Fixability {
    SoftFixable,
    HardFixable,
    Unfixable,
}

impl Fixability {
    pub fn token(self) -> &'static str {
        match self {
            Fixability::SoftFixable => "SOFT_FIXABLE",
            Fixability::HardFixable => "HARD_FIXABLE",
            Fixability::Unfixable => "UNFIXABLE",
        }
    }
}

impl FromStr for Fixability {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SOFT_FIXABLE" | "SOFT" => Ok(Fixability::SoftFixable),
            "HARD_FIXABLE" | "HARD" => Ok(Fixability::HardFixable),
            "UNFIXABLE" => Ok(Fixability::Unfixable),
            other => Err(format!("unknown fixability `{other}`")),
        }
    }
}

/// A scheduled fault.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub start_tick: Tick,
    pub device: DeviceId,
    pub kind: FaultKind,
    pub fixability: Fixability,
    /// Stuck value, outlier value, or amplitude for variance/spike faults.
    pub param: Value,
    /// Tick at which the fault is removed; `None` for permanent faults.
    pub end_tick: Option<Tick>,
}

impl FaultSpec {
    pub fn is_active_at(&self, tick: Tick) -> bool {
        tick >= self.start_tick && self.end_tick.is_none_or(|e| tick < e)
    }
}

/// A fault currently affecting a device.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveFault {
    /// Position of the originating entry in the schedule, or `usize::MAX`
    /// for faults injected directly.
    pub index: usize,
    pub spec: FaultSpec,
}

impl ActiveFault {
    pub fn offset(&self, tick: Tick) -> Tick {
        tick.saturating_sub(self.spec.start_tick)
    }
}

/// The set of active faults, at most one per device.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaultTable {
    active: BTreeMap<DeviceId, ActiveFault>,
}

/// What changed in the fault table at one tick boundary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaultChanges {
    pub activated: Vec<DeviceId>,
    pub removed: Vec<DeviceId>,
}

impl FaultTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, device: DeviceId) -> Option<&ActiveFault> {
        self.active.get(&device)
    }

    pub fn contains(&self, device: DeviceId) -> bool {
        self.active.contains_key(&device)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DeviceId, &ActiveFault)> {
        self.active.iter()
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Activates a fault outside of any schedule.
    pub fn inject(&mut self, spec: FaultSpec) {
        self.active.insert(
            spec.device,
            ActiveFault {
                index: usize::MAX,
                spec,
            },
        );
    }

    /// Removes whatever fault is active on `device`.
    pub fn clear(&mut self, device: DeviceId) -> Option<ActiveFault> {
        self.active.remove(&device)
    }
}

/// Applies the schedule at a tick boundary.
///
/// Removals run before activations so that a fault ending and another
/// starting on the same device at the same tick leaves the new one active.
/// A removal only affects the fault that the same schedule entry activated,
/// so a fault already cleared by repair or replaced by a later one is left
/// alone.
pub fn apply_faults(schedule: &[FaultSpec], tick: Tick, table: &mut FaultTable) -> FaultChanges {
    let mut changes = FaultChanges::default();
    for (index, spec) in schedule.iter().enumerate() {
        if spec.end_tick == Some(tick)
            && table.active.get(&spec.device).is_some_and(|a| a.index == index)
        {
            table.active.remove(&spec.device);
            changes.removed.push(spec.device);
        }
    }
    for (index, spec) in schedule.iter().enumerate() {
        if spec.start_tick == tick && spec.end_tick != Some(tick) {
            table.active.insert(
                spec.device,
                ActiveFault {
                    index,
                    spec: spec.clone(),
                },
            );
            changes.activated.push(spec.device);
        }
    }
    changes
}
