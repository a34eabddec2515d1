//! History-based checkpoints and rollback.
//!
//! The log is keyed by sensor states. Each entry carries the actuator states
//! last seen with those sensor states, when that was, and how often the pair
//! has been seen. Rollback looks up the entry that best explains the current
//! healthy sensors and drives the actuators back to it.

mod rollback;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device::{Registry, SystemSnapshot};
use crate::faults::FaultIdentifier;
use crate::value::{DeviceId, Tick, Value};

pub use rollback::{rollback, select_checkpoint, RollbackError, RollbackOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RollbackStrategy {
    MostRecent,
    FailSafe,
    FailNorm,
    Disabled,
}

impl RollbackStrategy {
    pub const ACTIVE: [RollbackStrategy; 3] = [
        RollbackStrategy::MostRecent,
        RollbackStrategy::FailSafe,
        RollbackStrategy::FailNorm,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub sensor_states: BTreeMap<DeviceId, Value>,
    pub actuator_states: BTreeMap<DeviceId, Value>,
    pub last_tick: Tick,
    pub frequency: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendingCheckpoint {
    pub snapshot: SystemSnapshot,
    pub taken_tick: Tick,
}

/// How two sensor-state maps are compared.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorMatcher {
    /// Sensors compared with `tolerance`; all others must be equal.
    pub numeric: BTreeSet<DeviceId>,
    pub tolerance: f64,
}

impl SensorMatcher {
    pub fn for_registry(registry: &Registry, tolerance: f64) -> Self {
        Self {
            numeric: registry
                .specs()
                .filter(|s| s.is_sensor() && s.value_domain.is_numeric())
                .map(|s| s.id)
                .collect(),
            tolerance,
        }
    }

    fn value_matches(&self, id: DeviceId, a: Value, b: Value) -> bool {
        if self.numeric.contains(&id) {
            (a.0 - b.0).abs() <= self.tolerance
        } else {
            a == b
        }
    }

    /// True if every sensor outside `exclude` matches.
    pub fn matches(
        &self,
        a: &BTreeMap<DeviceId, Value>,
        b: &BTreeMap<DeviceId, Value>,
        exclude: &BTreeSet<DeviceId>,
    ) -> bool {
        let keys: BTreeSet<&DeviceId> = a.keys().chain(b.keys()).filter(|k| !exclude.contains(k)).collect();
        keys.into_iter().all(|k| match (a.get(k), b.get(k)) {
            (Some(x), Some(y)) => self.value_matches(*k, *x, *y),
            _ => false,
        })
    }

    fn distance(&self, a: &BTreeMap<DeviceId, Value>, b: &BTreeMap<DeviceId, Value>) -> f64 {
        self.numeric
            .iter()
            .filter_map(|k| Some((a.get(k)?.0 - b.get(k)?.0).abs()))
            .sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointLog {
    pub entries: Vec<Checkpoint>,
    #[serde(default)]
    pub pending: Vec<PendingCheckpoint>,
    #[serde(default)]
    pub matcher: SensorMatcher,
}

/// What a commit did to the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitEffect {
    Appended,
    Incremented,
    Overwritten,
}

impl CheckpointLog {
    pub fn new(matcher: SensorMatcher) -> Self {
        Self {
            matcher,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Index of the committed entry whose key matches `sensors`, preferring
    /// the closest one when the tolerance admits several.
    pub fn find(&self, sensors: &BTreeMap<DeviceId, Value>) -> Option<usize> {
        let none = BTreeSet::new();
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| self.matcher.matches(&e.sensor_states, sensors, &none))
            .min_by(|(_, a), (_, b)| {
                self.matcher
                    .distance(&a.sensor_states, sensors)
                    .total_cmp(&self.matcher.distance(&b.sensor_states, sensors))
            })
            .map(|(i, _)| i)
    }

    /// Records a validated snapshot in the history.
    pub fn commit(&mut self, snapshot: &SystemSnapshot, tick: Tick) -> CommitEffect {
        match self.find(&snapshot.sensor_states) {
            None => {
                self.entries.push(Checkpoint {
                    sensor_states: snapshot.sensor_states.clone(),
                    actuator_states: snapshot.actuator_states.clone(),
                    last_tick: tick,
                    frequency: 1,
                });
                CommitEffect::Appended
            }
            Some(i) => {
                let e = &mut self.entries[i];
                e.last_tick = tick;
                if e.actuator_states == snapshot.actuator_states {
                    e.frequency += 1;
                    CommitEffect::Incremented
                } else {
                    e.actuator_states = snapshot.actuator_states.clone();
                    e.frequency = 1;
                    CommitEffect::Overwritten
                }
            }
        }
    }

    /// Queues a snapshot. It commits once it has been certified fault-free.
    pub fn take_checkpoint(&mut self, snapshot: SystemSnapshot, tick: Tick) {
        self.pending.push(PendingCheckpoint {
            snapshot,
            taken_tick: tick,
        });
    }

    /// Commits pending snapshots whose validation window `[taken, taken +
    /// bound]` has passed with no fault anywhere; discards the others.
    /// Returns how many committed.
    pub fn commit_pending(&mut self, now: Tick, bound: Tick, identifier: &dyn FaultIdentifier) -> usize {
        let (ready, waiting): (Vec<_>, Vec<_>) = std::mem::take(&mut self.pending)
            .into_iter()
            .partition(|p| p.taken_tick + bound <= now);
        self.pending = waiting;
        let mut committed = 0;
        for p in ready {
            if identifier.fault_free(None, p.taken_tick, p.taken_tick + bound) {
                self.commit(&p.snapshot, p.taken_tick);
                committed += 1;
            }
        }
        committed
    }

    /// Removes entries unused for more than `ttl` ticks.
    pub fn evict_stale(&mut self, now: Tick, ttl: Tick) -> usize {
        let before = self.entries.len();
        self.entries.retain(|e| now.saturating_sub(e.last_tick) <= ttl);
        before - self.entries.len()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::write(path, serde_json::to_string_pretty(self).map_err(std::io::Error::other)?)
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        serde_json::from_str(&fs::read_to_string(path)?).map_err(std::io::Error::other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faults::{FaultTable, OracleConfig, PerfectOracle};

    const MOTION: DeviceId = DeviceId(1);
    const TEMP: DeviceId = DeviceId(2);
    const LIGHT: DeviceId = DeviceId(10);

    fn snap(motion: bool, light: bool) -> SystemSnapshot {
        SystemSnapshot {
            sensor_states: BTreeMap::from([(MOTION, Value::from(motion))]),
            actuator_states: BTreeMap::from([(LIGHT, Value::from(light))]),
            tick: 0,
        }
    }

    #[test]
    fn commit_rules() {
        let mut log = CheckpointLog::default();
        assert_eq!(log.commit(&snap(true, true), 1), CommitEffect::Appended);
        assert_eq!(log.commit(&snap(false, false), 2), CommitEffect::Appended);
        assert_eq!(log.commit(&snap(true, true), 3), CommitEffect::Incremented);
        assert_eq!(log.entries[0].frequency, 2);
        assert_eq!(log.commit(&snap(true, false), 4), CommitEffect::Overwritten);
        assert_eq!(log.entries[0].frequency, 1);
        assert_eq!(log.entries[0].last_tick, 4);
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn numeric_sensors_match_within_tolerance() {
        let m = SensorMatcher {
            numeric: BTreeSet::from([TEMP]),
            tolerance: 2.0,
        };
        let a = BTreeMap::from([(TEMP, Value(72.0)), (MOTION, Value::ON)]);
        let b = BTreeMap::from([(TEMP, Value(73.5)), (MOTION, Value::ON)]);
        let c = BTreeMap::from([(TEMP, Value(75.0)), (MOTION, Value::ON)]);
        let none = BTreeSet::new();
        assert!(m.matches(&a, &b, &none));
        assert!(!m.matches(&a, &c, &none));
        assert!(m.matches(&a, &c, &BTreeSet::from([TEMP])));
    }

    #[test]
    fn pending_discarded_when_fault_overlaps() {
        let mut oracle = PerfectOracle::new(OracleConfig::default());
        let mut table = FaultTable::new();
        oracle.observe(10, &table);
        table.inject(crate::faults::FaultSpec {
            start_tick: 11,
            device: MOTION,
            kind: crate::faults::FaultKind::StuckAt,
            fixability: crate::faults::Fixability::Unfixable,
            param: Value::ON,
            end_tick: None,
        });
        oracle.observe(11, &table);

        let mut log = CheckpointLog::default();
        log.take_checkpoint(snap(true, true), 5);
        log.take_checkpoint(snap(false, false), 10);
        assert_eq!(log.commit_pending(11, 1, &oracle), 1);
        assert!(log.pending.is_empty());
        assert_eq!(log.len(), 1);
        assert_eq!(log.entries[0].last_tick, 5);
    }

    #[test]
    fn eviction() {
        let mut log = CheckpointLog::default();
        for (i, t) in [100, 200, 300, 5000, 6000].into_iter().enumerate() {
            log.commit(
                &SystemSnapshot {
                    sensor_states: BTreeMap::from([(TEMP, Value(i as f64 * 10.0))]),
                    ..SystemSnapshot::default()
                },
                t,
            );
        }
        assert_eq!(log.evict_stale(5250, 5000), 2);
        assert_eq!(log.len(), 3);
        assert_eq!(log.evict_stale(5250, 5000), 0);
    }

    #[test]
    fn dump_restore() {
        let mut log = CheckpointLog::default();
        log.commit(&snap(true, true), 1);
        log.take_checkpoint(snap(false, true), 2);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.json");
        log.save(&p).unwrap();
        assert_eq!(CheckpointLog::load(&p).unwrap(), log);
    }
}
