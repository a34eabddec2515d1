use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{Checkpoint, CheckpointLog, RollbackStrategy};
use crate::device::{Registry, SystemSnapshot};
use crate::handling::{transaction, TransactionError};
use crate::value::{DeviceId, Tick, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RollbackError {
    #[error("rollback disabled for this device")]
    Disabled,
    #[error("no checkpoint matches the current state")]
    NoMatch,
    #[error("actuator {0} must change but is faulty")]
    FaultyActuatorBlocks(DeviceId),
    #[error(transparent)]
    Transaction(#[from] TransactionError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollbackOutcome {
    /// Index of the chosen entry in the log.
    pub selected: usize,
    pub actuated: Vec<(DeviceId, Value)>,
    /// Faulty sensors whose values were overwritten with the checkpoint's.
    pub overridden: Vec<(DeviceId, Value)>,
}

/// Higher frequency wins, then the more recent entry, then the earlier index.
fn best_by_frequency<'a>(candidates: impl Iterator<Item = (usize, &'a Checkpoint)>) -> Option<usize> {
    candidates
        .max_by(|(ia, a), (ib, b)| {
            (a.frequency, a.last_tick)
                .cmp(&(b.frequency, b.last_tick))
                .then(ib.cmp(ia))
        })
        .map(|(i, _)| i)
}

fn is_fail_safe(entry: &Checkpoint, fail_safe: &BTreeMap<DeviceId, Value>) -> bool {
    fail_safe
        .iter()
        .all(|(id, v)| entry.actuator_states.get(id) == Some(v))
}

/// Picks the rollback target, or `None` when nothing qualifies.
///
/// `faulty` sensors are left out of matching. `fail_safe` maps actuators to
/// their fail-safe states.
pub fn select_checkpoint(
    log: &CheckpointLog,
    strategy: RollbackStrategy,
    current: &SystemSnapshot,
    faulty: &BTreeSet<DeviceId>,
    fail_safe: &BTreeMap<DeviceId, Value>,
) -> Option<usize> {
    let entries = log.entries.iter().enumerate();
    let matching = |e: &Checkpoint| log.matcher.matches(&e.sensor_states, &current.sensor_states, faulty);
    match strategy {
        RollbackStrategy::Disabled => None,
        RollbackStrategy::MostRecent => entries
            .max_by(|(ia, a), (ib, b)| {
                (a.last_tick, a.frequency)
                    .cmp(&(b.last_tick, b.frequency))
                    .then(ib.cmp(ia))
            })
            .map(|(i, _)| i),
        RollbackStrategy::FailNorm => best_by_frequency(entries.filter(|(_, e)| matching(e))),
        RollbackStrategy::FailSafe => {
            let safe: Vec<(usize, &Checkpoint)> =
                entries.clone().filter(|(_, e)| is_fail_safe(e, fail_safe)).collect();
            if safe.is_empty() {
                return best_by_frequency(entries.filter(|(_, e)| matching(e)));
            }
            best_by_frequency(safe.iter().copied().filter(|(_, e)| matching(e)))
                .or_else(|| best_by_frequency(safe.into_iter()))
        }
    }
}

/// Rolls the environment back after a fault on `trigger`.
///
/// Every actuator that differs from the chosen checkpoint is driven to it
/// inside one transaction. If any of those actuators is faulty nothing is
/// actuated. On success each faulty sensor reports the checkpoint's value
/// until its fault clears or another rollback replaces it.
#[allow(clippy::too_many_arguments)]
pub fn rollback(
    trigger: DeviceId,
    log: &CheckpointLog,
    registry: &mut Registry,
    strategy: RollbackStrategy,
    faulty: &BTreeSet<DeviceId>,
    fail_safe: &BTreeMap<DeviceId, Value>,
    tick: Tick,
) -> Result<RollbackOutcome, RollbackError> {
    if strategy == RollbackStrategy::Disabled {
        return Err(RollbackError::Disabled);
    }
    let mut faulty = faulty.clone();
    faulty.insert(trigger);
    let current = registry.snapshot(tick);
    let selected =
        select_checkpoint(log, strategy, &current, &faulty, fail_safe).ok_or(RollbackError::NoMatch)?;
    let best = &log.entries[selected];

    let changes: Vec<(DeviceId, Value)> = best
        .actuator_states
        .iter()
        .filter(|(id, v)| current.actuator_states.get(id) != Some(v))
        .map(|(id, v)| (*id, *v))
        .collect();
    if let Some((id, _)) = changes.iter().find(|(id, _)| faulty.contains(id)) {
        return Err(RollbackError::FaultyActuatorBlocks(*id));
    }
    transaction(&changes, registry, tick)?;

    let mut overridden = Vec::new();
    for (id, v) in &best.sensor_states {
        if faulty.contains(id) && registry.is_faulty(*id) {
            registry.set_override(*id, *v);
            overridden.push((*id, *v));
        }
    }
    Ok(RollbackOutcome {
        selected,
        actuated: changes,
        overridden,
    })
}
