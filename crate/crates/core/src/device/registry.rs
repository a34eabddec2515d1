use std::collections::{BTreeMap, BTreeSet};

use super::{DeviceError, DeviceSpec, DeviceState, Health, SystemSnapshot};
use crate::faults::{transform_reading, FaultTable, Fixability, Reading, TransformParams};
use crate::value::{DeviceId, Tick, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActuationResult {
    Applied,
    /// Accepted, but a stuck-at fault keeps the device where it was.
    NoEffect,
}

/// Per-device activity counters used for energy accounting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeviceCounters {
    pub polls: BTreeMap<DeviceId, u64>,
    /// Actuations that changed the device's physical state.
    pub actuations: BTreeMap<DeviceId, u64>,
    /// Commands refused because the device was suppressed.
    pub rejected: BTreeMap<DeviceId, u64>,
    pub soft_restarts: BTreeMap<DeviceId, u64>,
    pub hard_restarts: BTreeMap<DeviceId, u64>,
}

impl DeviceCounters {
    fn bump(map: &mut BTreeMap<DeviceId, u64>, id: DeviceId) {
        *map.entry(id).or_default() += 1;
    }

    pub fn total_actuations(&self) -> u64 {
        self.actuations.values().sum()
    }

    pub fn total_restarts(&self) -> u64 {
        self.soft_restarts.values().sum::<u64>() + self.hard_restarts.values().sum::<u64>()
    }
}

/// Registered devices plus everything the hub knows about them at runtime.
///
/// `truth` holds the environment value for sensors and the commanded
/// (latched) value for actuators. What a poll observes is `truth` passed
/// through any active fault.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    devices: BTreeMap<DeviceId, DeviceSpec>,
    suppressed: BTreeSet<DeviceId>,
    redirects: BTreeMap<DeviceId, DeviceId>,
    live: BTreeMap<DeviceId, DeviceState>,
    truth: BTreeMap<DeviceId, Value>,
    overrides: BTreeMap<DeviceId, Value>,
    faults: FaultTable,
    transform: TransformParams,
    pub counters: DeviceCounters,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_devices(specs: impl IntoIterator<Item = DeviceSpec>) -> Result<Self, DeviceError> {
        let mut reg = Self::new();
        for s in specs {
            reg.add_device(s)?;
        }
        Ok(reg)
    }

    pub fn add_device(&mut self, spec: DeviceSpec) -> Result<(), DeviceError> {
        spec.validate()?;
        if self.devices.contains_key(&spec.id) {
            return Err(DeviceError::Duplicate(spec.id));
        }
        let id = spec.id;
        self.truth.insert(id, spec.initial);
        self.live.insert(
            id,
            DeviceState {
                device: id,
                value: spec.initial,
                tick: 0,
                health: Health::Ok,
            },
        );
        self.devices.insert(id, spec);
        Ok(())
    }

    pub fn remove_device(&mut self, id: DeviceId) -> Result<DeviceSpec, DeviceError> {
        let spec = self.devices.remove(&id).ok_or(DeviceError::UnknownDevice(id))?;
        self.suppressed.remove(&id);
        self.redirects.retain(|from, to| *from != id && *to != id);
        self.live.remove(&id);
        self.truth.remove(&id);
        self.overrides.remove(&id);
        self.faults.clear(id);
        Ok(spec)
    }

    pub fn spec(&self, id: DeviceId) -> Option<&DeviceSpec> {
        self.devices.get(&id)
    }

    fn known(&self, id: DeviceId) -> Result<&DeviceSpec, DeviceError> {
        self.devices.get(&id).ok_or(DeviceError::UnknownDevice(id))
    }

    pub fn specs(&self) -> impl Iterator<Item = &DeviceSpec> {
        self.devices.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = DeviceId> + '_ {
        self.devices.keys().copied()
    }

    pub fn sensor_ids(&self) -> impl Iterator<Item = DeviceId> + '_ {
        self.specs().filter(|s| s.is_sensor()).map(|s| s.id)
    }

    pub fn actuator_ids(&self) -> impl Iterator<Item = DeviceId> + '_ {
        self.specs().filter(|s| s.is_actuator()).map(|s| s.id)
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn transform_params(&self) -> &TransformParams {
        &self.transform
    }

    pub fn set_transform_params(&mut self, params: TransformParams) {
        self.transform = params;
    }

    pub fn faults(&self) -> &FaultTable {
        &self.faults
    }

    pub fn faults_mut(&mut self) -> &mut FaultTable {
        &mut self.faults
    }

    /// Sets the environment value of a sensor (or the latch of an actuator),
    /// clamped into its domain.
    pub fn set_truth(&mut self, id: DeviceId, v: Value) -> Result<(), DeviceError> {
        let v = self.known(id)?.value_domain.clamp(v.0);
        self.truth.insert(id, v);
        Ok(())
    }

    pub fn truth(&self, id: DeviceId) -> Option<Value> {
        self.truth.get(&id).copied()
    }

    pub fn is_suppressed(&self, id: DeviceId) -> bool {
        self.suppressed.contains(&id)
    }

    pub fn suppressed(&self) -> &BTreeSet<DeviceId> {
        &self.suppressed
    }

    pub fn suppress(&mut self, id: DeviceId) -> Result<(), DeviceError> {
        self.known(id)?;
        self.suppressed.insert(id);
        Ok(())
    }

    pub fn unsuppress(&mut self, id: DeviceId) -> Result<(), DeviceError> {
        self.known(id)?;
        self.suppressed.remove(&id);
        Ok(())
    }

    /// Sends polls and commands for `from` to `to`.
    pub fn redirect(&mut self, from: DeviceId, to: DeviceId) -> Result<(), DeviceError> {
        self.known(from)?;
        self.known(to)?;
        if from == to
            || self.redirects.contains_key(&to)
            || self.redirects.values().any(|t| *t == from)
        {
            return Err(DeviceError::RedirectChain { from, to });
        }
        self.redirects.insert(from, to);
        Ok(())
    }

    pub fn clear_redirect(&mut self, from: DeviceId) -> Option<DeviceId> {
        self.redirects.remove(&from)
    }

    pub fn redirect_of(&self, from: DeviceId) -> Option<DeviceId> {
        self.redirects.get(&from).copied()
    }

    pub fn redirects(&self) -> &BTreeMap<DeviceId, DeviceId> {
        &self.redirects
    }

    /// Data rollback: a faulty sensor reports `v` until its fault clears or
    /// the override is replaced.
    pub fn set_override(&mut self, id: DeviceId, v: Value) {
        self.overrides.insert(id, v);
        if let Some(live) = self.live.get_mut(&id) {
            live.value = v;
        }
    }

    pub fn clear_override(&mut self, id: DeviceId) -> Option<Value> {
        self.overrides.remove(&id)
    }

    pub fn override_of(&self, id: DeviceId) -> Option<Value> {
        self.overrides.get(&id).copied()
    }

    pub fn is_faulty(&self, id: DeviceId) -> bool {
        self.faults.contains(id)
    }

    /// What the device itself would answer, ignoring suppression and
    /// redirects. `None` means it did not answer.
    fn observe(&self, id: DeviceId, tick: Tick) -> (Option<Value>, Health) {
        let spec = &self.devices[&id];
        let truth = self.truth[&id];
        match self.faults.get(id) {
            Some(fault) if !spec.is_virtual => {
                match transform_reading(truth, fault, tick, &spec.value_domain, &self.transform) {
                    Reading::Unresponsive => (None, Health::Unresponsive),
                    Reading::Value(v) => (
                        Some(self.overrides.get(&id).copied().unwrap_or(v)),
                        Health::Faulty(fault.spec.kind),
                    ),
                }
            }
            _ => (Some(truth), Health::Ok),
        }
    }

    fn state_from(&self, id: DeviceId, source: DeviceId, tick: Tick) -> DeviceState {
        let (v, health) = self.observe(source, tick);
        DeviceState {
            device: id,
            value: v.unwrap_or(self.live[&source].value),
            tick,
            health,
        }
    }

    /// Polls a device.
    ///
    /// Suppressed devices are not polled and report their last value with
    /// [`Health::Suppressed`]. Unresponsive devices report their last known
    /// value. A redirected device reports its replica's state under its own id.
    pub fn read_device(&mut self, id: DeviceId, tick: Tick) -> Result<DeviceState, DeviceError> {
        self.known(id)?;
        if self.suppressed.contains(&id) {
            let last = self.live[&id];
            return Ok(DeviceState {
                tick,
                health: Health::Suppressed,
                ..last
            });
        }
        let source = self.redirect_of(id).unwrap_or(id);
        let state = self.state_from(id, source, tick);
        DeviceCounters::bump(&mut self.counters.polls, source);
        if state.health != Health::Unresponsive {
            self.live.insert(id, state);
        } else {
            self.live.get_mut(&id).expect("registered").health = Health::Unresponsive;
        }
        Ok(state)
    }

    /// Reads the device directly, bypassing suppression and redirects.
    /// Used by handling functions that watch a suppressed device.
    pub fn probe(&self, id: DeviceId, tick: Tick) -> Result<DeviceState, DeviceError> {
        self.known(id)?;
        Ok(self.state_from(id, id, tick))
    }

    pub fn live_state(&self, id: DeviceId) -> Option<&DeviceState> {
        self.live.get(&id)
    }

    pub fn live_value(&self, id: DeviceId) -> Option<Value> {
        self.live.get(&id).map(|s| s.value)
    }

    pub fn actuate(
        &mut self,
        id: DeviceId,
        value: Value,
        tick: Tick,
    ) -> Result<ActuationResult, DeviceError> {
        let spec = self.known(id)?;
        if !spec.is_actuator() {
            return Err(DeviceError::NotActuator(id));
        }
        if !spec.value_domain.contains(value) {
            return Err(DeviceError::OutOfDomain { device: id, value });
        }
        if self.suppressed.contains(&id) {
            DeviceCounters::bump(&mut self.counters.rejected, id);
            return Err(DeviceError::SuppressedDevice(id));
        }
        let target = self.redirect_of(id).unwrap_or(id);
        let before = self.observe(target, tick).0;
        if let Some(fault) = self.faults.get(target) {
            if fault.spec.kind.is_fail_stop() && !self.devices[&target].is_virtual {
                return Err(DeviceError::Unresponsive(id));
            }
        }
        self.truth.insert(target, value);
        let (after, health) = self.observe(target, tick);
        let after = after.expect("responsive");
        if before != Some(after) {
            DeviceCounters::bump(&mut self.counters.actuations, target);
        }
        let state = DeviceState {
            device: target,
            value: after,
            tick,
            health,
        };
        self.live.insert(target, state);
        if target != id {
            self.live.insert(id, DeviceState { device: id, ..state });
        }
        Ok(if health == Health::Ok {
            ActuationResult::Applied
        } else {
            ActuationResult::NoEffect
        })
    }

    /// Live values of all physical devices.
    pub fn snapshot(&self, tick: Tick) -> SystemSnapshot {
        let mut snap = SystemSnapshot {
            tick,
            ..SystemSnapshot::default()
        };
        for spec in self.specs().filter(|s| !s.is_virtual) {
            let v = self.live[&spec.id].value;
            if spec.is_sensor() {
                snap.sensor_states.insert(spec.id, v);
            } else {
                snap.actuator_states.insert(spec.id, v);
            }
        }
        snap
    }

    /// Sends one restart command; returns whether the device acknowledged.
    pub fn send_restart(&mut self, id: DeviceId, hard: bool) -> Result<bool, DeviceError> {
        self.known(id)?;
        let ack = self
            .faults
            .get(id)
            .is_none_or(|f| f.spec.kind.acknowledges_restart());
        if ack {
            let map = if hard {
                &mut self.counters.hard_restarts
            } else {
                &mut self.counters.soft_restarts
            };
            DeviceCounters::bump(map, id);
        }
        Ok(ack)
    }

    /// Finishes an acknowledged restart. Clears the active fault when the
    /// restart type matches its fixability and returns whether it did.
    pub fn complete_restart(&mut self, id: DeviceId, hard: bool) -> bool {
        let wanted = if hard {
            Fixability::HardFixable
        } else {
            Fixability::SoftFixable
        };
        match self.faults.get(id) {
            Some(f) if f.spec.fixability == wanted => {
                self.faults.clear(id);
                true
            }
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{default_home, home};
    use crate::faults::{FaultKind, FaultSpec};

    fn fault(device: DeviceId, kind: FaultKind, param: f64) -> FaultSpec {
        FaultSpec {
            start_tick: 0,
            device,
            kind,
            fixability: Fixability::Unfixable,
            param: Value(param),
            end_tick: None,
        }
    }

    #[test]
    fn healthy_read_passes_truth_through() {
        let mut reg = default_home();
        reg.set_truth(home::MOTION, Value::ON).unwrap();
        let s = reg.read_device(home::MOTION, 1).unwrap();
        assert_eq!(s.value, Value::ON);
        assert_eq!(s.health, Health::Ok);
    }

    #[test]
    fn stuck_presence_reads_home() {
        let mut reg = default_home();
        reg.set_truth(home::PRESENCE, Value::OFF).unwrap();
        reg.faults_mut().inject(fault(home::PRESENCE, FaultKind::StuckAt, 1.0));
        let s = reg.read_device(home::PRESENCE, 5).unwrap();
        assert_eq!(s.value, Value::ON);
        assert_eq!(s.health, Health::Faulty(FaultKind::StuckAt));
    }

    #[test]
    fn power_fault_returns_last_known() {
        let mut reg = default_home();
        reg.set_truth(home::SMOKE, Value::ON).unwrap();
        reg.read_device(home::SMOKE, 1).unwrap();
        reg.faults_mut().inject(fault(home::SMOKE, FaultKind::Power, 0.0));
        reg.set_truth(home::SMOKE, Value::OFF).unwrap();
        let s = reg.read_device(home::SMOKE, 2).unwrap();
        assert_eq!(s.health, Health::Unresponsive);
        assert_eq!(s.value, Value::ON);
    }

    #[test]
    fn actuation_paths() {
        let mut reg = default_home();
        assert_eq!(
            reg.actuate(home::LIGHT_LIVING, Value::ON, 1),
            Ok(ActuationResult::Applied)
        );
        assert_eq!(reg.live_value(home::LIGHT_LIVING), Some(Value::ON));

        reg.actuate(home::WINDOW_LIVING, Value::ON, 1).unwrap();
        reg.faults_mut().inject(fault(home::WINDOW_LIVING, FaultKind::StuckAt, 1.0));
        assert_eq!(
            reg.actuate(home::WINDOW_LIVING, Value::OFF, 2),
            Ok(ActuationResult::NoEffect)
        );
        assert_eq!(reg.live_value(home::WINDOW_LIVING), Some(Value::ON));

        reg.faults_mut().inject(fault(home::ALARM, FaultKind::Communication, 0.0));
        assert_eq!(
            reg.actuate(home::ALARM, Value::ON, 3),
            Err(DeviceError::Unresponsive(home::ALARM))
        );
        assert_eq!(
            reg.actuate(home::MOTION, Value::ON, 3),
            Err(DeviceError::NotActuator(home::MOTION))
        );
        assert_eq!(
            reg.actuate(DeviceId(99), Value::ON, 3),
            Err(DeviceError::UnknownDevice(DeviceId(99)))
        );
    }

    #[test]
    fn stuck_actuator_shows_latch_after_fault_clears() {
        let mut reg = default_home();
        reg.faults_mut().inject(fault(home::WINDOW_LIVING, FaultKind::StuckAt, 1.0));
        reg.actuate(home::WINDOW_LIVING, Value::OFF, 1).unwrap();
        reg.faults_mut().clear(home::WINDOW_LIVING);
        assert_eq!(reg.read_device(home::WINDOW_LIVING, 2).unwrap().value, Value::OFF);
    }

    #[test]
    fn suppressed_device_rejects_commands() {
        let mut reg = default_home();
        reg.suppress(home::HEATER).unwrap();
        assert_eq!(
            reg.actuate(home::HEATER, Value::ON, 1),
            Err(DeviceError::SuppressedDevice(home::HEATER))
        );
        assert_eq!(reg.read_device(home::HEATER, 1).unwrap().health, Health::Suppressed);
        assert_eq!(reg.counters.total_actuations(), 0);
    }

    #[test]
    fn redirect_reads_replica_and_never_chains() {
        let mut reg = default_home();
        reg.set_truth(home::SMOKE_REPLICA, Value::ON).unwrap();
        reg.redirect(home::SMOKE, home::SMOKE_REPLICA).unwrap();
        let s = reg.read_device(home::SMOKE, 1).unwrap();
        assert_eq!(s.device, home::SMOKE);
        assert_eq!(s.value, Value::ON);
        assert!(reg.redirect(home::SMOKE_REPLICA, home::MOTION).is_err());
        assert!(reg.redirect(home::MOTION, home::SMOKE).is_err());
    }

    #[test]
    fn empty_registry_snapshot() {
        let snap = Registry::new().snapshot(0);
        assert!(snap.sensor_states.is_empty() && snap.actuator_states.is_empty());
    }

    #[test]
    fn restart_ack_and_fixability() {
        let mut reg = default_home();
        reg.faults_mut().inject(fault(home::ALARM, FaultKind::Power, 0.0));
        assert_eq!(reg.send_restart(home::ALARM, false), Ok(false));
        let mut f = fault(home::HEATER, FaultKind::CriticalError, 0.0);
        f.fixability = Fixability::SoftFixable;
        reg.faults_mut().inject(f);
        assert_eq!(reg.send_restart(home::HEATER, true), Ok(true));
        assert!(!reg.complete_restart(home::HEATER, true));
        assert!(reg.complete_restart(home::HEATER, false));
        assert!(!reg.is_faulty(home::HEATER));
        assert_eq!(reg.counters.total_restarts(), 1);
    }
}
