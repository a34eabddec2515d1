use std::collections::BTreeMap;

use thiserror::Error;

use super::cost::{millijoules, CostModel};
use super::hub::{RunMode, StateHistory};
use crate::device::{DeviceCounters, Registry};
use crate::value::DeviceId;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub mode: String,
    pub scheme: Option<String>,
    pub incorrect_states: u64,
    pub handler_caused_incorrect: u64,
    /// Changes observed on any device, dispatched or not.
    pub events: u64,
    pub events_dispatched: u64,
    /// Changes on suppressed devices that never reached the hub.
    pub events_suppressed: u64,
    pub events_by_device: BTreeMap<DeviceId, u64>,
    /// App deliveries withheld by app suppression.
    pub withheld_app_events: u64,
    pub actuations: u64,
    pub restarts: u64,
    pub commands_dropped: u64,
    pub commands_failed: u64,
    pub cascades_truncated: u64,
    pub rollbacks: u64,
    pub rollbacks_succeeded: u64,
    pub rollback_actuations: u64,
    pub checkpoints: u64,
    pub energy_mj: f64,
}

impl RunMetrics {
    pub fn new(mode: &RunMode) -> Self {
        Self {
            mode: mode.label().to_string(),
            scheme: mode.scheme().map(str::to_string),
            ..Self::default()
        }
    }

    pub fn count_event(&mut self, device: DeviceId, dispatched: bool) {
        self.events += 1;
        if dispatched {
            self.events_dispatched += 1;
            *self.events_by_device.entry(device).or_default() += 1;
        } else {
            self.events_suppressed += 1;
        }
    }

    /// Mean actuations per successful rollback.
    pub fn mean_rollback_actuations(&self) -> Option<f64> {
        (self.rollbacks_succeeded > 0).then(|| self.rollback_actuations as f64 / self.rollbacks_succeeded as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("histories differ in shape: {0}")]
pub struct ShapeMismatch(pub String);

fn check_shape(a: &StateHistory, b: &StateHistory) -> Result<(), ShapeMismatch> {
    if a.devices != b.devices {
        return Err(ShapeMismatch("device sets differ".into()));
    }
    if a.ticks() != b.ticks() {
        return Err(ShapeMismatch(format!("{} ticks vs {}", a.ticks(), b.ticks())));
    }
    Ok(())
}

/// Incorrect (device, tick) pairs of `run` against `baseline`, per device.
pub fn incorrect_by_device(
    run: &StateHistory,
    baseline: &StateHistory,
) -> Result<BTreeMap<DeviceId, u64>, ShapeMismatch> {
    check_shape(run, baseline)?;
    let mut out: BTreeMap<DeviceId, u64> = run.devices.iter().map(|d| (*d, 0)).collect();
    for (r, b) in run.rows.iter().zip(&baseline.rows) {
        for ((d, x), y) in run.devices.iter().zip(r).zip(b) {
            if x != y {
                *out.get_mut(d).expect("listed") += 1;
            }
        }
    }
    Ok(out)
}

/// Number of (device, tick) pairs where `run` differs from `baseline`. An
/// unresponsive device is wrong unless it is unresponsive in the baseline too.
pub fn count_incorrect_states(run: &StateHistory, baseline: &StateHistory) -> Result<u64, ShapeMismatch> {
    Ok(incorrect_by_device(run, baseline)?.values().sum())
}

/// Pairs wrong under the handler but right without it.
pub fn count_handler_caused(
    handled: &StateHistory,
    unhandled: &StateHistory,
    baseline: &StateHistory,
) -> Result<u64, ShapeMismatch> {
    check_shape(handled, baseline)?;
    check_shape(unhandled, baseline)?;
    let mut n = 0;
    for ((h, u), b) in handled.rows.iter().zip(&unhandled.rows).zip(&baseline.rows) {
        n += h
            .iter()
            .zip(u)
            .zip(b)
            .filter(|((h, u), b)| h != b && u == b)
            .count() as u64;
    }
    Ok(n)
}

/// Activity counts behind an energy estimate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyInputs {
    pub events: BTreeMap<DeviceId, u64>,
    pub actuations: BTreeMap<DeviceId, u64>,
    pub soft_restarts: BTreeMap<DeviceId, u64>,
    pub hard_restarts: BTreeMap<DeviceId, u64>,
}

impl EnergyInputs {
    pub fn from_run(metrics: &RunMetrics, counters: &DeviceCounters) -> Self {
        Self {
            events: metrics.events_by_device.clone(),
            actuations: counters.actuations.clone(),
            soft_restarts: counters.soft_restarts.clone(),
            hard_restarts: counters.hard_restarts.clone(),
        }
    }
}

/// Modeled energy in millijoules: each event costs one read of its device,
/// each actuation runs the actuator for the model's actuation duration and
/// each restart powers the device through its restart.
pub fn compute_energy(inputs: &EnergyInputs, registry: &Registry, cost: &CostModel) -> f64 {
    let mut total = 0.0;
    for (id, n) in &inputs.events {
        if let Some(s) = registry.spec(*id) {
            total += *n as f64 * millijoules(s.power_mw, s.read_latency_ms);
        }
    }
    for (id, n) in &inputs.actuations {
        if let Some(s) = registry.spec(*id) {
            total += *n as f64 * millijoules(s.power_mw, cost.actuation_duration_ms);
        }
    }
    for (map, hard) in [(&inputs.soft_restarts, false), (&inputs.hard_restarts, true)] {
        for (id, n) in map {
            if let Some(s) = registry.spec(*id) {
                let ms = if hard { s.hard_restart_ms } else { s.soft_restart_ms };
                total += *n as f64 * millijoules(s.power_mw, ms);
            }
        }
    }
    total
}
