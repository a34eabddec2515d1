//! Random fault schedules for the benchmark suites.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FaultKind, FaultSpec, Fixability};
use crate::device::{DeviceSpec, Registry};
use crate::value::{Tick, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultProfile {
    /// Every physical device faults the same number of times, one fault
    /// active at a time.
    Single,
    /// The single profile plus overlapping, mostly fail-stop faults.
    Multiple,
}

impl std::str::FromStr for FaultProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(FaultProfile::Single),
            "multiple" => Ok(FaultProfile::Multiple),
            _ => Err(format!("unknown profile `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleParams {
    pub seed: u64,
    pub ticks: Tick,
    /// No fault starts before this tick, so checkpoints can accumulate.
    pub start_after: Tick,
    pub faults_per_device: usize,
    pub transient_fraction: f64,
    pub transient_ticks: (Tick, Tick),
    pub long_ticks: (Tick, Tick),
    /// Overlapping faults added by the multiple profile.
    pub extra_faults: usize,
    /// Share of the extra faults that are fail-stop.
    pub extra_fail_stop_fraction: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            seed: 7,
            ticks: 50_000,
            start_after: 2_000,
            faults_per_device: 2,
            transient_fraction: 0.3,
            transient_ticks: (5, 20),
            long_ticks: (400, 2_400),
            extra_faults: 25,
            extra_fail_stop_fraction: 0.85,
        }
    }
}

/// Kinds dealt round-robin so each appears about equally often, then
/// shuffled. Binary sensors take a spike as high variance.
fn deal_kinds(specs: &[&DeviceSpec], rng: &mut ChaCha8Rng) -> Vec<FaultKind> {
    use FaultKind::*;
    let sensor_kinds = FaultKind::ALL;
    let actuator_kinds = [Power, Communication, CriticalError, StuckAt];
    let n_sensors = specs.iter().filter(|s| !s.is_actuator()).count();
    let mut sensor_deck: Vec<FaultKind> = sensor_kinds.iter().copied().cycle().take(n_sensors).collect();
    let mut actuator_deck: Vec<FaultKind> = actuator_kinds
        .iter()
        .copied()
        .cycle()
        .take(specs.len() - n_sensors)
        .collect();
    sensor_deck.shuffle(rng);
    actuator_deck.shuffle(rng);
    specs
        .iter()
        .map(|s| {
            if s.is_actuator() {
                actuator_deck.pop().expect("dealt")
            } else {
                match sensor_deck.pop().expect("dealt") {
                    Spike if !s.value_domain.is_numeric() => HighVariance,
                    k => k,
                }
            }
        })
        .collect()
}

fn pick_fixability(kind: FaultKind, rng: &mut ChaCha8Rng) -> Fixability {
    match kind {
        // Nothing reaches a device that has lost power or its link.
        FaultKind::Power | FaultKind::Communication => Fixability::Unfixable,
        _ if rng.random_bool(0.5) => Fixability::SoftFixable,
        _ => Fixability::HardFixable,
    }
}

fn pick_param(spec: &DeviceSpec, kind: FaultKind, rng: &mut ChaCha8Rng) -> Value {
    let numeric = spec.value_domain.is_numeric();
    match kind {
        FaultKind::StuckAt if numeric => {
            let v: f64 = rng.random_range(55.0..=95.0);
            spec.value_domain.clamp((v * 10.0).round() / 10.0)
        }
        FaultKind::Outlier if numeric => {
            spec.value_domain.clamp(if rng.random_bool(0.5) { 120.0 } else { 20.0 })
        }
        FaultKind::StuckAt => Value::from(rng.random_bool(0.5)),
        FaultKind::Outlier => Value::ON,
        _ => Value::OFF,
    }
}

fn make(spec: &DeviceSpec, kind: FaultKind, start: Tick, end: Tick, rng: &mut ChaCha8Rng) -> FaultSpec {
    let end = if kind == FaultKind::Outlier { start + 1 } else { end };
    FaultSpec {
        start_tick: start,
        device: spec.id,
        kind,
        fixability: pick_fixability(kind, rng),
        param: pick_param(spec, kind, rng),
        end_tick: Some(end),
    }
}

fn duration(params: &ScheduleParams, cap: Tick, rng: &mut ChaCha8Rng) -> Tick {
    let (lo, hi) = if rng.random_bool(params.transient_fraction) {
        params.transient_ticks
    } else {
        params.long_ticks
    };
    let hi = hi.min(cap).max(lo.min(cap));
    rng.random_range(lo.min(hi)..=hi).max(1)
}

/// Builds a schedule over the registry's physical devices. Deterministic in
/// `params.seed`. Faults on the same device never overlap.
pub fn generate_schedule(registry: &Registry, profile: FaultProfile, params: &ScheduleParams) -> Vec<FaultSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let devices: Vec<&DeviceSpec> = registry.specs().filter(|s| !s.is_virtual).collect();
    let mut slots: Vec<&DeviceSpec> = devices
        .iter()
        .flat_map(|d| std::iter::repeat_n(*d, params.faults_per_device))
        .collect();
    slots.shuffle(&mut rng);

    let mut schedule = Vec::new();
    if !slots.is_empty() && params.ticks > params.start_after {
        let slot_len = (params.ticks - params.start_after) / slots.len() as Tick;
        let kinds = deal_kinds(&slots, &mut rng);
        for (i, (spec, kind)) in slots.iter().zip(kinds).enumerate() {
            let slot_start = params.start_after + i as Tick * slot_len;
            let offset = rng.random_range(0..=slot_len / 10);
            let cap = slot_len.saturating_sub(offset + 1).max(1);
            let start = slot_start + offset;
            let end = start + duration(params, cap, &mut rng);
            schedule.push(make(spec, kind, start, end, &mut rng));
        }
    }

    if profile == FaultProfile::Multiple && !devices.is_empty() {
        let sensors: Vec<&DeviceSpec> = devices.iter().copied().filter(|d| d.is_sensor()).collect();
        let latest = params.ticks.saturating_sub(params.long_ticks.1 + 1).max(params.start_after + 1);
        let mut added = 0;
        let mut attempts = 0;
        while added < params.extra_faults && attempts < 10_000 {
            attempts += 1;
            let fail_stop = rng.random_bool(params.extra_fail_stop_fraction) || sensors.is_empty();
            let start = rng.random_range(params.start_after..latest);
            let (lo, hi) = params.long_ticks;
            let end = start + rng.random_range(lo..=hi);
            let free = |d: &DeviceSpec, schedule: &[FaultSpec]| {
                !schedule
                    .iter()
                    .any(|f| f.device == d.id && f.start_tick <= end && f.end_tick.is_none_or(|e| e >= start))
            };
            if fail_stop {
                // An outage: several devices lose power or their link together.
                let kind = if rng.random_bool(0.5) {
                    FaultKind::Power
                } else {
                    FaultKind::Communication
                };
                let size = rng.random_range(2..=4).min(params.extra_faults - added);
                let mut pool: Vec<&DeviceSpec> = devices.iter().copied().filter(|d| free(d, &schedule)).collect();
                pool.shuffle(&mut rng);
                for spec in pool.into_iter().take(size) {
                    schedule.push(make(spec, kind, start, end, &mut rng));
                    added += 1;
                }
            } else {
                let spec = sensors[rng.random_range(0..sensors.len())];
                if free(spec, &schedule) {
                    schedule.push(make(spec, FaultKind::HighVariance, start, end, &mut rng));
                    added += 1;
                }
            }
        }
    }

    schedule.sort_by_key(|f| f.start_tick);
    schedule
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::default_home;
    use crate::faults::{apply_faults, FaultTable};

    #[test]
    fn deterministic_per_seed() {
        let reg = default_home();
        let p = ScheduleParams::default();
        assert_eq!(
            generate_schedule(&reg, FaultProfile::Multiple, &p),
            generate_schedule(&reg, FaultProfile::Multiple, &p)
        );
    }

    #[test]
    fn single_profile_one_at_a_time_with_even_coverage() {
        let reg = default_home();
        let p = ScheduleParams::default();
        let s = generate_schedule(&reg, FaultProfile::Single, &p);
        assert_eq!(s.len(), 34);
        let mut table = FaultTable::new();
        for t in 0..p.ticks {
            apply_faults(&s, t, &mut table);
            assert!(table.len() <= 1, "overlap at {t}");
        }
        for id in reg.specs().filter(|d| !d.is_virtual).map(|d| d.id) {
            assert_eq!(s.iter().filter(|f| f.device == id).count(), 2);
        }
        assert!(s.iter().all(|f| f.start_tick >= p.start_after));
    }

    #[test]
    fn multiple_profile_overlaps_and_leans_fail_stop() {
        let reg = default_home();
        let p = ScheduleParams::default();
        let s = generate_schedule(&reg, FaultProfile::Multiple, &p);
        assert_eq!(s.len(), 34 + p.extra_faults);
        let mut table = FaultTable::new();
        let mut max_active = 0;
        for t in 0..p.ticks {
            apply_faults(&s, t, &mut table);
            max_active = max_active.max(table.len());
        }
        assert!(max_active >= 2);
        let fail_stop = s.iter().filter(|f| f.kind.is_fail_stop()).count();
        assert!(fail_stop * 2 > s.len());
    }

    #[test]
    fn params_lie_in_domain() {
        let reg = default_home();
        for seed in 0..20 {
            let p = ScheduleParams {
                seed,
                ..ScheduleParams::default()
            };
            for f in generate_schedule(&reg, FaultProfile::Multiple, &p) {
                let d = &reg.spec(f.device).unwrap().value_domain;
                if matches!(f.kind, FaultKind::StuckAt | FaultKind::Outlier) {
                    assert!(d.contains(f.param));
                }
                assert!(f.end_tick.unwrap() > f.start_tick);
            }
        }
    }
}
