//! Shared fixtures: a brute-force rollback oracle and random checkpoint logs.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hubmend::checkpoint::{Checkpoint, CheckpointLog, RollbackStrategy, SensorMatcher};
use hubmend::device::{default_home, home, Registry, SystemSnapshot};
use hubmend::{DeviceId, Value};

pub const TOLERANCE: f64 = 2.0;
const TEMPS: [f64; 5] = [70.0, 71.0, 72.0, 74.0, 77.0];
const VARIED_ACTUATORS: [DeviceId; 3] = [home::DOOR_LOCK, home::LIGHT_LIVING, home::HEATER];

fn sensors_ok(entry: &Checkpoint, current: &BTreeMap<DeviceId, Value>, faulty: &BTreeSet<DeviceId>) -> bool {
    let mut keys: Vec<&DeviceId> = entry.sensor_states.keys().collect();
    keys.extend(current.keys());
    for k in keys {
        if faulty.contains(k) {
            continue;
        }
        let (Some(a), Some(b)) = (entry.sensor_states.get(k), current.get(k)) else {
            return false;
        };
        let ok = if *k == home::TEMPERATURE {
            (a.0 - b.0).abs() <= TOLERANCE
        } else {
            a.0 == b.0
        };
        if !ok {
            return false;
        }
    }
    true
}

/// Index of the best entry by (frequency, last tick), earliest on a full tie.
fn most_frequent(entries: &[Checkpoint], idx: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &i in idx {
        best = match best {
            None => Some(i),
            Some(b) => {
                let (x, y) = (&entries[i], &entries[b]);
                if x.frequency > y.frequency || (x.frequency == y.frequency && x.last_tick > y.last_tick) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Exhaustive scan applying each strategy's predicate and tiebreaks.
pub fn oracle_select(
    entries: &[Checkpoint],
    strategy: RollbackStrategy,
    current: &BTreeMap<DeviceId, Value>,
    faulty: &BTreeSet<DeviceId>,
    fail_safe: &BTreeMap<DeviceId, Value>,
) -> Option<usize> {
    let all: Vec<usize> = (0..entries.len()).collect();
    let matching: Vec<usize> = all.iter().copied().filter(|i| sensors_ok(&entries[*i], current, faulty)).collect();
    match strategy {
        RollbackStrategy::Disabled => None,
        RollbackStrategy::MostRecent => {
            let mut best: Option<usize> = None;
            for i in all {
                let better = best.is_none_or(|b| {
                    let (x, y) = (&entries[i], &entries[b]);
                    (x.last_tick, x.frequency) > (y.last_tick, y.frequency)
                });
                if better {
                    best = Some(i);
                }
            }
            best
        }
        RollbackStrategy::FailNorm => most_frequent(entries, &matching),
        RollbackStrategy::FailSafe => {
            let safe: Vec<usize> = all
                .iter()
                .copied()
                .filter(|i| fail_safe.iter().all(|(d, v)| entries[*i].actuator_states.get(d) == Some(v)))
                .collect();
            if safe.is_empty() {
                return most_frequent(entries, &matching);
            }
            let both: Vec<usize> = safe.iter().copied().filter(|i| matching.contains(i)).collect();
            most_frequent(entries, &both).or_else(|| most_frequent(entries, &safe))
        }
    }
}

/// Sensor readings drawn from a small alphabet so that matches are common.
pub fn random_sensors(rng: &mut ChaCha8Rng) -> BTreeMap<DeviceId, Value> {
    home::SENSORS
        .iter()
        .map(|d| {
            let v = match *d {
                home::TEMPERATURE => Value(TEMPS[rng.random_range(0..TEMPS.len())]),
                home::MOTION | home::PRESENCE | home::CONTACT => Value::from(rng.random_bool(0.5)),
                _ => Value::OFF,
            };
            (*d, v)
        })
        .collect()
}

pub fn random_actuators(rng: &mut ChaCha8Rng, base: &SystemSnapshot) -> BTreeMap<DeviceId, Value> {
    let mut a = base.actuator_states.clone();
    for d in VARIED_ACTUATORS {
        a.insert(d, Value::from(rng.random_bool(0.5)));
    }
    a
}

pub struct Case {
    pub log: CheckpointLog,
    pub current: BTreeMap<DeviceId, Value>,
    pub faulty_sensors: BTreeSet<DeviceId>,
    pub faulty_actuators: BTreeSet<DeviceId>,
    pub fail_safe: BTreeMap<DeviceId, Value>,
    pub actuators: BTreeMap<DeviceId, Value>,
}

/// A random log of up to 10 entries over the default home, plus a current
/// state, faulty sets and fail-safe table.
pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reg = default_home();
    let base = reg.snapshot(0);
    let mut log = CheckpointLog::new(SensorMatcher::for_registry(&reg, TOLERANCE));
    let n = rng.random_range(0..=10);
    for _ in 0..n {
        log.entries.push(Checkpoint {
            sensor_states: random_sensors(&mut rng),
            actuator_states: random_actuators(&mut rng, &base),
            last_tick: rng.random_range(1..20),
            frequency: rng.random_range(1..5),
        });
    }
    let mut faulty_sensors = BTreeSet::new();
    for d in [home::MOTION, home::PRESENCE, home::TEMPERATURE] {
        if rng.random_bool(0.25) {
            faulty_sensors.insert(d);
        }
    }
    let mut faulty_actuators = BTreeSet::new();
    for d in VARIED_ACTUATORS {
        if rng.random_bool(0.15) {
            faulty_actuators.insert(d);
        }
    }
    let mut fail_safe = BTreeMap::new();
    if rng.random_bool(0.5) {
        fail_safe.insert(home::DOOR_LOCK, Value::ON);
    }
    if rng.random_bool(0.3) {
        fail_safe.insert(home::HEATER, Value::OFF);
    }
    Case {
        log,
        current: random_sensors(&mut rng),
        faulty_sensors,
        faulty_actuators,
        fail_safe,
        actuators: random_actuators(&mut rng, &base),
    }
}

/// A default home whose live state is `case`'s current state, with the
/// faulty devices faulted.
pub fn registry_for(case: &Case) -> Registry {
    use hubmend::faults::{FaultKind, FaultSpec, Fixability};
    let mut reg = default_home();
    for (d, v) in &case.actuators {
        reg.actuate(*d, *v, 0).unwrap();
    }
    for (d, v) in &case.current {
        reg.set_truth(*d, *v).unwrap();
        reg.read_device(*d, 0).unwrap();
    }
    for d in case.faulty_sensors.iter().chain(&case.faulty_actuators) {
        reg.faults_mut().inject(FaultSpec {
            start_tick: 0,
            device: *d,
            kind: if case.faulty_actuators.contains(d) { FaultKind::Power } else { FaultKind::Outlier },
            fixability: Fixability::Unfixable,
            param: Value::ON,
            end_tick: None,
        });
    }
    reg
}
