mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::{oracle_select, random_case, registry_for};
use hubmend::checkpoint::{rollback, select_checkpoint, CheckpointLog, RollbackError, RollbackStrategy, SensorMatcher};
use hubmend::device::{default_home, home, SystemSnapshot};
use hubmend::{DeviceId, Value};

fn snapshot(sensors: &std::collections::BTreeMap<DeviceId, Value>) -> SystemSnapshot {
    SystemSnapshot {
        sensor_states: sensors.clone(),
        ..SystemSnapshot::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn selection_matches_brute_force(seed in any::<u64>()) {
        let case = random_case(seed);
        let faulty: BTreeSet<DeviceId> = case.faulty_sensors.clone();
        for s in RollbackStrategy::ACTIVE {
            let got = select_checkpoint(&case.log, s, &snapshot(&case.current), &faulty, &case.fail_safe);
            let want = oracle_select(&case.log.entries, s, &case.current, &faulty, &case.fail_safe);
            prop_assert_eq!(got, want, "{:?}", s);
        }
    }

    /// Failure leaves every actuator and counter alone; success only
    /// overrides faulty sensors.
    #[test]
    fn rollback_is_all_or_nothing(seed in any::<u64>(), strategy in prop::sample::select(RollbackStrategy::ACTIVE.to_vec())) {
        let case = random_case(seed);
        let mut reg = registry_for(&case);
        let trigger = case.faulty_sensors.iter().next().copied().unwrap_or(home::MOTION);
        let mut faulty: BTreeSet<DeviceId> = case.faulty_sensors.union(&case.faulty_actuators).copied().collect();
        let before = reg.clone();
        let res = rollback(trigger, &case.log, &mut reg, strategy, &faulty, &case.fail_safe, 1);
        faulty.insert(trigger);
        let want = oracle_select(&case.log.entries, strategy, &case.current, &faulty, &case.fail_safe);
        match res {
            Err(e) => {
                prop_assert_eq!(&reg, &before);
                match e {
                    RollbackError::NoMatch => prop_assert_eq!(want, None),
                    RollbackError::FaultyActuatorBlocks(d) => {
                        prop_assert!(case.faulty_actuators.contains(&d));
                        let target = &case.log.entries[want.unwrap()];
                        prop_assert_ne!(target.actuator_states.get(&d).copied(), before.live_value(d));
                    }
                    other => prop_assert!(false, "{other:?}"),
                }
            }
            Ok(out) => {
                prop_assert_eq!(Some(out.selected), want);
                let target = &case.log.entries[out.selected];
                for (d, v) in &target.actuator_states {
                    prop_assert_eq!(reg.live_value(*d), Some(*v));
                }
                for id in reg.ids().collect::<Vec<_>>() {
                    if reg.override_of(id).is_some() {
                        prop_assert!(before.is_faulty(id) && faulty.contains(&id));
                    }
                }
            }
        }
    }

    #[test]
    fn committed_keys_are_unique(seeds in prop::collection::vec(any::<u64>(), 1..60)) {
        let reg = default_home();
        let mut log = CheckpointLog::new(SensorMatcher::for_registry(&reg, common::TOLERANCE));
        for (t, seed) in seeds.iter().enumerate() {
            let c = random_case(*seed);
            log.commit(&SystemSnapshot { sensor_states: c.current, actuator_states: c.actuators, tick: t as u64 }, t as u64);
            if t % 7 == 6 {
                log.evict_stale(t as u64, 20);
            }
        }
        let none = BTreeSet::new();
        for (i, a) in log.entries.iter().enumerate() {
            prop_assert!(a.frequency >= 1);
            for b in &log.entries[i + 1..] {
                prop_assert_ne!(&a.sensor_states, &b.sensor_states);
                prop_assert!(!log.matcher.matches(&a.sensor_states, &b.sensor_states, &none));
            }
        }
    }
}
