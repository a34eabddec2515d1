use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use hubmend::apps::{builtin_apps, AppSpec, AppSuppression};
use hubmend::checkpoint::CheckpointLog;
use hubmend::config::{ConfigFile, RedundancyConfig, Scheme};
use hubmend::device::{default_home, Registry};
use hubmend::faults::{apply_faults, FaultIdentifier, FaultKind, FaultSpec, Fixability, OracleConfig, PerfectOracle};
use hubmend::handler::{detect_redundant_devices, AutoHandler, SessionOutcome};
use hubmend::handling::HandlingContext;
use hubmend::{DeviceId, Tick, Value};

struct Rig {
    reg: Registry,
    apps: Vec<AppSpec>,
    sup: AppSuppression,
    oracle: PerfectOracle,
    handler: AutoHandler,
    schedule: Vec<FaultSpec>,
}

impl Rig {
    fn new(schedule: Vec<FaultSpec>, scheme: &str) -> Self {
        let reg = default_home();
        let mut apps = builtin_apps();
        for a in apps.iter_mut() {
            a.suppression_enabled = true;
        }
        let mut config = ConfigFile::default_home(&reg, &apps);
        config.set_scheme_for_all(scheme).unwrap();
        Self {
            reg,
            apps,
            sup: AppSuppression::default(),
            oracle: PerfectOracle::new(OracleConfig::default()),
            handler: AutoHandler::new(config, CheckpointLog::default()),
            schedule,
        }
    }

    fn tick(&mut self, tick: Tick) {
        let mut table = self.reg.faults().clone();
        apply_faults(&self.schedule, tick, &mut table);
        *self.reg.faults_mut() = table;
        let reports = self.oracle.observe(tick, self.reg.faults());
        let mut ctx = HandlingContext {
            registry: &mut self.reg,
            apps: &self.apps,
            app_suppression: &mut self.sup,
            identifier: &self.oracle,
            bound: self.handler.bound(),
            tick,
        };
        self.handler.handle_reports(&reports, &mut ctx);
        self.handler.step(&mut ctx);
    }
}

fn fault_strategy() -> impl Strategy<Value = FaultSpec> {
    let ids: Vec<DeviceId> = default_home().specs().filter(|s| !s.is_virtual).map(|s| s.id).collect();
    (
        prop::sample::select(ids),
        prop::sample::select(FaultKind::ALL.to_vec()),
        prop::sample::select(vec![Fixability::SoftFixable, Fixability::HardFixable, Fixability::Unfixable]),
        prop::option::of(1u64..400),
    )
        .prop_map(|(device, kind, fixability, len)| FaultSpec {
            start_tick: 10,
            device,
            kind,
            fixability,
            param: Value::ON,
            end_tick: len.map(|l| 10 + l),
        })
}

fn scheme_strategy() -> impl Strategy<Value = &'static str> {
    prop::sample::select(Scheme::BUILTIN_NAMES.to_vec())
}

/// Ticks within which a session on `device` must finish.
fn termination_bound(rig: &Rig, device: DeviceId) -> Tick {
    let c = rig.handler.config.device(device);
    let spec = rig.reg.spec(device).unwrap();
    let restart_ticks = (spec.soft_restart_ms.max(spec.hard_restart_ms) / 1000.0).ceil() as Tick;
    let rollback_cost = 1;
    c.retry_max + c.restart_attempts as Tick * restart_ticks * 2 + rollback_cost + rig.handler.bound() * 3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sessions_bracket_and_terminate(fault in fault_strategy(), scheme in scheme_strategy()) {
        let device = fault.device;
        let mut rig = Rig::new(vec![fault], scheme);
        let limit = termination_bound(&rig, device);
        let horizon = 10 + 2 * limit + 20;
        for t in 0..horizon {
            rig.tick(t);
            let open: Vec<DeviceId> = rig.handler.open_sessions().map(|s| s.device).collect();
            let distinct: BTreeSet<_> = open.iter().collect();
            prop_assert_eq!(distinct.len(), open.len());
        }
        prop_assert!(rig.handler.open_sessions().next().is_none(), "still open after {horizon} ticks");
        for s in rig.handler.finished() {
            let took = s.finished_tick.unwrap() - s.started_tick;
            prop_assert!(took <= limit, "{} took {took} > {limit}", s.device);
        }
        let last = rig.handler.finished().last().unwrap();
        if last.outcome == SessionOutcome::Repaired && !rig.oracle.is_faulty(device, horizon - 1) {
            prop_assert!(rig.reg.suppressed().is_empty());
            prop_assert_eq!(rig.sup.suppressed_apps().count(), 0);
        }
    }

    #[test]
    fn redundancy_pairs_symmetric(streams in prop::collection::vec(prop::collection::vec(any::<bool>(), 200), 7)) {
        let reg = default_home();
        let ids: Vec<DeviceId> = hubmend::device::home::SENSORS.to_vec();
        let mut history: BTreeMap<DeviceId, Vec<Value>> = BTreeMap::new();
        for (i, (id, s)) in ids.iter().zip(&streams).enumerate() {
            // Make some pairs identical so both outcomes are exercised.
            let src = if i % 3 == 2 { &streams[0] } else { s };
            history.insert(*id, src.iter().map(|b| Value::from(*b)).collect());
        }
        let cfg = RedundancyConfig { window: 200, ..RedundancyConfig::default() };
        let pairs = detect_redundant_devices(&history, &reg, &cfg);
        let set: BTreeSet<_> = pairs.iter().copied().collect();
        for (a, b) in &pairs {
            prop_assert_ne!(a, b);
            prop_assert!(set.contains(&(*b, *a)));
        }
    }
}
