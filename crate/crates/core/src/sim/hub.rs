use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::cost::CostModel;
use super::metrics::{compute_energy, EnergyInputs, RunMetrics};
use super::trace::EnvironmentTrace;
use crate::apps::{clock_commands, dispatch, AppSpec, AppSuppression, Command, Event, StateView};
use crate::checkpoint::{CheckpointLog, SensorMatcher};
use crate::config::ConfigFile;
use crate::device::{DeviceError, Health, Registry};
use crate::faults::{apply_faults, FaultIdentifier, FaultSpec, OracleConfig, PerfectOracle};
use crate::handler::{AutoHandler, HandlerEffects, HandlerSession, SuppressionHandler};
use crate::handling::{HandlingContext, NotificationLog};
use crate::value::{DeviceId, Tick, Value};

/// Longest chain of app reactions followed within one tick.
pub const CASCADE_DEPTH: usize = 8;

/// How often stale checkpoints are evicted.
const EVICT_EVERY: Tick = 100;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RunMode {
    /// No faults at all.
    Baseline,
    NoHandler,
    SuppressionOnly,
    /// The automated handler with every device on the named scheme.
    FullHandler(String),
}

impl RunMode {
    pub fn label(&self) -> &'static str {
        match self {
            RunMode::Baseline => "baseline",
            RunMode::NoHandler => "no_handler",
            RunMode::SuppressionOnly => "suppression_only",
            RunMode::FullHandler(_) => "full_handler",
        }
    }

    pub fn scheme(&self) -> Option<&str> {
        match self {
            RunMode::FullHandler(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunMode::FullHandler(s) => write!(f, "full_handler:{s}"),
            other => f.write_str(other.label()),
        }
    }
}

impl FromStr for RunMode {
    type Err = String;

    /// Accepts `a`..`d` or the labels; `d` and `full_handler` may carry a
    /// scheme after a colon.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, scheme) = match s.split_once(':') {
            Some((h, sc)) => (h, Some(sc.to_string())),
            None => (s, None),
        };
        match (head, scheme) {
            ("a" | "baseline", None) => Ok(RunMode::Baseline),
            ("b" | "no_handler", None) => Ok(RunMode::NoHandler),
            ("c" | "suppression_only", None) => Ok(RunMode::SuppressionOnly),
            ("d" | "full_handler", sc) => Ok(RunMode::FullHandler(sc.unwrap_or_else(|| "conservative".into()))),
            _ => Err(format!("unknown mode `{s}`")),
        }
    }
}

/// What each device was doing at each tick. `None` marks an unresponsive
/// device.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StateHistory {
    pub devices: Vec<DeviceId>,
    pub rows: Vec<Vec<Option<Value>>>,
}

impl StateHistory {
    pub fn ticks(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, device: DeviceId) -> Option<Vec<Option<Value>>> {
        let i = self.devices.iter().position(|d| *d == device)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Columns with unresponsive ticks filled by the last known value.
    pub fn filled_columns(&self) -> BTreeMap<DeviceId, Vec<Value>> {
        self.devices
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mut last = Value::OFF;
                let col = self
                    .rows
                    .iter()
                    .map(|r| {
                        if let Some(v) = r[i] {
                            last = v;
                        }
                        last
                    })
                    .collect();
                (*d, col)
            })
            .collect()
    }
}

/// Everything a run needs besides its mode.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub registry: Registry,
    pub apps: Vec<AppSpec>,
    pub config: ConfigFile,
    pub trace: EnvironmentTrace,
    pub faults: Vec<FaultSpec>,
    pub oracle: OracleConfig,
    pub cost: CostModel,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub mode: RunMode,
    pub metrics: RunMetrics,
    pub history: StateHistory,
    pub notifications: NotificationLog,
    pub sessions: Vec<HandlerSession>,
}

enum Handler {
    None,
    Suppression(SuppressionHandler),
    Full(Box<AutoHandler>),
}

struct Hub<'a> {
    registry: Registry,
    apps: &'a [AppSpec],
    app_suppression: AppSuppression,
    oracle: PerfectOracle,
    /// The hub's belief about every device.
    view: StateView,
    /// Last value apps asked each actuator for.
    desired: BTreeMap<DeviceId, Value>,
    /// Last value seen on suppressed devices, for counting withheld events.
    shadow: BTreeMap<DeviceId, Value>,
    metrics: RunMetrics,
    actuated_this_tick: bool,
}

impl Hub<'_> {
    fn with_ctx<R>(&mut self, bound: Tick, tick: Tick, f: impl FnOnce(&mut HandlingContext) -> R) -> R {
        let mut ctx = HandlingContext {
            registry: &mut self.registry,
            apps: self.apps,
            app_suppression: &mut self.app_suppression,
            identifier: &self.oracle,
            bound,
            tick,
        };
        f(&mut ctx)
    }

    fn execute(&mut self, commands: Vec<Command>, tick: Tick) {
        let mut pending = commands;
        for _ in 0..=CASCADE_DEPTH {
            if pending.is_empty() {
                return;
            }
            let mut events = Vec::new();
            for c in pending.drain(..) {
                self.desired.insert(c.device, c.value);
                match self.registry.actuate(c.device, c.value, tick) {
                    Ok(_) => {
                        let new = self.registry.live_value(c.device).expect("registered");
                        let old = self.view.insert(c.device, new).unwrap_or(new);
                        if old != new {
                            self.actuated_this_tick = true;
                            events.push(Event {
                                device: c.device,
                                old_value: old,
                                new_value: new,
                                tick,
                            });
                        }
                    }
                    Err(DeviceError::SuppressedDevice(_)) => self.metrics.commands_dropped += 1,
                    Err(_) => self.metrics.commands_failed += 1,
                }
            }
            for e in events {
                self.metrics.count_event(e.device, true);
                pending.extend(dispatch(&e, self.apps, &self.view, &self.registry, &mut self.app_suppression));
            }
        }
        if !pending.is_empty() {
            self.metrics.cascades_truncated += 1;
        }
    }

    fn poll(&mut self, tick: Tick) -> Vec<Event> {
        let ids: Vec<DeviceId> = self.registry.ids().collect();
        let mut events = Vec::new();
        for id in ids {
            if self.registry.is_suppressed(id) {
                if let Ok(s) = self.registry.probe(id, tick) {
                    if s.health != Health::Unresponsive {
                        let last = self.shadow.insert(id, s.value).unwrap_or(s.value);
                        if last != s.value {
                            self.metrics.count_event(id, false);
                        }
                    }
                }
                continue;
            }
            let state = self.registry.read_device(id, tick).expect("registered");
            self.shadow.insert(id, state.value);
            if state.health == Health::Unresponsive {
                continue;
            }
            let old = self.view.insert(id, state.value).unwrap_or(state.value);
            if old != state.value {
                events.push(Event {
                    device: id,
                    old_value: old,
                    new_value: state.value,
                    tick,
                });
            }
        }
        events
    }

    fn apply_effects(&mut self, effects: HandlerEffects, tick: Tick) {
        for (d, v) in effects.view_updates {
            self.view.insert(d, v);
            if self.registry.spec(d).is_some_and(|s| s.is_actuator()) {
                self.desired.insert(d, v);
            }
        }
        for d in effects.released {
            let Some(want) = self.desired.get(&d).copied() else {
                continue;
            };
            if self.registry.spec(d).is_some_and(|s| s.is_actuator()) && self.registry.live_value(d) != Some(want) {
                if self.registry.actuate(d, want, tick).is_ok() {
                    let v = self.registry.live_value(d).expect("registered");
                    self.view.insert(d, v);
                }
            }
        }
    }

    /// What a device amounts to at the end of a tick.
    fn recorded(&self, id: DeviceId, tick: Tick) -> Option<Value> {
        let spec = self.registry.spec(id).expect("registered");
        if spec.is_virtual {
            return self.registry.truth(id);
        }
        if spec.is_sensor() {
            let source = self.registry.redirect_of(id).unwrap_or(id);
            if let Some(v) = self.registry.override_of(source) {
                if self.registry.is_faulty(source) {
                    return Some(v);
                }
            }
            let s = self.registry.probe(source, tick).ok()?;
            return (s.health != Health::Unresponsive).then_some(s.value);
        }
        let s = self.registry.probe(id, tick).ok()?;
        (s.health != Health::Unresponsive).then_some(s.value)
    }
}

/// Runs the tick pipeline over the whole trace.
///
/// Each tick: faults are applied, the identifier observes, clock rules fire,
/// every device is polled in id order, events are dispatched (following
/// cascades within the tick), the handler runs, a checkpoint may be taken,
/// and every device's state is recorded.
pub fn run_simulation(scenario: &Scenario, mode: &RunMode) -> RunResult {
    let mut registry = scenario.registry.clone();
    let mut config = scenario.config.clone();
    if let RunMode::FullHandler(s) = mode {
        config
            .set_scheme_for_all(s)
            .unwrap_or_else(|e| panic!("run mode names an unknown scheme: {e}"));
    }
    let apps: Vec<AppSpec> = scenario
        .apps
        .iter()
        .map(|a| {
            let mut a = a.clone();
            if let Some(c) = config.apps.get(&a.id) {
                a.suppression_enabled = c.suppression_enabled;
            }
            a
        })
        .collect();
    let faults: &[FaultSpec] = if *mode == RunMode::Baseline { &[] } else { &scenario.faults };
    for id in scenario.trace.sensors.keys() {
        if let Some(v) = scenario.trace.value(*id, 0) {
            let _ = registry.set_truth(*id, v);
        }
    }
    let view: StateView = registry
        .ids()
        .map(|id| (id, registry.live_value(id).expect("registered")))
        .collect();
    let desired = registry
        .actuator_ids()
        .map(|id| (id, registry.live_value(id).expect("registered")))
        .collect();
    let bound = config.general.identification_upper_bound;
    let mut handler = match mode {
        RunMode::Baseline | RunMode::NoHandler => Handler::None,
        RunMode::SuppressionOnly => Handler::Suppression(SuppressionHandler::default()),
        RunMode::FullHandler(_) => {
            let log = CheckpointLog::new(SensorMatcher::for_registry(
                &registry,
                config.general.sensor_match_tolerance,
            ));
            Handler::Full(Box::new(AutoHandler::new(config.clone(), log)))
        }
    };
    let mut hub = Hub {
        registry,
        apps: &apps,
        app_suppression: AppSuppression::default(),
        oracle: PerfectOracle::new(scenario.oracle),
        view,
        desired,
        shadow: BTreeMap::new(),
        metrics: RunMetrics::new(mode),
        actuated_this_tick: false,
    };
    let mut history = StateHistory {
        devices: hub.registry.ids().collect(),
        rows: Vec::with_capacity(scenario.trace.ticks as usize),
    };

    for tick in 0..scenario.trace.ticks {
        hub.actuated_this_tick = false;
        for (id, col) in &scenario.trace.sensors {
            let _ = hub.registry.set_truth(*id, col[tick as usize]);
        }
        apply_faults(faults, tick, hub.registry.faults_mut());
        let reports = hub.oracle.observe(tick, hub.registry.faults());
        // Reports reach the handler as soon as they exist, so a device
        // identified this tick is suppressed before it is polled.
        hub.with_ctx(bound, tick, |ctx| match &mut handler {
            Handler::None => {}
            Handler::Suppression(h) => h.handle_reports(&reports, ctx),
            Handler::Full(h) => h.handle_reports(&reports, ctx),
        });

        let clock = clock_commands(tick, hub.apps, &hub.view, &hub.registry, &hub.app_suppression);
        hub.execute(clock, tick);

        let events = hub.poll(tick);
        for e in events {
            hub.metrics.count_event(e.device, true);
            let cmds = dispatch(&e, hub.apps, &hub.view, &hub.registry, &mut hub.app_suppression);
            hub.execute(cmds, tick);
        }

        let effects = hub.with_ctx(bound, tick, |ctx| match &mut handler {
            Handler::None => HandlerEffects::default(),
            Handler::Suppression(h) => h.step(ctx),
            Handler::Full(h) => h.step(ctx),
        });
        hub.apply_effects(effects, tick);

        if let Handler::Full(h) = &mut handler {
            if hub.actuated_this_tick
                && hub.registry.suppressed().is_empty()
                && hub.oracle.fault_free(None, tick, tick)
            {
                h.checkpoints.take_checkpoint(hub.registry.snapshot(tick), tick);
            }
            h.checkpoints.commit_pending(tick, bound, &hub.oracle);
            if tick % EVICT_EVERY == 0 {
                h.checkpoints.evict_stale(tick, config.general.checkpoint_ttl);
            }
        }

        let row = history.devices.iter().map(|id| hub.recorded(*id, tick)).collect();
        history.rows.push(row);
    }

    let mut metrics = hub.metrics;
    metrics.actuations = hub.registry.counters.total_actuations();
    metrics.restarts = hub.registry.counters.total_restarts();
    metrics.withheld_app_events = hub.app_suppression.withheld_events;
    metrics.energy_mj = compute_energy(&EnergyInputs::from_run(&metrics, &hub.registry.counters), &hub.registry, &scenario.cost);
    let (notifications, sessions) = match handler {
        Handler::Full(h) => {
            let h = *h;
            metrics.rollbacks = h.stats.rollbacks;
            metrics.rollbacks_succeeded = h.stats.rollbacks_succeeded;
            metrics.rollback_actuations = h.stats.rollback_actuations;
            metrics.checkpoints = h.checkpoints.len() as u64;
            let mut sessions = h.finished().to_vec();
            sessions.extend(h.open_sessions().cloned());
            (h.notifications, sessions)
        }
        _ => (NotificationLog::default(), Vec::new()),
    };
    RunResult {
        mode: mode.clone(),
        metrics,
        history,
        notifications,
        sessions,
    }
}
