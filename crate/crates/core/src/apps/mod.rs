//! Trigger-action apps: subscriptions, rules, dispatch and app suppression.
//!
//! A rule is evaluated against the hub's current view whenever one of its
//! trigger devices changes, or at its time of day for clock rules. Rules
//! describe levels ("motion on means light on"), so re-evaluating a rule on
//! an unrelated change is harmless: the hub drops commands that would not
//! change anything.

mod builtin;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::Registry;
use crate::value::{DeviceId, Tick, Value, SECONDS_PER_DAY};

pub use builtin::{builtin_apps, builtin_apps_with_close, DEFAULT_WINDOW_CLOSE, WINDOW_OPEN};

/// What the hub currently believes each device's state to be.
pub type StateView = BTreeMap<DeviceId, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AppId(pub u32);

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "App{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl Comparator {
    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Comparator::Lt => a < b,
            Comparator::Le => a <= b,
            Comparator::Gt => a > b,
            Comparator::Ge => a >= b,
            Comparator::Eq => a == b,
            Comparator::Ne => a != b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Condition {
    True,
    Cmp {
        device: DeviceId,
        cmp: Comparator,
        value: Value,
    },
    All {
        of: Vec<Condition>,
    },
    Any {
        of: Vec<Condition>,
    },
    Not {
        of: Box<Condition>,
    },
}

impl Condition {
    pub fn cmp(device: DeviceId, cmp: Comparator, value: impl Into<Value>) -> Self {
        Condition::Cmp {
            device,
            cmp,
            value: value.into(),
        }
    }

    pub fn is(device: DeviceId, on: bool) -> Self {
        Self::cmp(device, Comparator::Eq, on)
    }

    /// Devices whose state this condition reads.
    pub fn devices(&self, out: &mut BTreeSet<DeviceId>) {
        match self {
            Condition::True => {}
            Condition::Cmp { device, .. } => {
                out.insert(*device);
            }
            Condition::All { of } | Condition::Any { of } => of.iter().for_each(|c| c.devices(out)),
            Condition::Not { of } => of.devices(out),
        }
    }

    /// Devices missing from the view compare false.
    pub fn eval(&self, view: &StateView) -> bool {
        match self {
            Condition::True => true,
            Condition::Cmp { device, cmp, value } => {
                view.get(device).is_some_and(|v| cmp.holds(v.0, value.0))
            }
            Condition::All { of } => of.iter().all(|c| c.eval(view)),
            Condition::Any { of } => of.iter().any(|c| c.eval(view)),
            Condition::Not { of } => !of.eval(view),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trigger {
    /// Fires when any listed device changes state.
    Change { devices: Vec<DeviceId> },
    /// Fires once a day at `at` seconds past midnight.
    Clock { at: Tick },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Action {
    pub device: DeviceId,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppRule {
    pub trigger: Trigger,
    #[serde(default = "always")]
    pub condition: Condition,
    pub actions: Vec<Action>,
}

fn always() -> Condition {
    Condition::True
}

impl AppRule {
    fn fires_on(&self, device: DeviceId) -> bool {
        matches!(&self.trigger, Trigger::Change { devices } if devices.contains(&device))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppSpec {
    pub id: AppId,
    pub name: String,
    pub subscriptions: BTreeSet<DeviceId>,
    pub rules: Vec<AppRule>,
    #[serde(default)]
    pub suppression_enabled: bool,
}

impl AppSpec {
    pub fn subscribes(&self, device: DeviceId) -> bool {
        self.subscriptions.contains(&device)
    }

    /// Checks that rules only read subscribed devices and only actuate
    /// registered actuators.
    pub fn validate(&self, registry: &Registry) -> Result<(), AppError> {
        for rule in &self.rules {
            let mut read = BTreeSet::new();
            rule.condition.devices(&mut read);
            if let Trigger::Change { devices } = &rule.trigger {
                read.extend(devices.iter().copied());
            }
            if let Some(d) = read.iter().find(|d| !self.subscriptions.contains(d)) {
                return Err(AppError::Unsubscribed { app: self.id, device: *d });
            }
            for a in &rule.actions {
                match registry.spec(a.device) {
                    Some(s) if s.is_actuator() && s.value_domain.contains(a.value) => {}
                    _ => return Err(AppError::BadAction { app: self.id, device: a.device }),
                }
            }
        }
        for d in &self.subscriptions {
            if registry.spec(*d).is_none() {
                return Err(AppError::UnknownDevice { app: self.id, device: *d });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error("reading apps: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing apps: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{app}: rule reads device {device} without subscribing to it")]
    Unsubscribed { app: AppId, device: DeviceId },
    #[error("{app}: action on device {device} is not a valid actuation")]
    BadAction { app: AppId, device: DeviceId },
    #[error("{app}: unknown device {device}")]
    UnknownDevice { app: AppId, device: DeviceId },
    #[error("duplicate app id {0}")]
    Duplicate(AppId),
}

pub fn load_apps(path: impl AsRef<Path>, registry: &Registry) -> Result<Vec<AppSpec>, AppError> {
    let mut apps: Vec<AppSpec> = serde_json::from_str(&fs::read_to_string(path)?)?;
    apps.sort_by_key(|a| a.id);
    for w in apps.windows(2) {
        if w[0].id == w[1].id {
            return Err(AppError::Duplicate(w[0].id));
        }
    }
    for a in &apps {
        a.validate(registry)?;
    }
    Ok(apps)
}

pub fn save_apps(path: impl AsRef<Path>, apps: &[AppSpec]) -> Result<(), AppError> {
    fs::write(path, serde_json::to_string_pretty(apps)?)?;
    Ok(())
}

/// A state change seen by the hub.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub device: DeviceId,
    pub old_value: Value,
    pub new_value: Value,
    pub tick: Tick,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub app: AppId,
    pub device: DeviceId,
    pub value: Value,
}

/// Which apps are halted, and because of which faulty devices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AppSuppression {
    by_app: BTreeMap<AppId, BTreeSet<DeviceId>>,
    /// Events withheld from suppressed apps.
    pub withheld_events: u64,
}

impl AppSuppression {
    pub fn is_suppressed(&self, app: AppId) -> bool {
        self.by_app.get(&app).is_some_and(|s| !s.is_empty())
    }

    /// Halts every suppression-enabled app subscribed to `device`.
    pub fn suppress_apps_for(&mut self, device: DeviceId, apps: &[AppSpec]) {
        for app in apps.iter().filter(|a| a.suppression_enabled && a.subscribes(device)) {
            self.by_app.entry(app.id).or_default().insert(device);
        }
    }

    pub fn release_apps_for(&mut self, device: DeviceId) {
        for set in self.by_app.values_mut() {
            set.remove(&device);
        }
        self.by_app.retain(|_, s| !s.is_empty());
    }

    pub fn suppressed_apps(&self) -> impl Iterator<Item = AppId> + '_ {
        self.by_app.iter().filter(|(_, s)| !s.is_empty()).map(|(a, _)| *a)
    }
}

fn emit(app: &AppSpec, rule: &AppRule, view: &StateView, registry: &Registry, out: &mut Vec<Command>) {
    if !rule.condition.eval(view) {
        return;
    }
    for a in &rule.actions {
        if !registry.is_suppressed(a.device) {
            out.push(Command {
                app: app.id,
                device: a.device,
                value: a.value,
            });
        }
    }
}

/// Commands produced by `event`, in app-id order.
///
/// Suppressed apps see nothing; commands addressed to suppressed devices are
/// dropped.
pub fn dispatch(
    event: &Event,
    apps: &[AppSpec],
    view: &StateView,
    registry: &Registry,
    suppression: &mut AppSuppression,
) -> Vec<Command> {
    let mut out = Vec::new();
    let mut ordered: Vec<&AppSpec> = apps.iter().collect();
    ordered.sort_by_key(|a| a.id);
    for app in ordered {
        if !app.subscribes(event.device) {
            continue;
        }
        if suppression.is_suppressed(app.id) {
            suppression.withheld_events += 1;
            continue;
        }
        for rule in app.rules.iter().filter(|r| r.fires_on(event.device)) {
            emit(app, rule, view, registry, &mut out);
        }
    }
    out
}

/// Commands from clock rules due at `tick`.
pub fn clock_commands(
    tick: Tick,
    apps: &[AppSpec],
    view: &StateView,
    registry: &Registry,
    suppression: &AppSuppression,
) -> Vec<Command> {
    let time_of_day = tick % SECONDS_PER_DAY;
    let mut out = Vec::new();
    let mut ordered: Vec<&AppSpec> = apps.iter().collect();
    ordered.sort_by_key(|a| a.id);
    for app in ordered.into_iter().filter(|a| !suppression.is_suppressed(a.id)) {
        for rule in &app.rules {
            if matches!(rule.trigger, Trigger::Clock { at } if at == time_of_day) {
                emit(app, rule, view, registry, &mut out);
            }
        }
    }
    out
}

/// Would setting `device` to `value` make any installed app issue a command?
pub fn does_actuation_cascade(device: DeviceId, value: Value, apps: &[AppSpec], view: &StateView) -> bool {
    let mut view = view.clone();
    view.insert(device, value);
    apps.iter().filter(|a| a.subscribes(device)).any(|app| {
        app.rules
            .iter()
            .any(|r| r.fires_on(device) && !r.actions.is_empty() && r.condition.eval(&view))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{default_home, home};

    fn view(reg: &Registry) -> StateView {
        reg.ids().map(|id| (id, reg.live_value(id).unwrap())).collect()
    }

    fn event(device: DeviceId, new: bool) -> Event {
        Event {
            device,
            old_value: Value::from(!new),
            new_value: Value::from(new),
            tick: 1,
        }
    }

    #[test]
    fn motion_turns_lights_on() {
        let reg = default_home();
        let apps = builtin_apps();
        let mut v = view(&reg);
        v.insert(home::MOTION, Value::ON);
        let cmds = dispatch(&event(home::MOTION, true), &apps, &v, &reg, &mut AppSuppression::default());
        let targets: Vec<_> = cmds.iter().map(|c| (c.app, c.device, c.value)).collect();
        assert!(targets.contains(&(AppId(1), home::LIGHT_LIVING, Value::ON)));
        assert!(targets.contains(&(AppId(1), home::LIGHT_HALL, Value::ON)));
    }

    #[test]
    fn suppressed_app_gets_nothing() {
        let reg = default_home();
        let mut apps = builtin_apps();
        apps.iter_mut().for_each(|a| a.suppression_enabled = true);
        let mut sup = AppSuppression::default();
        sup.suppress_apps_for(home::SMOKE, &apps);
        let mut v = view(&reg);
        v.insert(home::SMOKE, Value::ON);
        let cmds = dispatch(&event(home::SMOKE, true), &apps, &v, &reg, &mut sup);
        assert!(cmds.is_empty());
        assert_eq!(sup.withheld_events, 1);
        sup.release_apps_for(home::SMOKE);
        assert!(!sup.is_suppressed(AppId(2)));
    }

    #[test]
    fn suppression_disabled_apps_keep_running() {
        let apps = builtin_apps();
        let mut sup = AppSuppression::default();
        sup.suppress_apps_for(home::PRESENCE, &apps);
        assert_eq!(sup.suppressed_apps().count(), 0);
    }

    #[test]
    fn commands_to_suppressed_devices_dropped() {
        let mut reg = default_home();
        reg.suppress(home::LIGHT_HALL).unwrap();
        let apps = builtin_apps();
        let mut v = view(&reg);
        v.insert(home::MOTION, Value::ON);
        let cmds = dispatch(&event(home::MOTION, true), &apps, &v, &reg, &mut AppSuppression::default());
        assert!(cmds.iter().all(|c| c.device != home::LIGHT_HALL));
    }

    #[test]
    fn heater_on_with_open_window_cascades() {
        let reg = default_home();
        let apps = builtin_apps();
        let mut v = view(&reg);
        v.insert(home::WINDOW_LIVING, Value::ON);
        assert!(does_actuation_cascade(home::HEATER, Value::ON, &apps, &v));
        v.insert(home::WINDOW_LIVING, Value::OFF);
        assert!(!does_actuation_cascade(home::HEATER, Value::ON, &apps, &v));
    }

    #[test]
    fn light_does_not_cascade_under_app1_alone() {
        let reg = default_home();
        let apps: Vec<_> = builtin_apps().into_iter().filter(|a| a.id == AppId(1)).collect();
        let v = view(&reg);
        assert!(!does_actuation_cascade(home::LIGHT_LIVING, Value::ON, &apps, &v));
        assert!(!does_actuation_cascade(home::HEATER, Value::ON, &[], &v));
    }

    #[test]
    fn clock_rule_fires_at_seven() {
        let reg = default_home();
        let apps = builtin_apps();
        let v = view(&reg);
        let cmds = clock_commands(WINDOW_OPEN, &apps, &v, &reg, &AppSuppression::default());
        assert_eq!(cmds.len(), 2);
        assert!(cmds.iter().all(|c| c.value == Value::ON && c.app == AppId(11)));
        assert!(clock_commands(WINDOW_OPEN + 1, &apps, &v, &reg, &AppSuppression::default()).is_empty());
        let next_day = WINDOW_OPEN + SECONDS_PER_DAY;
        assert_eq!(clock_commands(next_day, &apps, &v, &reg, &AppSuppression::default()).len(), 2);
    }

    #[test]
    fn apps_file_round_trips_and_validates() {
        let reg = default_home();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("apps.json");
        save_apps(&path, &builtin_apps()).unwrap();
        assert_eq!(load_apps(&path, &reg).unwrap(), builtin_apps());

        let mut bad = builtin_apps();
        bad[0].subscriptions.clear();
        save_apps(&path, &bad).unwrap();
        assert!(matches!(load_apps(&path, &reg), Err(AppError::Unsubscribed { .. })));
    }
}
