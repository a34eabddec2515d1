use std::collections::BTreeSet;

use super::{Action, AppId, AppRule, AppSpec, Comparator, Condition, Trigger};
use crate::device::home::*;
use crate::value::{DeviceId, Tick, Value};

/// 07:00.
pub const WINDOW_OPEN: Tick = 7 * 3600;
/// 21:00.
pub const DEFAULT_WINDOW_CLOSE: Tick = 21 * 3600;

fn set(device: DeviceId, on: bool) -> Action {
    Action {
        device,
        value: Value::from(on),
    }
}

fn on_change(devices: &[DeviceId], condition: Condition, actions: Vec<Action>) -> AppRule {
    AppRule {
        trigger: Trigger::Change {
            devices: devices.to_vec(),
        },
        condition,
        actions,
    }
}

fn app(id: u32, name: &str, subs: &[DeviceId], rules: Vec<AppRule>) -> AppSpec {
    AppSpec {
        id: AppId(id),
        name: name.to_string(),
        subscriptions: subs.iter().copied().collect::<BTreeSet<_>>(),
        rules,
        suppression_enabled: false,
    }
}

fn all(of: Vec<Condition>) -> Condition {
    Condition::All { of }
}

fn any(of: Vec<Condition>) -> Condition {
    Condition::Any { of }
}

fn not(c: Condition) -> Condition {
    Condition::Not { of: Box::new(c) }
}

/// The eleven apps of the default home, with windows closing at 21:00.
pub fn builtin_apps() -> Vec<AppSpec> {
    builtin_apps_with_close(DEFAULT_WINDOW_CLOSE)
}

pub fn builtin_apps_with_close(close_at: Tick) -> Vec<AppSpec> {
    let is = Condition::is;
    let temp = |cmp, v: f64| Condition::cmp(TEMPERATURE, cmp, v);
    let away = || is(PRESENCE, false);
    let heating_or_cooling = || any(vec![is(HEATER, true), is(AC, true)]);

    vec![
        app(1, "motion-activated-lights", &[MOTION], vec![
            on_change(&[MOTION], is(MOTION, true), vec![set(LIGHT_LIVING, true), set(LIGHT_HALL, true)]),
            on_change(&[MOTION], is(MOTION, false), vec![set(LIGHT_LIVING, false), set(LIGHT_HALL, false)]),
        ]),
        app(2, "smoke-alarm", &[SMOKE], vec![
            on_change(&[SMOKE], is(SMOKE, true), vec![set(ALARM, true), set(DOOR_LOCK, false)]),
            on_change(&[SMOKE], is(SMOKE, false), vec![set(ALARM, false)]),
        ]),
        app(3, "temperature-control", &[TEMPERATURE], vec![
            on_change(&[TEMPERATURE], temp(Comparator::Lt, 70.0), vec![set(HEATER, true), set(AC, false)]),
            on_change(&[TEMPERATURE], temp(Comparator::Gt, 80.0), vec![set(AC, true), set(HEATER, false)]),
            on_change(
                &[TEMPERATURE],
                all(vec![temp(Comparator::Ge, 70.0), temp(Comparator::Le, 80.0)]),
                vec![set(HEATER, false), set(AC, false)],
            ),
        ]),
        app(4, "water-leak-detector", &[LEAK], vec![
            on_change(&[LEAK], is(LEAK, true), vec![set(ALARM, true), set(WATER_VALVE, false)]),
            on_change(&[LEAK], is(LEAK, false), vec![set(ALARM, false), set(WATER_VALVE, true)]),
        ]),
        app(5, "welcome-home", &[PRESENCE], vec![on_change(
            &[PRESENCE],
            is(PRESENCE, true),
            vec![set(DOOR_LOCK, false), set(COFFEE, true)],
        )]),
        app(6, "secure-patio", &[CONTACT, PRESENCE], vec![
            on_change(&[CONTACT, PRESENCE], all(vec![away(), is(CONTACT, true)]), vec![set(PATIO_SMS, true)]),
            on_change(
                &[CONTACT, PRESENCE],
                not(all(vec![away(), is(CONTACT, true)])),
                vec![set(PATIO_SMS, false)],
            ),
        ]),
        app(7, "energy-saver", &[WINDOW_LIVING, WINDOW_BEDROOM, HEATER, AC], vec![
            on_change(
                &[WINDOW_LIVING, HEATER, AC],
                all(vec![is(WINDOW_LIVING, true), heating_or_cooling()]),
                vec![set(WINDOW_LIVING, false)],
            ),
            on_change(
                &[WINDOW_BEDROOM, HEATER, AC],
                all(vec![is(WINDOW_BEDROOM, true), heating_or_cooling()]),
                vec![set(WINDOW_BEDROOM, false)],
            ),
        ]),
        app(8, "secure-home", &[PRESENCE], vec![on_change(
            &[PRESENCE],
            away(),
            vec![set(DOOR_LOCK, true), set(WINDOW_LIVING, false), set(WINDOW_BEDROOM, false)],
        )]),
        app(9, "intruder-detector", &[MOTION, PRESENCE], vec![
            on_change(&[MOTION, PRESENCE], all(vec![away(), is(MOTION, true)]), vec![set(INTRUDER_SMS, true)]),
            on_change(
                &[MOTION, PRESENCE],
                not(all(vec![away(), is(MOTION, true)])),
                vec![set(INTRUDER_SMS, false)],
            ),
        ]),
        app(10, "alarm-safety", &[ALARM], vec![on_change(
            &[ALARM],
            is(ALARM, true),
            vec![set(LIGHT_LIVING, true), set(LIGHT_HALL, true)],
        )]),
        app(11, "morning-air", &[], vec![
            AppRule {
                trigger: Trigger::Clock { at: WINDOW_OPEN },
                condition: Condition::True,
                actions: vec![set(WINDOW_LIVING, true), set(WINDOW_BEDROOM, true)],
            },
            AppRule {
                trigger: Trigger::Clock { at: close_at },
                condition: Condition::True,
                actions: vec![set(WINDOW_LIVING, false), set(WINDOW_BEDROOM, false)],
            },
        ]),
    ]
}
