//! Fault schedule files.
//!
//! The native format is a five-field CSV, `tick,device_id,kind,fixability,value`,
//! with an optional header. A `NO_FAULT` line closes the most recent open
//! fault on that device:
//!
//! ```text
//! tick,device_id,kind,fixability,value
//! 1000,1,STUCK_AT,UNFIXABLE,0
//! 2000,1,NO_FAULT,-,0
//! ```
//!
//! Legacy four-field tuples such as `(1000, 0, UNFIXABLE, 1)` are also
//! accepted. Their second field is a zero-based index into the registry's
//! devices in ascending id order, the third is the fixability (or
//! `NO_FAULT`), and the fault kind is always stuck-at.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{FaultKind, FaultSpec, Fixability};
use crate::device::Registry;
use crate::value::{DeviceId, Tick, Value};

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("reading schedule: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown device {device}")]
    UnknownDevice { line: usize, device: String },
    #[error("line {line}: NO_FAULT for device {device} with no open fault")]
    DanglingRemoval { line: usize, device: DeviceId },
    #[error("line {line}: value {value} outside the domain of device {device}")]
    ParamOutOfDomain {
        line: usize,
        device: DeviceId,
        value: Value,
    },
}

enum Entry {
    Start(FaultSpec),
    Remove(DeviceId),
}

pub fn parse_fault_schedule(
    path: impl AsRef<Path>,
    registry: &Registry,
) -> Result<Vec<FaultSpec>, ScheduleError> {
    let text = fs::read_to_string(path)?;
    parse_fault_schedule_str(&text, registry)
}

pub fn parse_fault_schedule_str(
    text: &str,
    registry: &Registry,
) -> Result<Vec<FaultSpec>, ScheduleError> {
    let ids: Vec<DeviceId> = registry.ids().collect();
    let mut entries: Vec<(Tick, usize, Entry)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let legacy = trimmed.starts_with('(');
        let body = trimmed.trim_start_matches('(').trim_end_matches(')');
        let fields: Vec<&str> = body.split(',').map(str::trim).collect();
        if fields.first().is_some_and(|f| f.eq_ignore_ascii_case("tick")) {
            continue;
        }
        let tick: Tick = fields[0].parse().map_err(|_| ScheduleError::Parse {
            line,
            message: format!("bad tick `{}`", fields[0]),
        })?;

        let entry = match fields.len() {
            5 if !legacy => parse_native(&fields, line, registry)?,
            4 => parse_legacy(&fields, line, &ids, registry)?,
            n => {
                return Err(ScheduleError::Parse {
                    line,
                    message: format!("expected 5 fields (or a 4-field tuple), found {n}"),
                })
            }
        };
        if let Entry::Start(spec) = &entry {
            check_param(spec, line, registry)?;
        }
        entries.push((tick, line, match entry {
            Entry::Start(mut s) => {
                s.start_tick = tick;
                Entry::Start(s)
            }
            other => other,
        }));
    }

    entries.sort_by_key(|(tick, _, _)| *tick);
    let mut schedule: Vec<FaultSpec> = Vec::new();
    for (tick, line, entry) in entries {
        match entry {
            Entry::Start(spec) => schedule.push(spec),
            Entry::Remove(device) => {
                let open = schedule
                    .iter_mut()
                    .rev()
                    .find(|s| s.device == device && s.end_tick.is_none() && s.start_tick < tick)
                    .ok_or(ScheduleError::DanglingRemoval { line, device })?;
                open.end_tick = Some(tick);
            }
        }
    }
    Ok(schedule)
}

fn parse_device(token: &str, line: usize, registry: &Registry) -> Result<DeviceId, ScheduleError> {
    let id: u32 = token.parse().map_err(|_| ScheduleError::Parse {
        line,
        message: format!("bad device id `{token}`"),
    })?;
    let id = DeviceId(id);
    if registry.spec(id).is_none() {
        return Err(ScheduleError::UnknownDevice {
            line,
            device: token.to_string(),
        });
    }
    Ok(id)
}

fn parse_value(token: &str, line: usize) -> Result<Value, ScheduleError> {
    token.parse::<f64>().map(Value).map_err(|_| ScheduleError::Parse {
        line,
        message: format!("bad value `{token}`"),
    })
}

fn parse_native(fields: &[&str], line: usize, registry: &Registry) -> Result<Entry, ScheduleError> {
    let device = parse_device(fields[1], line, registry)?;
    if fields[2].eq_ignore_ascii_case("NO_FAULT") {
        return Ok(Entry::Remove(device));
    }
    let kind: FaultKind = fields[2]
        .parse()
        .map_err(|message| ScheduleError::Parse { line, message })?;
    let fixability: Fixability = fields[3]
        .parse()
        .map_err(|message| ScheduleError::Parse { line, message })?;
    Ok(Entry::Start(FaultSpec {
        start_tick: 0,
        device,
        kind,
        fixability,
        param: parse_value(fields[4], line)?,
        end_tick: None,
    }))
}

fn parse_legacy(
    fields: &[&str],
    line: usize,
    ids: &[DeviceId],
    registry: &Registry,
) -> Result<Entry, ScheduleError> {
    let index: usize = fields[1].parse().map_err(|_| ScheduleError::Parse {
        line,
        message: format!("bad device index `{}`", fields[1]),
    })?;
    let device = *ids.get(index).ok_or_else(|| ScheduleError::UnknownDevice {
        line,
        device: fields[1].to_string(),
    })?;
    if fields[2].eq_ignore_ascii_case("NO_FAULT") {
        return Ok(Entry::Remove(device));
    }
    let fixability: Fixability = fields[2]
        .parse()
        .map_err(|message| ScheduleError::Parse { line, message })?;
    debug_assert!(registry.spec(device).is_some());
    Ok(Entry::Start(FaultSpec {
        start_tick: 0,
        device,
        kind: FaultKind::StuckAt,
        fixability,
        param: parse_value(fields[3], line)?,
        end_tick: None,
    }))
}

fn check_param(spec: &FaultSpec, line: usize, registry: &Registry) -> Result<(), ScheduleError> {
    if matches!(spec.kind, FaultKind::StuckAt | FaultKind::Outlier) {
        let domain = &registry.spec(spec.device).expect("device validated").value_domain;
        if !domain.contains(spec.param) {
            return Err(ScheduleError::ParamOutOfDomain {
                line,
                device: spec.device,
                value: spec.param,
            });
        }
    }
    Ok(())
}

/// Renders a schedule in the native five-field format.
pub fn render_fault_schedule(schedule: &[FaultSpec]) -> String {
    let mut rows: Vec<(Tick, u8, String)> = Vec::new();
    for spec in schedule {
        rows.push((
            spec.start_tick,
            1,
            format!(
                "{},{},{},{},{}",
                spec.start_tick,
                spec.device,
                spec.kind.token(),
                spec.fixability.token(),
                spec.param
            ),
        ));
        if let Some(end) = spec.end_tick {
            rows.push((end, 0, format!("{end},{},NO_FAULT,-,0", spec.device)));
        }
    }
    rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut out = String::from("tick,device_id,kind,fixability,value\n");
    for (_, _, row) in rows {
        let _ = writeln!(out, "{row}");
    }
    out
}

pub fn write_fault_schedule(path: impl AsRef<Path>, schedule: &[FaultSpec]) -> std::io::Result<()> {
    fs::write(path, render_fault_schedule(schedule))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::default_home;

    #[test]
    fn native_line_parses() {
        let reg = default_home();
        let s = parse_fault_schedule_str("1000,1,STUCK_AT,UNFIXABLE,0\n", &reg).unwrap();
        assert_eq!(
            s,
            vec![FaultSpec {
                start_tick: 1000,
                device: DeviceId(1),
                kind: FaultKind::StuckAt,
                fixability: Fixability::Unfixable,
                param: Value(0.0),
                end_tick: None,
            }]
        );
    }

    #[test]
    fn no_fault_closes_open_fault() {
        let reg = default_home();
        let s = parse_fault_schedule_str(
            "tick,device_id,kind,fixability,value\n1000,1,STUCK_AT,UNFIXABLE,0\n2000,1,NO_FAULT,-,0\n",
            &reg,
        )
        .unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].end_tick, Some(2000));
    }

    #[test]
    fn empty_file_is_empty_schedule() {
        let reg = default_home();
        assert!(parse_fault_schedule_str("", &reg).unwrap().is_empty());
    }

    #[test]
    fn legacy_tuples_use_zero_based_index() {
        let reg = default_home();
        let s = parse_fault_schedule_str("(1000, 0, UNFIXABLE, 1)\n(2000, 0, NO_FAULT, 0)\n", &reg)
            .unwrap();
        assert_eq!(s[0].device, DeviceId(1));
        assert_eq!(s[0].kind, FaultKind::StuckAt);
        assert_eq!(s[0].param, Value::ON);
        assert_eq!(s[0].end_tick, Some(2000));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let reg = default_home();
        match parse_fault_schedule_str("1000,1,STUCK_AT,UNFIXABLE,0\nabc,1,POWER,UNFIXABLE,0\n", &reg) {
            Err(ScheduleError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_fault_schedule_str("10,99,POWER,UNFIXABLE,0\n", &reg),
            Err(ScheduleError::UnknownDevice { line: 1, .. })
        ));
        assert!(matches!(
            parse_fault_schedule_str("10,1,NO_FAULT,-,0\n", &reg),
            Err(ScheduleError::DanglingRemoval { line: 1, .. })
        ));
        assert!(matches!(
            parse_fault_schedule_str("10,1,STUCK_AT,UNFIXABLE,5\n", &reg),
            Err(ScheduleError::ParamOutOfDomain { .. })
        ));
    }

    #[test]
    fn output_sorted_by_start() {
        let reg = default_home();
        let s = parse_fault_schedule_str(
            "500,2,POWER,UNFIXABLE,0\n100,3,SPIKE,SOFT_FIXABLE,15\n",
            &reg,
        )
        .unwrap();
        assert_eq!(s[0].start_tick, 100);
        assert_eq!(s[1].start_tick, 500);
    }

    #[test]
    fn render_then_parse_round_trips() {
        let reg = default_home();
        let text = "1000,1,STUCK_AT,UNFIXABLE,0\n2000,1,NO_FAULT,-,0\n2000,1,POWER,UNFIXABLE,0\n2500,3,SPIKE,HARD_FIXABLE,12.5\n";
        let s = parse_fault_schedule_str(text, &reg).unwrap();
        let back = parse_fault_schedule_str(&render_fault_schedule(&s), &reg).unwrap();
        assert_eq!(s, back);
    }
}
