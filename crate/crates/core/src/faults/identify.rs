use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FaultKind, FaultTable};
use crate::value::{DeviceId, Tick};

/// Signal that a device is faulty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultReport {
    pub device: DeviceId,
    /// Identifiers that cannot classify the fault leave this empty.
    pub kind: Option<FaultKind>,
    pub detected_tick: Tick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Ticks between fault onset and its report.
    pub delay: Tick,
    pub report_kind: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            delay: 0,
            report_kind: true,
        }
    }
}

/// Anything that turns device behaviour into fault reports.
///
/// The simulation calls [`observe`](FaultIdentifier::observe) once per tick
/// after faults are applied. Handling code asks
/// [`fault_free`](FaultIdentifier::fault_free) to validate checkpoints and to
/// decide whether a repair held.
pub trait FaultIdentifier {
    fn observe(&mut self, tick: Tick, faults: &FaultTable) -> Vec<FaultReport>;

    /// True if no fault was present on `device` (any device when `None`)
    /// at any tick in `from..=to`.
    fn fault_free(&self, device: Option<DeviceId>, from: Tick, to: Tick) -> bool;

    /// Upper bound on the delay between onset and report.
    fn delay(&self) -> Tick;

    fn is_faulty(&self, device: DeviceId, tick: Tick) -> bool {
        !self.fault_free(Some(device), tick, tick)
    }
}

/// Stateless perfect identification: one report per fault, `delay` ticks
/// after it started, while it is still active. Reports come in device order.
pub fn oracle_identify(faults: &FaultTable, tick: Tick, config: &OracleConfig) -> Vec<FaultReport> {
    faults
        .iter()
        .filter(|(_, f)| f.spec.start_tick + config.delay == tick)
        .map(|(device, f)| FaultReport {
            device: *device,
            kind: config.report_kind.then_some(f.spec.kind),
            detected_tick: tick,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
struct Interval {
    device: DeviceId,
    start: Tick,
    /// Exclusive.
    end: Option<Tick>,
}

/// The reference identifier. Knows the fault table exactly and keeps the
/// history of when each device was faulty.
#[derive(Debug, Clone, Default)]
pub struct PerfectOracle {
    config: OracleConfig,
    /// Identity of the fault being tracked per device, with its interval slot
    /// and whether it has been reported.
    open: BTreeMap<DeviceId, ((usize, Tick), usize, bool)>,
    intervals: Vec<Interval>,
}

impl PerfectOracle {
    pub fn new(config: OracleConfig) -> Self {
        Self {
            config,
            ..Self::default()
        }
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    /// Number of distinct faults seen so far.
    pub fn faults_seen(&self) -> usize {
        self.intervals.len()
    }
}

impl FaultIdentifier for PerfectOracle {
    fn observe(&mut self, tick: Tick, faults: &FaultTable) -> Vec<FaultReport> {
        let intervals = &mut self.intervals;
        self.open.retain(|device, (identity, slot, _)| {
            let same = faults
                .get(*device)
                .is_some_and(|f| (f.index, f.spec.start_tick) == *identity);
            if !same {
                intervals[*slot].end = Some(tick);
            }
            same
        });
        for (device, f) in faults.iter() {
            self.open.entry(*device).or_insert_with(|| {
                intervals.push(Interval {
                    device: *device,
                    start: tick,
                    end: None,
                });
                ((f.index, f.spec.start_tick), intervals.len() - 1, false)
            });
        }
        let mut reports = Vec::new();
        for (device, (_, slot, reported)) in self.open.iter_mut() {
            if !*reported && intervals[*slot].start + self.config.delay <= tick {
                *reported = true;
                reports.push(FaultReport {
                    device: *device,
                    kind: self
                        .config
                        .report_kind
                        .then(|| faults.get(*device).map(|f| f.spec.kind))
                        .flatten(),
                    detected_tick: tick,
                });
            }
        }
        reports
    }

    fn fault_free(&self, device: Option<DeviceId>, from: Tick, to: Tick) -> bool {
        !self.intervals.iter().any(|iv| {
            device.is_none_or(|d| d == iv.device)
                && iv.start <= to
                && iv.end.is_none_or(|e| e > from)
        })
    }

    fn delay(&self) -> Tick {
        self.config.delay
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faults::{apply_faults, FaultSpec, Fixability};
    use crate::value::Value;

    fn spec(start: Tick, device: u32, end: Option<Tick>) -> FaultSpec {
        FaultSpec {
            start_tick: start,
            device: DeviceId(device),
            kind: FaultKind::Power,
            fixability: Fixability::Unfixable,
            param: Value::OFF,
            end_tick: end,
        }
    }

    fn replay(schedule: &[FaultSpec], delay: Tick, ticks: Tick) -> (PerfectOracle, Vec<FaultReport>) {
        let mut oracle = PerfectOracle::new(OracleConfig {
            delay,
            ..OracleConfig::default()
        });
        let mut table = FaultTable::new();
        let mut out = Vec::new();
        for t in 0..ticks {
            apply_faults(schedule, t, &mut table);
            out.extend(oracle.observe(t, &table));
        }
        (oracle, out)
    }

    #[test]
    fn instant_report() {
        let (_, reports) = replay(&[spec(1000, 1, None)], 0, 1100);
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].detected_tick, 1000);
        assert_eq!(reports[0].kind, Some(FaultKind::Power));
    }

    #[test]
    fn delayed_report() {
        let (_, reports) = replay(&[spec(1000, 1, None)], 5, 1100);
        assert_eq!(reports[0].detected_tick, 1005);
    }

    #[test]
    fn simultaneous_faults_in_device_order() {
        let (_, reports) = replay(&[spec(10, 3, None), spec(10, 1, None)], 0, 20);
        let devices: Vec<_> = reports.iter().map(|r| r.device).collect();
        assert_eq!(devices, vec![DeviceId(1), DeviceId(3)]);
    }

    #[test]
    fn stateless_oracle_matches() {
        let mut table = FaultTable::new();
        apply_faults(&[spec(7, 2, None)], 7, &mut table);
        let r = oracle_identify(&table, 7, &OracleConfig::default());
        assert_eq!(r.len(), 1);
        assert!(oracle_identify(&table, 8, &OracleConfig::default()).is_empty());
    }

    #[test]
    fn fault_free_windows() {
        let (oracle, _) = replay(&[spec(10, 1, Some(20))], 0, 30);
        assert!(oracle.fault_free(None, 0, 9));
        assert!(!oracle.fault_free(None, 5, 10));
        assert!(!oracle.fault_free(Some(DeviceId(1)), 19, 25));
        assert!(oracle.fault_free(Some(DeviceId(1)), 20, 29));
        assert!(oracle.fault_free(Some(DeviceId(2)), 0, 29));
        assert!(oracle.is_faulty(DeviceId(1), 15));
    }
}
