use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::cost::CostModel;
use crate::apps::AppSpec;
use crate::config::{ConfigFile, Scheme, Step};
use crate::device::{DeviceSpec, Registry};
use crate::faults::{FaultKind, Fixability};

/// Mean and spread of one function's execution time.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionLatency {
    pub function: String,
    pub mean_ms: f64,
    pub stddev_ms: f64,
    pub samples: usize,
}

impl FunctionLatency {
    fn from_samples(function: &str, samples: &[f64]) -> Self {
        let n = samples.len().max(1) as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            function: function.to_string(),
            mean_ms: mean,
            stddev_ms: var.sqrt(),
            samples: samples.len(),
        }
    }

    /// Coefficient of variation.
    pub fn cv(&self) -> f64 {
        if self.mean_ms == 0.0 {
            0.0
        } else {
            self.stddev_ms / self.mean_ms
        }
    }
}

/// Mean time for a scheme to finish with one kind of fault.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeHandleTime {
    pub scheme: String,
    pub kind: FaultKind,
    pub mean_ms: f64,
    /// Part of `mean_ms` spent rolling back.
    pub rollback_ms: f64,
    /// Share of cases that end repaired.
    pub repaired_fraction: f64,
}

impl SchemeHandleTime {
    pub fn repairable(&self) -> bool {
        self.repaired_fraction > 0.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LatencyTables {
    pub functions: Vec<FunctionLatency>,
    pub schemes: Vec<SchemeHandleTime>,
}

impl LatencyTables {
    pub fn function(&self, name: &str) -> Option<&FunctionLatency> {
        self.functions.iter().find(|f| f.function == name)
    }

    /// Long-format CSV: `table,key,fault_kind,metric,value`.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("table,key,fault_kind,metric,value\n");
        for f in &self.functions {
            let _ = writeln!(out, "function,{},-,mean_ms,{:.6}", f.function, f.mean_ms);
            let _ = writeln!(out, "function,{},-,stddev_ms,{:.6}", f.function, f.stddev_ms);
        }
        for s in &self.schemes {
            let _ = writeln!(out, "scheme,{},{},handle_ms,{:.6}", s.scheme, s.kind, s.mean_ms);
            let _ = writeln!(out, "scheme,{},{},rollback_ms,{:.6}", s.scheme, s.kind, s.rollback_ms);
            let _ = writeln!(out, "scheme,{},{},repairable,{}", s.scheme, s.kind, s.repairable());
        }
        out
    }
}

struct Model<'a> {
    cost: &'a CostModel,
    registry: &'a Registry,
    apps: &'a [AppSpec],
    config: &'a ConfigFile,
}

impl Model<'_> {
    fn cpu(&self, ops: usize) -> f64 {
        ops as f64 * self.cost.cpu_op_ms
    }

    fn bound_ms(&self) -> f64 {
        self.config.general.identification_upper_bound.max(1) as f64 * 1_000.0
    }

    fn physical(&self) -> impl Iterator<Item = &DeviceSpec> {
        self.registry.specs().filter(|s| !s.is_virtual)
    }

    fn replicate(&self, spec: &DeviceSpec) -> f64 {
        self.cpu(10 + 5 * self.config.device(spec.id).replicas.len())
    }

    /// Delay of `retry_max` seconds. Fail-stop faults are probed each tick;
    /// others wait out the identification bound after lifting suppression.
    fn retry(&self, spec: &DeviceSpec, kind: FaultKind) -> f64 {
        let ticks = self.config.device(spec.id).retry_max as f64;
        if kind.is_fail_stop() {
            ticks * 1_000.0 + ticks * self.cost.device_command_ms
        } else {
            ticks * 1_000.0 + self.bound_ms() + self.cpu(5 * ticks as usize)
        }
    }

    fn restart(&self, spec: &DeviceSpec, kind: FaultKind, hard: bool) -> f64 {
        let supported = if hard {
            spec.supports_hard_restart
        } else {
            spec.supports_soft_restart
        };
        if !supported {
            return self.cpu(5);
        }
        let attempts = self.config.device(spec.id).restart_attempts as f64;
        if !kind.acknowledges_restart() {
            // One tick per unacknowledged attempt.
            return attempts * (self.cost.device_command_ms + 1_000.0);
        }
        let reboot = if hard { spec.hard_restart_ms } else { spec.soft_restart_ms };
        let confirm = if kind.is_fail_stop() { 0.0 } else { self.bound_ms() };
        self.cost.device_command_ms + reboot + confirm
    }

    /// Actuators the apps drive in reaction to `spec`.
    fn reactions(&self, spec: &DeviceSpec) -> usize {
        let targets: BTreeSet<_> = self
            .apps
            .iter()
            .filter(|a| a.subscribes(spec.id))
            .flat_map(|a| a.rules.iter().flat_map(|r| r.actions.iter().map(|x| x.device)))
            .collect();
        targets.len()
    }

    /// A scan of the log plus one command per actuator to move.
    fn rollback(&self, spec: &DeviceSpec) -> f64 {
        let sensors = self.registry.sensor_ids().count();
        let entries = 100;
        self.cpu(entries * sensors) + self.reactions(spec) as f64 * self.cost.device_command_ms
    }

    fn checkpoint(&self) -> f64 {
        self.cpu(4 * self.physical().count() + 2 * self.registry.sensor_ids().count())
    }

    fn notify(&self, records: usize) -> f64 {
        records as f64 * (self.cpu(50) + self.cost.device_command_ms)
    }

    fn suppress(&self, spec: &DeviceSpec) -> f64 {
        self.cpu(5 + self.apps.iter().filter(|a| a.subscribes(spec.id)).count())
    }

    fn transaction(&self, len: usize) -> f64 {
        self.cpu(3 * len) + 2.0 * len as f64 * self.cost.device_command_ms
    }

    fn walk(&self, scheme: &Scheme, spec: &DeviceSpec, kind: FaultKind, fix: Fixability) -> (f64, f64, bool) {
        let mut t = 0.0;
        let mut rb = 0.0;
        for step in &scheme.steps {
            match step {
                Step::Replicate => {
                    t += self.replicate(spec);
                    if !self.config.device(spec.id).replicas.is_empty() {
                        return (t, rb, true);
                    }
                }
                Step::Retry => t += self.retry(spec, kind),
                Step::SoftRestart | Step::HardRestart => {
                    let hard = *step == Step::HardRestart;
                    t += self.restart(spec, kind, hard);
                    let fixes = if hard { Fixability::HardFixable } else { Fixability::SoftFixable };
                    if fix == fixes && kind.acknowledges_restart() {
                        return (t, rb, true);
                    }
                }
                Step::Rollback => {
                    let r = self.rollback(spec);
                    t += r;
                    rb += r;
                }
                Step::Notify => {
                    t += self.notify(1);
                    return (t, rb, false);
                }
            }
        }
        (t, rb, false)
    }
}

/// Analytic latency tables.
///
/// Each function's operation sequence is costed for every physical device,
/// every applicable parameter and every fault kind; the per-scheme tables
/// walk each built-in scheme (plus `schemes`) for every fault kind, devices
/// and fixabilities weighted equally. Power and communication faults are
/// always unfixable.
pub fn compute_latencies(
    cost: &CostModel,
    registry: &Registry,
    apps: &[AppSpec],
    config: &ConfigFile,
    schemes: &[Scheme],
) -> LatencyTables {
    let m = Model {
        cost,
        registry,
        apps,
        config,
    };
    let devices: Vec<&DeviceSpec> = m.physical().collect();
    let mut tables = LatencyTables::default();
    let mut push = |name: &str, samples: Vec<f64>| tables.functions.push(FunctionLatency::from_samples(name, &samples));

    push(
        "replicate",
        devices
            .iter()
            .filter(|d| !config.device(d.id).replicas.is_empty())
            .map(|d| m.replicate(d))
            .collect(),
    );
    let per_kind = |f: &dyn Fn(&DeviceSpec, FaultKind) -> f64| -> Vec<f64> {
        devices
            .iter()
            .flat_map(|d| FaultKind::ALL.iter().map(move |k| (*d, *k)))
            .map(|(d, k)| f(d, k))
            .collect()
    };
    push("retry", per_kind(&|d, k| m.retry(d, k)));
    push("soft_restart", per_kind(&|d, k| m.restart(d, k, false)));
    push("hard_restart", per_kind(&|d, k| m.restart(d, k, true)));
    push("rollback", devices.iter().map(|d| m.rollback(d)).collect());
    push(
        "checkpoint",
        devices.iter().filter(|d| d.is_actuator()).map(|_| m.checkpoint()).collect(),
    );
    // One record per enabled trigger, for each non-empty trigger set.
    push("notify", (1..8usize).map(|mask| m.notify(mask.count_ones() as usize)).collect());
    push("suppress", devices.iter().map(|d| m.suppress(d)).collect());
    push("transaction", (1..=4).map(|n| m.transaction(n)).collect());

    let mut all_schemes = Scheme::builtins();
    all_schemes.extend(schemes.iter().filter(|s| !Scheme::BUILTIN_NAMES.contains(&s.name.as_str())).cloned());
    for scheme in &all_schemes {
        for kind in FaultKind::ALL {
            let fixes: &[Fixability] = if kind.acknowledges_restart() {
                &[Fixability::SoftFixable, Fixability::HardFixable]
            } else {
                &[Fixability::Unfixable]
            };
            let mut n = 0.0;
            let (mut total, mut rb, mut repaired) = (0.0, 0.0, 0.0);
            for d in &devices {
                for fix in fixes {
                    let (t, r, ok) = m.walk(scheme, d, kind, *fix);
                    total += t;
                    rb += r;
                    // A replica masks the fault rather than fixing the device.
                    if ok && kind.acknowledges_restart() {
                        repaired += 1.0;
                    }
                    n += 1.0;
                }
            }
            tables.schemes.push(SchemeHandleTime {
                scheme: scheme.name.clone(),
                kind,
                mean_ms: total / n,
                rollback_ms: rb / n,
                repaired_fraction: repaired / n,
            });
        }
    }
    tables
}
