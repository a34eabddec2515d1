use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::NotifyTrigger;
use crate::faults::FaultKind;
use crate::value::{DeviceId, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Notification {
    pub tick: Tick,
    pub device: DeviceId,
    pub fault_kind: Option<FaultKind>,
    pub outcome: NotifyTrigger,
}

impl Notification {
    pub fn line(&self) -> String {
        let kind = self.fault_kind.map_or("UNKNOWN", FaultKind::token);
        format!("{},{},{},{}", self.tick, self.device.0, kind, self.outcome)
    }
}

/// The notification sink.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NotificationLog {
    pub records: Vec<Notification>,
    /// Echo each record to stdout.
    pub console: bool,
}

impl NotificationLog {
    pub fn render(&self) -> String {
        let mut out = String::from("tick,device,fault_kind,outcome\n");
        for r in &self.records {
            let _ = writeln!(out, "{}", r.line());
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::write(path, self.render())
    }
}

/// Records `record` if its outcome is among the device's triggers.
pub fn notify_user(log: &mut NotificationLog, triggers: &BTreeSet<NotifyTrigger>, record: Notification) -> bool {
    if !triggers.contains(&record.outcome) {
        return false;
    }
    if log.console {
        println!("notify: {}", record.line());
    }
    log.records.push(record);
    true
}
