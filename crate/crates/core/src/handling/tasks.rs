use std::fmt;
use std::sync::Arc;

use super::HandlingContext;
use crate::device::Health;
use crate::value::{DeviceId, Tick, Value};

/// Consecutive matching polls needed before a retry counts as resolved.
pub const CONSECUTIVE_MATCHES: u32 = 3;

/// Returns true once the fault on the device has cleared.
pub type VerifyFn = Arc<dyn Fn(&HandlingContext, DeviceId) -> bool + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetryOutcome {
    Resolved,
    TimedOut,
    StillFaulty,
}

#[derive(Clone, Default)]
pub struct RetryArgs {
    pub verify: Option<VerifyFn>,
    pub expected: Option<Vec<Value>>,
    pub is_failstop: Option<bool>,
}

impl fmt::Debug for RetryArgs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RetryArgs")
            .field("verify", &self.verify.is_some())
            .field("expected", &self.expected)
            .field("is_failstop", &self.is_failstop)
            .finish()
    }
}

/// Lift suppression, then watch for a fresh fault over the identification
/// bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Confirm {
    from: Tick,
    until: Tick,
}

impl Confirm {
    fn start(ctx: &mut HandlingContext, device: DeviceId) -> Self {
        ctx.lift(device);
        Confirm {
            from: ctx.tick + 1,
            until: ctx.tick + ctx.bound.max(1),
        }
    }

    /// `Some(true)` when the window passed clean, `Some(false)` (with
    /// suppression back in place) on a fault.
    fn step(&self, ctx: &mut HandlingContext, device: DeviceId) -> Option<bool> {
        if ctx.tick < self.from {
            return None;
        }
        if !ctx.identifier.fault_free(Some(device), self.from, ctx.tick) {
            ctx.reimpose(device);
            return Some(false);
        }
        (ctx.tick >= self.until).then_some(true)
    }
}

/// Waits out a suspected transient fault.
///
/// With no arguments this is a plain delay of `retry_max` ticks. A verify
/// function is consulted every tick; expected values must be seen
/// [`CONSECUTIVE_MATCHES`] polls in a row; `is_failstop` makes any answer
/// count as expected. For a non-fail-stop fault that outlives the delay,
/// suppression is lifted and the retry resolves if no fault is seen within
/// the identification bound.
#[derive(Debug, Clone)]
pub struct RetryTask {
    device: DeviceId,
    args: RetryArgs,
    retry_max: Tick,
    started: Option<Tick>,
    streak: u32,
    confirm: Option<Confirm>,
}

impl RetryTask {
    pub fn new(device: DeviceId, args: RetryArgs, retry_max: Tick) -> Self {
        Self {
            device,
            args,
            retry_max,
            started: None,
            streak: 0,
            confirm: None,
        }
    }

    fn matches_expected(&self, ctx: &HandlingContext) -> Option<bool> {
        let failstop = self.args.is_failstop == Some(true);
        if self.args.expected.is_none() && !failstop {
            return None;
        }
        let state = ctx.registry.probe(self.device, ctx.tick).ok()?;
        if state.health == Health::Unresponsive {
            return Some(false);
        }
        Some(
            failstop
                || self
                    .args
                    .expected
                    .as_ref()
                    .is_some_and(|vals| vals.iter().any(|v| *v == state.value)),
        )
    }

    /// Advances one tick. Returns the outcome once the retry is over.
    pub fn step(&mut self, ctx: &mut HandlingContext) -> Option<RetryOutcome> {
        if let Some(c) = self.confirm {
            return c.step(ctx, self.device).map(|ok| {
                if ok {
                    RetryOutcome::Resolved
                } else {
                    RetryOutcome::StillFaulty
                }
            });
        }
        let started = *self.started.get_or_insert(ctx.tick);
        if let Some(verify) = &self.args.verify {
            if verify(ctx, self.device) {
                return Some(RetryOutcome::Resolved);
            }
        }
        match self.matches_expected(ctx) {
            Some(true) => {
                self.streak += 1;
                if self.streak >= CONSECUTIVE_MATCHES {
                    return Some(RetryOutcome::Resolved);
                }
            }
            Some(false) => self.streak = 0,
            None => {}
        }
        if ctx.tick < started + self.retry_max {
            return None;
        }
        if self.args.is_failstop == Some(true) {
            return Some(RetryOutcome::TimedOut);
        }
        self.confirm = Some(Confirm::start(ctx, self.device));
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RestartPhase {
    Sending { sent: u32 },
    Rebooting { until: Tick },
    Confirming(Confirm),
}

/// A software or hardware restart with acknowledgment and retransmission.
#[derive(Debug, Clone)]
pub struct RestartTask {
    device: DeviceId,
    hard: bool,
    attempts: u32,
    failstop: bool,
    phase: RestartPhase,
}

impl RestartTask {
    /// `failstop` says whether the fault being handled is fail-stop.
    pub fn new(device: DeviceId, hard: bool, attempts: u32, failstop: bool) -> Self {
        Self {
            device,
            hard,
            attempts,
            failstop,
            phase: RestartPhase::Sending { sent: 0 },
        }
    }

    pub fn commands_sent(&self) -> u32 {
        match self.phase {
            RestartPhase::Sending { sent } => sent,
            _ => 0,
        }
    }

    /// Advances one tick. Returns whether the restart repaired the device
    /// once it is over.
    pub fn step(&mut self, ctx: &mut HandlingContext) -> Option<bool> {
        match self.phase {
            RestartPhase::Sending { sent } => {
                let Some(spec) = ctx.registry.spec(self.device) else {
                    return Some(false);
                };
                let supported = if self.hard {
                    spec.supports_hard_restart
                } else {
                    spec.supports_soft_restart
                };
                let duration = spec.restart_ticks(self.hard);
                if !supported || sent >= self.attempts {
                    return Some(false);
                }
                let acked = ctx.registry.send_restart(self.device, self.hard).unwrap_or(false);
                self.phase = if acked {
                    RestartPhase::Rebooting {
                        until: ctx.tick + duration,
                    }
                } else {
                    RestartPhase::Sending { sent: sent + 1 }
                };
                if !acked && sent + 1 >= self.attempts {
                    return Some(false);
                }
                None
            }
            RestartPhase::Rebooting { until } => {
                if ctx.tick < until {
                    return None;
                }
                let cleared = ctx.registry.complete_restart(self.device, self.hard);
                if self.failstop {
                    return Some(cleared);
                }
                self.phase = RestartPhase::Confirming(Confirm::start(ctx, self.device));
                None
            }
            RestartPhase::Confirming(c) => c.step(ctx, self.device),
        }
    }
}
