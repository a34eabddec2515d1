//! The automated fault handler.
//!
//! A fault report opens a session for the device. The session suppresses the
//! device, then runs the configured scheme one function at a time until a
//! function repairs the device or the scheme runs out.

mod redundancy;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::checkpoint::{rollback, CheckpointLog, RollbackStrategy};
use crate::config::{ConfigFile, NotifyTrigger, Scheme, Step};
use crate::faults::{FaultKind, FaultReport};
use crate::handling::{
    activate_redundant_device, notify_user, HandlingContext, Notification, NotificationLog, RestartTask, RetryArgs,
    RetryOutcome, RetryTask,
};
use crate::value::{DeviceId, Tick, Value};

pub use redundancy::{apply_redundant_pairs, detect_redundant_devices, transition_rates};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionOutcome {
    InProgress,
    Repaired,
    Unrepaired,
}

/// How one scheme step ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepResult {
    Repaired,
    /// Rollback corrected the environment; the device is still faulty.
    Mitigated,
    Failed,
    Skipped,
    Notified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutedStep {
    pub step: Step,
    pub result: StepResult,
    pub started: Tick,
    pub finished: Tick,
}

#[derive(Debug, Clone)]
enum Running {
    Retry(RetryTask),
    Restart(RestartTask),
}

#[derive(Debug, Clone)]
pub struct HandlerSession {
    pub device: DeviceId,
    pub report: FaultReport,
    pub scheme: Scheme,
    pub step_index: usize,
    pub started_tick: Tick,
    pub finished_tick: Option<Tick>,
    pub outcome: SessionOutcome,
    pub executed: Vec<ExecutedStep>,
    running: Option<(Running, Tick)>,
}

impl HandlerSession {
    pub fn steps(&self) -> Vec<Step> {
        self.executed.iter().map(|e| e.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HandlerError {
    #[error("device {0} already has an open handling session")]
    DuplicateSession(DeviceId),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HandlerStats {
    pub sessions: u64,
    pub repaired: u64,
    pub unrepaired: u64,
    /// Reports folded into an already open session.
    pub coalesced: u64,
    pub rollbacks: u64,
    pub rollbacks_succeeded: u64,
    pub rollback_actuations: u64,
}

/// What the hub must learn from one handler tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HandlerEffects {
    /// Values written behind the hub's back (rollback actuations and sensor
    /// overrides). The hub adopts them without raising events.
    pub view_updates: Vec<(DeviceId, Value)>,
    /// Devices returned to normal service.
    pub released: Vec<DeviceId>,
}

/// Clears every trace of handling on `device`.
fn release(ctx: &mut HandlingContext, device: DeviceId, effects: &mut HandlerEffects) {
    ctx.lift(device);
    ctx.registry.clear_redirect(device);
    ctx.registry.clear_override(device);
    effects.released.push(device);
}

#[derive(Debug, Clone)]
pub struct AutoHandler {
    pub config: ConfigFile,
    pub checkpoints: CheckpointLog,
    pub notifications: NotificationLog,
    pub stats: HandlerStats,
    sessions: BTreeMap<DeviceId, HandlerSession>,
    finished: Vec<HandlerSession>,
    /// Devices still suppressed or redirected after their session ended,
    /// waiting for the fault to go away.
    watch: BTreeSet<DeviceId>,
}

impl AutoHandler {
    pub fn new(config: ConfigFile, checkpoints: CheckpointLog) -> Self {
        Self {
            config,
            checkpoints,
            notifications: NotificationLog::default(),
            stats: HandlerStats::default(),
            sessions: BTreeMap::new(),
            finished: Vec::new(),
            watch: BTreeSet::new(),
        }
    }

    pub fn bound(&self) -> Tick {
        self.config.general.identification_upper_bound
    }

    pub fn session(&self, device: DeviceId) -> Option<&HandlerSession> {
        self.sessions.get(&device)
    }

    pub fn open_sessions(&self) -> impl Iterator<Item = &HandlerSession> {
        self.sessions.values()
    }

    pub fn finished(&self) -> &[HandlerSession] {
        &self.finished
    }

    fn notify(&mut self, device: DeviceId, kind: Option<FaultKind>, outcome: NotifyTrigger, tick: Tick) {
        let triggers = &self.config.device(device).notify_triggers;
        notify_user(
            &mut self.notifications,
            triggers,
            Notification {
                tick,
                device,
                fault_kind: kind,
                outcome,
            },
        );
    }

    /// Opens a session: suppresses the device and its opted-in apps.
    pub fn on_fault_detected(&mut self, report: FaultReport, ctx: &mut HandlingContext) -> Result<(), HandlerError> {
        let device = report.device;
        if self.sessions.contains_key(&device) {
            return Err(HandlerError::DuplicateSession(device));
        }
        self.watch.remove(&device);
        ctx.reimpose(device);
        self.stats.sessions += 1;
        self.notify(device, report.kind, NotifyTrigger::Occurred, ctx.tick);
        self.sessions.insert(
            device,
            HandlerSession {
                device,
                report,
                scheme: self.config.scheme_for(device),
                step_index: 0,
                started_tick: ctx.tick,
                finished_tick: None,
                outcome: SessionOutcome::InProgress,
                executed: Vec::new(),
                running: None,
            },
        );
        Ok(())
    }

    /// Starts sessions for new reports; reports for devices already under
    /// handling are coalesced. A device lifted to confirm a repair is
    /// suppressed again at once if its fault is still there.
    pub fn handle_reports(&mut self, reports: &[FaultReport], ctx: &mut HandlingContext) {
        for r in reports {
            if self.on_fault_detected(*r, ctx).is_err() {
                self.stats.coalesced += 1;
            }
        }
        for device in self.sessions.keys() {
            if !ctx.registry.is_suppressed(*device) && ctx.identifier.is_faulty(*device, ctx.tick) {
                ctx.reimpose(*device);
            }
        }
    }

    /// Advances every open session by one tick, then releases watched
    /// devices whose fault has gone.
    pub fn step(&mut self, ctx: &mut HandlingContext) -> HandlerEffects {
        let mut effects = HandlerEffects::default();
        let devices: Vec<DeviceId> = self.sessions.keys().copied().collect();
        for device in devices {
            let mut session = self.sessions.remove(&device).expect("listed");
            self.advance(&mut session, ctx, &mut effects);
            if session.outcome == SessionOutcome::InProgress {
                self.sessions.insert(device, session);
            } else {
                self.finish(session, ctx, &mut effects);
            }
        }
        let watched: Vec<DeviceId> = self.watch.iter().copied().collect();
        for device in watched {
            if !ctx.identifier.is_faulty(device, ctx.tick) && !ctx.registry.is_faulty(device) {
                self.watch.remove(&device);
                release(ctx, device, &mut effects);
            }
        }
        effects
    }

    fn finish(&mut self, mut session: HandlerSession, ctx: &mut HandlingContext, effects: &mut HandlerEffects) {
        let device = session.device;
        session.finished_tick = Some(ctx.tick);
        let kind = session.report.kind;
        match session.outcome {
            SessionOutcome::Repaired => {
                self.stats.repaired += 1;
                let replicated = session
                    .executed
                    .last()
                    .is_some_and(|e| e.step == Step::Replicate && e.result == StepResult::Repaired);
                if replicated {
                    // The replica serves until the device itself recovers.
                    ctx.lift(device);
                    ctx.registry.clear_override(device);
                    self.watch.insert(device);
                } else {
                    release(ctx, device, effects);
                }
                self.notify(device, kind, NotifyTrigger::Repaired, ctx.tick);
            }
            SessionOutcome::Unrepaired => {
                self.stats.unrepaired += 1;
                if !session.executed.iter().any(|e| e.result == StepResult::Notified) {
                    self.notify(device, kind, NotifyTrigger::Unrepaired, ctx.tick);
                }
                self.watch.insert(device);
            }
            SessionOutcome::InProgress => unreachable!(),
        }
        self.finished.push(session);
    }

    fn advance(&mut self, s: &mut HandlerSession, ctx: &mut HandlingContext, effects: &mut HandlerEffects) {
        let tick = ctx.tick;
        if s.running.is_none() {
            if !ctx.identifier.is_faulty(s.device, tick) && !ctx.registry.is_faulty(s.device) {
                s.outcome = SessionOutcome::Repaired;
                return;
            }
            let Some(step) = s.scheme.steps.get(s.step_index).copied() else {
                s.outcome = SessionOutcome::Unrepaired;
                return;
            };
            match self.start_step(step, s, ctx, effects) {
                Some(result) => self.complete(s, step, result, tick, tick),
                None => {}
            }
            return;
        }
        let (mut task, started) = s.running.take().expect("checked");
        let step = s.scheme.steps[s.step_index];
        let result = match &mut task {
            Running::Retry(t) => t.step(ctx).map(|o| match o {
                RetryOutcome::Resolved => StepResult::Repaired,
                RetryOutcome::TimedOut | RetryOutcome::StillFaulty => StepResult::Failed,
            }),
            Running::Restart(t) => t
                .step(ctx)
                .map(|ok| if ok { StepResult::Repaired } else { StepResult::Failed }),
        };
        match result {
            Some(r) => self.complete(s, step, r, started, tick),
            None => s.running = Some((task, started)),
        }
    }

    fn complete(&mut self, s: &mut HandlerSession, step: Step, result: StepResult, started: Tick, finished: Tick) {
        s.executed.push(ExecutedStep {
            step,
            result,
            started,
            finished,
        });
        s.step_index += 1;
        s.outcome = match result {
            StepResult::Repaired => SessionOutcome::Repaired,
            StepResult::Notified => SessionOutcome::Unrepaired,
            _ if s.step_index >= s.scheme.steps.len() => SessionOutcome::Unrepaired,
            _ => SessionOutcome::InProgress,
        };
    }

    /// Runs an instantaneous step to completion, or installs a multi-tick
    /// task and advances it once.
    fn start_step(
        &mut self,
        step: Step,
        s: &mut HandlerSession,
        ctx: &mut HandlingContext,
        effects: &mut HandlerEffects,
    ) -> Option<StepResult> {
        let device = s.device;
        let dc = self.config.device(device).clone();
        let failstop = s.report.kind.map(FaultKind::is_fail_stop);
        let mut task = match step {
            Step::Replicate => {
                return Some(if activate_redundant_device(device, &self.config, ctx) {
                    StepResult::Repaired
                } else {
                    StepResult::Failed
                });
            }
            Step::Rollback => return Some(self.rollback_step(device, dc.rollback_strategy, ctx, effects)),
            Step::Notify => {
                self.notify(device, s.report.kind, NotifyTrigger::Unrepaired, ctx.tick);
                return Some(StepResult::Notified);
            }
            Step::Retry => Running::Retry(RetryTask::new(
                device,
                RetryArgs {
                    is_failstop: failstop.filter(|f| *f),
                    ..RetryArgs::default()
                },
                dc.retry_max,
            )),
            Step::SoftRestart | Step::HardRestart => Running::Restart(RestartTask::new(
                device,
                step == Step::HardRestart,
                dc.restart_attempts,
                failstop.unwrap_or(false),
            )),
        };
        let result = match &mut task {
            Running::Retry(t) => t.step(ctx).map(|o| match o {
                RetryOutcome::Resolved => StepResult::Repaired,
                _ => StepResult::Failed,
            }),
            Running::Restart(t) => t
                .step(ctx)
                .map(|ok| if ok { StepResult::Repaired } else { StepResult::Failed }),
        };
        if result.is_none() {
            s.running = Some((task, ctx.tick));
        }
        result
    }

    fn rollback_step(
        &mut self,
        device: DeviceId,
        strategy: RollbackStrategy,
        ctx: &mut HandlingContext,
        effects: &mut HandlerEffects,
    ) -> StepResult {
        if strategy == RollbackStrategy::Disabled {
            return StepResult::Skipped;
        }
        self.stats.rollbacks += 1;
        let faulty: BTreeSet<DeviceId> = ctx
            .registry
            .ids()
            .filter(|d| ctx.identifier.is_faulty(*d, ctx.tick))
            .collect();
        let fail_safe: BTreeMap<DeviceId, Value> = self
            .config
            .devices
            .iter()
            .filter_map(|(d, c)| c.fail_safe_state.map(|v| (*d, v)))
            .collect();
        match rollback(device, &self.checkpoints, ctx.registry, strategy, &faulty, &fail_safe, ctx.tick) {
            Ok(out) => {
                self.stats.rollbacks_succeeded += 1;
                self.stats.rollback_actuations += out.actuated.len() as u64;
                for (d, _) in &out.actuated {
                    if let Some(v) = ctx.registry.live_value(*d) {
                        effects.view_updates.push((*d, v));
                    }
                }
                StepResult::Mitigated
            }
            Err(_) => StepResult::Failed,
        }
    }
}

/// Suppression without repair: a reported device is suppressed until its
/// fault goes away.
#[derive(Debug, Clone, Default)]
pub struct SuppressionHandler {
    suppressed: BTreeSet<DeviceId>,
}

impl SuppressionHandler {
    pub fn handle_reports(&mut self, reports: &[FaultReport], ctx: &mut HandlingContext) {
        for r in reports {
            ctx.reimpose(r.device);
            self.suppressed.insert(r.device);
        }
    }

    pub fn step(&mut self, ctx: &mut HandlingContext) -> HandlerEffects {
        let mut effects = HandlerEffects::default();
        let done: Vec<DeviceId> = self
            .suppressed
            .iter()
            .copied()
            .filter(|d| !ctx.identifier.is_faulty(*d, ctx.tick) && !ctx.registry.is_faulty(*d))
            .collect();
        for d in done {
            self.suppressed.remove(&d);
            release(ctx, d, &mut effects);
        }
        effects
    }
}
