//! Device-based fault-handling functions and the auxiliary developer API.
//!
//! Functions that take more than one tick (retry, restarts) are state
//! machines advanced once per tick by the caller; everything else completes
//! immediately.

mod admin;
mod notify;
mod tasks;
mod transaction;

use crate::apps::{AppSpec, AppSuppression};
use crate::config::ConfigFile;
use crate::device::{DeviceError, Registry};
use crate::faults::FaultIdentifier;
use crate::value::{DeviceId, Tick};

pub use admin::{
    add_device, remove_device, update_app_config, update_device_config, DeviceConfigUpdate, ValidationError,
};
pub use notify::{notify_user, Notification, NotificationLog};
pub use tasks::{RestartTask, RetryArgs, RetryOutcome, RetryTask, VerifyFn, CONSECUTIVE_MATCHES};
pub use transaction::{transaction, TransactionError, TransactionLog, TxStatus};

/// Everything a handling function may touch during one tick.
pub struct HandlingContext<'a> {
    pub registry: &'a mut Registry,
    pub apps: &'a [AppSpec],
    pub app_suppression: &'a mut AppSuppression,
    pub identifier: &'a dyn FaultIdentifier,
    /// Identification upper bound.
    pub bound: Tick,
    pub tick: Tick,
}

impl HandlingContext<'_> {
    /// Lifts device and app suppression for `device`.
    pub fn lift(&mut self, device: DeviceId) {
        let _ = self.registry.unsuppress(device);
        self.app_suppression.release_apps_for(device);
    }

    /// Puts device and app suppression for `device` back.
    pub fn reimpose(&mut self, device: DeviceId) {
        let _ = self.registry.suppress(device);
        self.app_suppression.suppress_apps_for(device, self.apps);
    }
}

pub fn suppress_device(registry: &mut Registry, device: DeviceId) -> Result<(), DeviceError> {
    registry.suppress(device)
}

pub fn unsuppress_device(registry: &mut Registry, device: DeviceId) -> Result<(), DeviceError> {
    registry.unsuppress(device)
}

pub fn suppress_apps_for(suppression: &mut AppSuppression, device: DeviceId, apps: &[AppSpec]) {
    suppression.suppress_apps_for(device, apps);
}

pub fn release_apps_for(suppression: &mut AppSuppression, device: DeviceId) {
    suppression.release_apps_for(device);
}

/// Fails `device` over to its first usable replica.
///
/// Replicas are tried in configuration order; one that is faulty, suppressed
/// or itself redirected is skipped. Returns false if none qualifies.
pub fn activate_redundant_device(device: DeviceId, config: &ConfigFile, ctx: &mut HandlingContext) -> bool {
    let chosen = config.device(device).replicas.iter().copied().find(|r| {
        ctx.registry.spec(*r).is_some()
            && !ctx.identifier.is_faulty(*r, ctx.tick)
            && !ctx.registry.is_faulty(*r)
            && !ctx.registry.is_suppressed(*r)
            && ctx.registry.redirect_of(*r).is_none()
    });
    let Some(replica) = chosen else {
        return false;
    };
    ctx.registry.clear_redirect(device);
    ctx.registry.redirect(device, replica).is_ok()
}
