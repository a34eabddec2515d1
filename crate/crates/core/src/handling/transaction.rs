use thiserror::Error;

use crate::device::{ActuationResult, DeviceError, Registry};
use crate::value::{DeviceId, Tick, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxStatus {
    Open,
    Committed,
    Aborted,
}

/// Undo log: each actuator touched and the state it had before.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionLog {
    pub entries: Vec<(DeviceId, Value)>,
    pub status: TxStatus,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransactionError {
    #[error("device {0} is not an actuator")]
    NotActuator(DeviceId),
    #[error("aborted at step {step} ({device}): {cause}; prior states restored")]
    AbortedAtStep {
        step: usize,
        device: DeviceId,
        cause: String,
    },
    #[error("aborted at step {step}; could not restore {unrestored:?}")]
    PartialAbort {
        step: usize,
        unrestored: Vec<DeviceId>,
    },
}

/// Performs `actuations` in order, all or nothing.
///
/// A command that is refused or has no effect aborts the transaction; the
/// actuators already changed are put back in reverse order.
pub fn transaction(
    actuations: &[(DeviceId, Value)],
    registry: &mut Registry,
    tick: Tick,
) -> Result<TransactionLog, TransactionError> {
    for (id, _) in actuations {
        if !registry.spec(*id).is_some_and(|s| s.is_actuator()) {
            return Err(TransactionError::NotActuator(*id));
        }
    }
    let mut log = TransactionLog {
        entries: Vec::with_capacity(actuations.len()),
        status: TxStatus::Open,
    };
    for (step, (id, value)) in actuations.iter().enumerate() {
        let target = registry.redirect_of(*id).unwrap_or(*id);
        let prior = registry.truth(target).expect("registered");
        let cause = match registry.actuate(*id, *value, tick) {
            Ok(ActuationResult::Applied) => {
                log.entries.push((*id, prior));
                continue;
            }
            Ok(ActuationResult::NoEffect) => {
                // Nothing moved, but the device latched the command.
                registry.set_truth(target, prior).expect("registered");
                "no effect".to_string()
            }
            Err(e) => e.to_string(),
        };
        log.status = TxStatus::Aborted;
        let mut unrestored = Vec::new();
        for (rid, rv) in log.entries.iter().rev() {
            if !matches!(registry.actuate(*rid, *rv, tick), Ok(ActuationResult::Applied)) {
                unrestored.push(*rid);
            }
        }
        return Err(if unrestored.is_empty() {
            TransactionError::AbortedAtStep {
                step,
                device: *id,
                cause,
            }
        } else {
            TransactionError::PartialAbort { step, unrestored }
        });
    }
    log.status = TxStatus::Committed;
    Ok(log)
}

impl From<DeviceError> for TransactionError {
    fn from(e: DeviceError) -> Self {
        match e {
            DeviceError::NotActuator(id) | DeviceError::UnknownDevice(id) => TransactionError::NotActuator(id),
            other => TransactionError::AbortedAtStep {
                step: 0,
                device: DeviceId(0),
                cause: other.to_string(),
            },
        }
    }
}
