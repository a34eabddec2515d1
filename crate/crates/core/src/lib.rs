//! Fault handling for a simulated smart home hub.

pub mod apps;
pub mod checkpoint;
pub mod config;
pub mod device;
pub mod faults;
pub mod handler;
pub mod handling;
pub mod sim;
pub mod value;

pub use value::{DeviceId, Tick, Value, ValueDomain};
