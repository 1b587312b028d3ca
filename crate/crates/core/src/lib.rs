//! Simulator and analytics toolkit for multi-domain public blockchains that
//! cross-reference each other's confirmed blocks through hysteresis
//! signatures.
pub mod capacity;
pub mod chain;
mod codec;
pub mod crypto;
pub mod hysteresis;
pub mod netsim;
pub mod protocol;
pub mod scenario;
pub mod seed;
pub mod tamper_mc;
pub use codec::DecodeError;
