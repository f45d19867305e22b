//! Distributed resource allocation by output consensus for coordinating the
//! charging and discharging of a plug-in EV fleet against a grid load
//! profile.
//!
//! Each vehicle owns one strategy per time slot. Strategies of the same
//! vehicle exchange outputs over a connected graph and move energy between
//! slots until every slot's output agrees; the total energy each vehicle
//! draws is conserved along the way, and a logarithmic barrier keeps every
//! strategy inside its battery and charger limits. Outputs couple vehicles
//! only through the aggregate grid load.
//!
//! The crate is `no_std` and allocates through `alloc`. File formats, the CLI
//! and parameter sweeps live in the `dra-grid` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod constraints;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod payoff;

pub use error::{DraError, Result};
pub use model::{FleetState, GridProfile, PevSpec, Scenario, SimParams};
