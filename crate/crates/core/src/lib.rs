//! Link-level model and resource allocator for a symbiotic-radio network in
//! which ambient IoT devices share the spectrum of a legacy ambient source.
//!
//! Each device supports three modes inside a unit scheduling block: passive
//! backscatter of the source signal, active uplink transmission powered by
//! harvested RF energy, and pure energy harvesting while idle. The crate
//! provides
//!
//! - deterministic channel and energy-harvesting primitives ([`phy`]),
//! - closed-form per-phase rates, the per-device energy ledger and
//!   feasibility evaluation ([`rate`]),
//! - a weighted sum-rate optimizer over time shares, reflection
//!   coefficients and uplink powers ([`allocator`]),
//! - an exhaustive grid-search oracle for validating the optimizer
//!   ([`oracle`]),
//! - reproducible parameter sweeps with a stable CSV contract
//!   ([`experiments`]).
//!
//! All computations are pure functions of their inputs. Runs are
//! reproducible to the byte, with or without the `parallel` feature.

pub mod allocator;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod lp;
pub mod oracle;
pub mod phy;
pub mod rate;

pub use error::Error;
pub use exec::ExecMode;
