//! Condenser water loop optimization core.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std` (only `alloc` is required):
//!
//! * [`plant`]: physics reference simulator of the chiller, cooling tower and
//!   constant-volume pump loop, used as synthetic ground truth.
//! * [`weather`]: seeded synthetic weather and cooling-load generator.
//! * [`dataset`]: sample records, parametric sweeps, cleaning, correlation
//!   analysis and train/test splitting.
//! * [`gbt`] and [`surrogate`]: least-squares gradient-boosted regression
//!   trees and the six-model plant surrogate bundle.
//! * [`pso`] and [`objective`]: mixed-integer particle swarm optimizer with
//!   frozen fan-stage coordinates, an exhaustive grid oracle, and the loop
//!   power / cost objective built on the surrogate.
//! * [`tariff`]: time-of-use energy and demand billing.
//! * [`advisory`]: look-up tables, real-time recommendations and the
//!   model-vs-model savings pipeline.
//!
//! File formats, the CLI and the HTTP service live in the `cwloop` crate.
#![no_std]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod advisory;
pub mod curves;
pub mod dataset;
mod error;
pub mod gbt;
mod math;
pub mod objective;
pub mod plant;
pub mod pso;
pub mod stats;
pub mod surrogate;
pub mod tariff;
pub mod units;
pub mod weather;

pub use error::{Error, Result};
