//! Deterministic shared-control evasive-steering simulator.
//!
//! A bicycle-model car on cruise control meets a pedestrian who runs out
//! from behind a parked car. Three steering interfaces are modelled: a
//! driver-triggered automated evasion, plain manual steering, and a manual
//! takeover from automation. The crate runs the counterbalanced experiment,
//! measures every trial and analyses the results with Shapiro–Wilk,
//! Wilcoxon signed-rank, F and t tests.

pub mod agents;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod scenario;
pub mod stats;

pub use error::{Error, Result};
