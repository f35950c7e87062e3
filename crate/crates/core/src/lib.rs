//! Lower bounds and asymptotically optimal proactive scheduling policies for
//! wireless service under predictable demand and cyclo-stationary channel
//! statistics.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: problem instances and validation
//! - [`stats`]: explicit joint demand and channel tables
//! - [`solver`]: the convex lower-bound programs and a grid-search oracle
//! - [`policy`]: compiled stationary policies and the per-slot control law
//! - [`sim`]: seeded Monte Carlo evaluation
//! - [`trace`]: RSRP trace ingestion and quantization
//! - [`config`], [`table_file`]: on-disk formats
//! - [`experiments`]: presets that regenerate the evaluation figures as CSV

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod model;
pub mod solver;
pub mod policy;
pub mod sim;
pub mod stats;
pub mod table_file;
pub mod trace;

pub use error::{Error, Result};
