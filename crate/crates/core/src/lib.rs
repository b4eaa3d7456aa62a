//! Agent-based simulator of international wheat spot markets.
//!
//! Producer regions run one market session each per monthly step; buyer
//! regions send linear demand curves to the sessions open to them and move
//! demand towards the cheapest delivered unit cost. Transport costs and
//! producers' reservation prices are indexed on the oil price.
//!
//! Module map:
//! - [`world`]: domain types, world construction and the monthly step sequencer
//! - [`demand`]: buying-strategy update and demand-curve geometry
//! - [`market`]: session clearing and settlement
//! - [`supply`]: production events, offered quantities and target production
//! - [`data`]: balance-sheet ingestion, corrections and producer reduction
//! - [`calibration`]: differential evolution nested with the yearly demand-deviation search
//! - [`scenario`]: policy events, counterfactual pairs, projections and trade networks
//! - [`report`]: CSV artifacts written from run logs

// NaN must fail range checks, which `!(x > 0.0)` says directly
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod config;
pub mod data;
pub mod demand;
mod error;
pub mod fixtures;
pub mod geo;
pub mod market;
pub mod par;
pub mod report;
pub mod scenario;
pub mod supply;
pub mod world;

pub use config::GlobalConfig;
pub use error::{Error, Result};
pub use geo::GeoPoint;
pub use world::{build_world, PreparedInputs, RunLog, StepReport, World};
