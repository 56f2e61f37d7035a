//! Deterministic system-level simulator of a 28 GHz multi-beam network
//! serving three-panel handsets under hand blockage.

pub mod channel;
pub mod config;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod kpi;
pub mod measure;
pub mod mobility;
pub mod mpue;
pub mod radio;
pub mod report;

pub use error::{Error, Result};
