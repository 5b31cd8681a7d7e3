//! Marginal-independence (no-signaling) tests for Bell-type coincidence data.

pub mod datasets;
pub mod nosig;
pub mod qmodel;
pub mod simulator;
pub mod stats;
pub mod tables;
