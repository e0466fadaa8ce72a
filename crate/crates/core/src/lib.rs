//! Moment-matching policy diversity for a cooperative two-agent team shooter.

pub mod arena;
pub mod cli;
pub mod diversity;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod rollout;
pub mod seed;
pub mod store;

pub use error::{Error, Result};
