//! Fairness through matching: exact optimal-transport matchings, matched
//! demographic parity training and group-fairness audits.

pub mod data;
pub mod error;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod ot;
pub mod seed;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
