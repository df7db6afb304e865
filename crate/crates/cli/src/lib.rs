//! Config-driven experiment runner built on `maxspan_core`.

pub mod config;
pub mod experiment;
