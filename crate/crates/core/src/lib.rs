//! Toolkit for temporal information extraction over clinical text.

pub mod closure;
pub mod io;
pub mod metrics;
pub mod model;
pub mod split;
pub mod baselines;
pub mod runner;
pub mod synthetic;
