//! Monte Carlo life-cycle simulator comparing homeownership with renting
//! under bootstrapped macroeconomic histories.

pub mod bootstrap;
pub mod config;
pub mod engine;
pub mod error;
pub mod household;
pub mod housing;
pub mod income;
pub mod metrics;
pub mod mortality;
pub mod panel;
pub mod rng;
pub mod synthetic;
