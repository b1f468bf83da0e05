pub mod baselines;
pub mod dataset;
pub mod dpp;
pub mod engine;
pub mod gateway;
pub mod kernel;
pub mod metrics;
