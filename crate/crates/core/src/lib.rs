//! Orienteering-problem toolkit: exact labelling, edge features, linear
//! edge classifiers and prediction-guided ant colony optimization.

pub mod aco;
pub mod classifier;
pub mod exact;
pub mod features;
pub mod instance;
pub mod local_search;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use instance::{CostRounding, Instance, InstanceError, Route};
