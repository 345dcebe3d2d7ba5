//! Abstract behavior models for a planning agent in an adversarial
//! fuel-collection gridworld.
//!
//! The crate covers the full pipeline: environment simulation, a learned
//! factored dynamics ensemble, model-predictive planning, real and imagined
//! episode collection, feature extraction, milestone/strategy labeling,
//! decision-tree fitting, and evaluation reports.

pub mod behavior;
pub mod env;
pub mod error;
pub mod features;
pub mod model;
pub mod pipeline;
pub mod planner;
pub mod rollout;
pub mod seeding;
pub mod tree;

pub use error::{Error, Result};
