//! Discrete POMDPs where a collaborator's action suggestions are treated as
//! observations of the hidden state.
//!
//! - [`pomdp`]: models, beliefs and Bayes filtering
//! - [`policy`]: alpha-vector policies and their JSON format
//! - [`solver`]: point-based value iteration
//! - [`suggestion`]: scaled and noisy rational suggestion likelihoods
//! - [`env`]: Tag and RockSample
//! - [`agents`]: agent and suggester variants, the step protocol
//! - [`harness`]: Monte-Carlo scenarios, sweeps, CSV/markdown

pub mod agents;
pub mod env;
pub mod error;
pub mod harness;
pub mod policy;
pub mod pomdp;
pub mod rng;
pub mod solver;
pub mod suggestion;

pub use error::{Error, Result};
pub use policy::{AlphaVector, AlphaVectorPolicy};
pub use pomdp::{Belief, DiscretePomdp, PomdpBuilder};
