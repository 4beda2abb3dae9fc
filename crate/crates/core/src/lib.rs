//! Cooperative common-payoff games, their public belief MDP, and solvers for
//! them: approximate policy iteration over prescription vectors, exact
//! reference solvers, and decentralized value-based baselines.

pub mod baselines;
pub mod capi;
pub mod error;
pub mod exact;
pub mod fosg;
pub mod pubmdp;
pub mod rng;
pub mod zoo;

pub use error::{Error, Result};
