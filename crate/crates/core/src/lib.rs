//! Access-point placement optimization for radio coverage in rail tunnels.
//!
//! The pipeline: a [`channel`] layer produces per-AP path-loss profiles,
//! [`cost`] turns a placement into a penalized coverage cost, [`env`] wraps
//! that as a 27-action MDP, and [`agents`] trains DQN / Dueling DQN policies
//! on it. [`hj`] is the Hooke-Jeeves baseline and [`cgan`] a conditional-GAN
//! surrogate that super-resolves coarse path-loss profiles.

pub mod channel;
pub mod cost;
pub mod env;
pub mod error;
pub mod nn;
pub mod stats;
pub mod agents;
pub mod hj;
pub mod cgan;
pub mod config;
pub mod harness;

pub use error::{Error, Result};
