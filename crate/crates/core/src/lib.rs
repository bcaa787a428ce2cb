//! Steps-to-cost safety representations for reinforcement learning.
//!
//! An auxiliary network learns, from the agent's own recent trajectories, a
//! distribution over how many steps remain before the agent enters an
//! unsafe state. That distribution is appended to the observation of a DQN
//! agent. The crate ships the Island Navigation gridworld family, a small
//! MLP engine, the DQN agent variants used for comparison and the
//! experiment harness behind the `srpl` CLI.

pub mod agents;
pub mod envs;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod nn;
pub mod rng;
pub mod s2c;

pub use error::{Error, Result};
pub use mdp::{discounted_cost, discounted_return, summarize, EpisodeMetrics, Trajectory, Transition};
