//! DQN agent family: vanilla, ground-truth-augmented, steps-to-cost
//! augmented, Lagrangian-constrained, periodically reset, and the scalar
//! and on-policy representation variants.

pub mod config;
pub mod dqn;
pub mod lagrange;
pub mod replay;
pub mod scalar_critic;
pub mod train;

pub use config::{AgentKind, DqnConfig, LagrangeConfig, Pipeline};
pub use dqn::{argmax, dqn_target, q_update, select_action, QSample, QScratch, QUpdateParams};
pub use lagrange::{lagrange_update, LagrangeState};
pub use replay::{ReplayBuffer, ReplayEntry};
pub use scalar_critic::ScalarCritic;
pub use train::{
    load_agent, save_agent, train_agent, Agent, CurvePoint, EpisodeRecord, TrainOutput,
    TrainSetup, ROLLING_WINDOW,
};
