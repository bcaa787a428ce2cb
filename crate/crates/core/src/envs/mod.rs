//! Island Navigation gridworlds: layouts, dynamics, observation encoding and
//! the ground-truth safety feature.

pub mod bfs;
pub mod grid;
pub mod island;

pub use bfs::{bfs_water_distance, UNREACHABLE};
pub use grid::{Cell, GridSpec, Pos};
pub use island::{
    decode_agent, Action, EnvConfig, EnvState, IslandEnv, IslandSuite, Observation, RewardScheme,
    StepOutcome, NUM_ACTIONS, NUM_CHANNELS,
};
