use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The agent variants compared in experiments. Each fixes what is appended
/// to the raw grid encoding before it reaches the Q-network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentKind {
    #[serde(rename = "DQN")]
    Dqn,
    /// Ground-truth distance-to-water appended to the observation.
    #[serde(rename = "DQN_GT")]
    DqnGt,
    /// Learned steps-to-cost distribution appended.
    #[serde(rename = "SR_DQN")]
    SrDqn,
    /// Lagrangian penalty on cost.
    #[serde(rename = "LAG_DQN")]
    LagDqn,
    #[serde(rename = "SR_LAG_DQN")]
    SrLagDqn,
    /// Periodic re-initialization of the Q-networks.
    #[serde(rename = "DQN_RESET")]
    DqnReset,
    /// Scalar probability of failing within the horizon, trained on recent
    /// episodes only.
    #[serde(rename = "V1_SCALAR")]
    V1Scalar,
    /// Steps-to-cost distribution whose buffer is flushed at every target
    /// network sync.
    #[serde(rename = "V2_ONPOLICY")]
    V2OnPolicy,
}

/// What an agent kind appends to the raw encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Raw,
    GroundTruth,
    Distribution,
    Scalar,
}

impl AgentKind {
    pub const ALL: [AgentKind; 8] = [
        AgentKind::Dqn,
        AgentKind::DqnGt,
        AgentKind::SrDqn,
        AgentKind::LagDqn,
        AgentKind::SrLagDqn,
        AgentKind::DqnReset,
        AgentKind::V1Scalar,
        AgentKind::V2OnPolicy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Dqn => "DQN",
            AgentKind::DqnGt => "DQN_GT",
            AgentKind::SrDqn => "SR_DQN",
            AgentKind::LagDqn => "LAG_DQN",
            AgentKind::SrLagDqn => "SR_LAG_DQN",
            AgentKind::DqnReset => "DQN_RESET",
            AgentKind::V1Scalar => "V1_SCALAR",
            AgentKind::V2OnPolicy => "V2_ONPOLICY",
        }
    }

    pub fn pipeline(self) -> Pipeline {
        match self {
            AgentKind::Dqn | AgentKind::LagDqn | AgentKind::DqnReset => Pipeline::Raw,
            AgentKind::DqnGt => Pipeline::GroundTruth,
            AgentKind::SrDqn | AgentKind::SrLagDqn | AgentKind::V2OnPolicy => {
                Pipeline::Distribution
            }
            AgentKind::V1Scalar => Pipeline::Scalar,
        }
    }

    pub fn is_lagrangian(self) -> bool {
        matches!(self, AgentKind::LagDqn | AgentKind::SrLagDqn)
    }

    pub fn uses_s2c(self) -> bool {
        self.pipeline() == Pipeline::Distribution
    }

    /// Number of features appended after the raw encoding (the ground-truth
    /// scalar is part of the raw encoding itself).
    pub fn augmentation_width(self, num_bins: usize) -> usize {
        match self.pipeline() {
            Pipeline::Raw | Pipeline::GroundTruth => 0,
            Pipeline::Distribution => num_bins,
            Pipeline::Scalar => 1,
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::validation("kind", format!("unknown agent kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LagrangeConfig {
    pub initial_lambda: f64,
    /// Dual ascent step size.
    pub eta: f64,
    /// Episodic cost budget.
    pub budget: f64,
    pub cost_decay: f64,
}

impl Default for LagrangeConfig {
    fn default() -> Self {
        Self {
            initial_lambda: 0.0,
            eta: 0.05,
            budget: 0.1,
            cost_decay: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Steps over which epsilon decays linearly from start to end.
    pub epsilon_decay_steps: usize,
    pub replay_capacity: usize,
    pub q_batch: usize,
    /// Replay size required before the first update.
    pub learning_starts: usize,
    pub target_update_every: usize,
    pub learn_every: usize,
    pub learning_rate: f64,
    pub huber_delta: f64,
    pub hidden: Vec<usize>,
    /// Reset cadence for `DQN_RESET`.
    pub reset_every: usize,
    /// Recent-episode window for the scalar critic.
    pub v1_window_episodes: usize,
    pub lagrange: LagrangeConfig,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 20_000,
            replay_capacity: 20_000,
            q_batch: 64,
            learning_starts: 1_000,
            target_update_every: 1_000,
            learn_every: 4,
            learning_rate: 1e-3,
            huber_delta: 1.0,
            hidden: vec![64, 64],
            reset_every: 10_000,
            v1_window_episodes: 50,
            lagrange: LagrangeConfig::default(),
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let field = |f: &str, m: &str| Err(Error::validation(format!("dqn.{f}"), m));
        if !(0.0..1.0).contains(&self.gamma) {
            return field("gamma", "must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.epsilon_end)
            || !(0.0..=1.0).contains(&self.epsilon_start)
            || self.epsilon_end > self.epsilon_start
        {
            return field("epsilon_end", "need 0 <= end <= start <= 1");
        }
        for (name, v) in [
            ("replay_capacity", self.replay_capacity),
            ("q_batch", self.q_batch),
            ("target_update_every", self.target_update_every),
            ("learn_every", self.learn_every),
            ("reset_every", self.reset_every),
            ("v1_window_episodes", self.v1_window_episodes),
        ] {
            if v == 0 {
                return field(name, "must be positive");
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return field("learning_rate", "must be a positive number");
        }
        if self.huber_delta.is_nan() || self.huber_delta <= 0.0 {
            return field("huber_delta", "must be positive");
        }
        if self.hidden.contains(&0) {
            return field("hidden", "layer widths must be positive");
        }
        let lag = &self.lagrange;
        if lag.initial_lambda < 0.0 || lag.eta < 0.0 || lag.budget < 0.0 {
            return field("lagrange", "lambda, eta and budget must be non-negative");
        }
        if !(0.0..1.0).contains(&lag.cost_decay) {
            return field("lagrange.cost_decay", "must lie in [0, 1)");
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_end`, then constant.
    pub fn epsilon(&self, step: usize) -> f64 {
        if self.epsilon_decay_steps == 0 || step >= self.epsilon_decay_steps {
            return self.epsilon_end;
        }
        let frac = step as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_schedule_stays_in_range() {
        let cfg = DqnConfig::default();
        assert_eq!(cfg.epsilon(0), 1.0);
        assert_eq!(cfg.epsilon(cfg.epsilon_decay_steps), 0.05);
        assert_eq!(cfg.epsilon(10 * cfg.epsilon_decay_steps), 0.05);
        let mid = cfg.epsilon(cfg.epsilon_decay_steps / 2);
        assert!((mid - 0.525).abs() < 1e-12);
        for s in (0..50_000).step_by(777) {
            let e = cfg.epsilon(s);
            assert!((0.05..=1.0).contains(&e));
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in AgentKind::ALL {
            assert_eq!(k.name().parse::<AgentKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!("DQN2".parse::<AgentKind>().is_err());
    }

    #[test]
    fn augmentation_widths() {
        assert_eq!(AgentKind::Dqn.augmentation_width(10), 0);
        assert_eq!(AgentKind::DqnGt.augmentation_width(10), 0);
        assert_eq!(AgentKind::SrDqn.augmentation_width(10), 10);
        assert_eq!(AgentKind::V2OnPolicy.augmentation_width(10), 10);
        assert_eq!(AgentKind::V1Scalar.augmentation_width(10), 1);
    }

    #[test]
    fn validation() {
        DqnConfig::default().validate().unwrap();
        let bad = DqnConfig {
            gamma: 1.0,
            ..DqnConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = DqnConfig {
            learn_every: 0,
            ..DqnConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Validation { field, .. }) if field == "dqn.learn_every"));
    }
}
