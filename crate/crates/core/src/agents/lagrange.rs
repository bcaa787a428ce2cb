use serde::{Deserialize, Serialize};

use super::config::LagrangeConfig;

/// Dual variable for the episodic cost constraint `J_C <= budget`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangeState {
    pub lambda: f64,
    pub eta: f64,
    pub budget: f64,
    /// Exponential moving average of episodic cost.
    pub cost_estimate: f64,
    pub decay: f64,
}

impl LagrangeState {
    pub fn new(config: &LagrangeConfig) -> Self {
        Self {
            lambda: config.initial_lambda.max(0.0),
            eta: config.eta,
            budget: config.budget,
            cost_estimate: 0.0,
            decay: config.cost_decay,
        }
    }
}

/// Folds one episode's cost into the running estimate, then takes a
/// projected dual ascent step `lambda <- max(0, lambda + eta * (J - budget))`.
pub fn lagrange_update(state: LagrangeState, episode_cost: f64) -> LagrangeState {
    let cost_estimate = state.decay * state.cost_estimate + (1.0 - state.decay) * episode_cost;
    let lambda = (state.lambda + state.eta * (cost_estimate - state.budget)).max(0.0);
    LagrangeState {
        lambda,
        cost_estimate,
        ..state
    }
}
