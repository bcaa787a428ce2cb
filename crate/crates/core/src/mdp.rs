//! Decision-process value types: transitions, trajectories and the scalar
//! objectives computed over them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One environment step. `obs` and `next_obs` hold the raw (un-augmented)
/// encoding; augmentation is recomputed whenever a transition is replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    /// Binary: 1 when `next_obs` is an unsafe state.
    pub cost: u8,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
    pub truncated: bool,
}

impl Transition {
    pub fn validate(&self, num_actions: usize) -> Result<()> {
        if self.cost > 1 {
            return Err(Error::InvalidInput(format!(
                "cost must be 0 or 1, got {}",
                self.cost
            )));
        }
        if self.terminal && self.truncated {
            return Err(Error::InvalidInput(
                "transition cannot be both terminal and truncated".into(),
            ));
        }
        if self.action >= num_actions {
            return Err(Error::InvalidInput(format!(
                "action {} outside action space of size {num_actions}",
                self.action
            )));
        }
        Ok(())
    }

    pub fn ends_episode(&self) -> bool {
        self.terminal || self.truncated
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    /// The final transition entered an unsafe state.
    pub failed: bool,
    /// The goal was reached.
    pub succeeded: bool,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Whether the last transition ended the episode.
    pub fn is_complete(&self) -> bool {
        self.transitions.last().is_some_and(Transition::ends_episode)
    }

    /// Checks the structural invariants: only the last transition may end the
    /// episode, and a failed trajectory ends with a terminal cost-1 step.
    pub fn validate(&self) -> Result<()> {
        let n = self.transitions.len();
        for (i, t) in self.transitions.iter().enumerate() {
            if t.cost > 1 {
                return Err(Error::InvalidInput(format!("cost {} at step {i}", t.cost)));
            }
            if t.terminal && t.truncated {
                return Err(Error::InvalidInput(format!(
                    "step {i} is both terminal and truncated"
                )));
            }
            if i + 1 < n && t.ends_episode() {
                return Err(Error::InvalidInput(format!(
                    "step {i} ends the episode but is not the last transition"
                )));
            }
        }
        if self.failed {
            match self.transitions.last() {
                Some(last) if last.cost == 1 && last.terminal => {}
                _ => {
                    return Err(Error::InvalidInput(
                        "failed trajectory must end with a terminal cost-1 transition".into(),
                    ))
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Undiscounted reward sum.
    pub episode_return: f64,
    pub length: usize,
    pub episode_cost: f64,
    pub failed: bool,
    pub succeeded: bool,
}

fn ensure_non_empty(traj: &Trajectory) -> Result<()> {
    if traj.is_empty() {
        Err(Error::InvalidInput("empty trajectory".into()))
    } else {
        Ok(())
    }
}

fn discounted_sum(values: impl Iterator<Item = f64>, gamma: f64) -> f64 {
    let mut scale = 1.0;
    let mut total = 0.0;
    for v in values {
        total += scale * v;
        scale *= gamma;
    }
    total
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "discount must lie in [0, 1), got {gamma}"
        )))
    }
}

/// `sum_t gamma^t r_t` over the trajectory.
pub fn discounted_return(traj: &Trajectory, gamma: f64) -> Result<f64> {
    ensure_non_empty(traj)?;
    check_gamma(gamma)?;
    Ok(discounted_sum(
        traj.transitions.iter().map(|t| t.reward),
        gamma,
    ))
}

/// `sum_t gamma^t c_t` over the trajectory.
pub fn discounted_cost(traj: &Trajectory, gamma: f64) -> Result<f64> {
    ensure_non_empty(traj)?;
    check_gamma(gamma)?;
    Ok(discounted_sum(
        traj.transitions.iter().map(|t| f64::from(t.cost)),
        gamma,
    ))
}

pub fn summarize(traj: &Trajectory) -> Result<EpisodeMetrics> {
    ensure_non_empty(traj)?;
    let episode_cost = traj
        .transitions
        .iter()
        .map(|t| u32::from(t.cost))
        .sum::<u32>();
    Ok(EpisodeMetrics {
        episode_return: traj.transitions.iter().map(|t| t.reward).sum(),
        length: traj.len(),
        episode_cost: f64::from(episode_cost),
        failed: traj.failed,
        succeeded: traj.succeeded,
    })
}
