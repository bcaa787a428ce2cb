use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Cell, GridSpec, Pos};
use crate::error::{Error, Result};

pub const NUM_ACTIONS: usize = 4;
/// Per-cell one-hot channels: agent, water, goal, land-or-wall.
pub const NUM_CHANNELS: usize = 4;

const DEFAULT_LAYOUTS: [&str; 4] = [
    include_str!("../../layouts/island_1.txt"),
    include_str!("../../layouts/island_2.txt"),
    include_str!("../../layouts/island_3.txt"),
    include_str!("../../layouts/island_4.txt"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Left = 0,
    Right = 1,
    Up = 2,
    Down = 3,
}

impl Action {
    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Action::Left),
            1 => Ok(Action::Right),
            2 => Ok(Action::Up),
            3 => Ok(Action::Down),
            _ => Err(Error::InvalidInput(format!("action {i} not in 0..4"))),
        }
    }

    fn apply(self, p: Pos) -> Option<Pos> {
        match self {
            Action::Left => p.x.checked_sub(1).map(|x| Pos::new(x, p.y)),
            Action::Right => Some(Pos::new(p.x + 1, p.y)),
            Action::Up => p.y.checked_sub(1).map(|y| Pos::new(p.x, y)),
            Action::Down => Some(Pos::new(p.x, p.y + 1)),
        }
    }
}

/// A family of same-sized layouts; each episode starts in one of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IslandSuite {
    variants: Vec<GridSpec>,
}

impl IslandSuite {
    pub fn new(variants: Vec<GridSpec>) -> Result<Self> {
        if let Some(first) = variants.first() {
            for (i, v) in variants.iter().enumerate() {
                if (v.width(), v.height()) != (first.width(), first.height()) {
                    return Err(Error::InvalidInput(format!(
                        "variant {i} is {}x{}, expected {}x{}",
                        v.width(),
                        v.height(),
                        first.width(),
                        first.height()
                    )));
                }
            }
        }
        Ok(Self { variants })
    }

    /// The four built-in 7-row by 9-column layouts.
    pub fn standard() -> Self {
        let variants = DEFAULT_LAYOUTS
            .iter()
            .map(|t| GridSpec::parse(t).expect("built-in layout is valid"))
            .collect();
        Self::new(variants).expect("built-in layouts share dimensions")
    }

    /// Built-in layouts selected by zero-based index.
    pub fn standard_subset(indices: &[usize]) -> Result<Self> {
        let all = Self::standard();
        let variants = indices
            .iter()
            .map(|&i| {
                all.variants.get(i).cloned().ok_or_else(|| {
                    Error::InvalidInput(format!("no built-in variant {i} (have 0..4)"))
                })
            })
            .collect::<Result<_>>()?;
        Self::new(variants)
    }

    pub fn from_files<P: AsRef<Path>>(paths: &[P]) -> Result<Self> {
        Self::new(paths.iter().map(GridSpec::load).collect::<Result<_>>()?)
    }

    pub fn variants(&self) -> &[GridSpec] {
        &self.variants
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    /// `(width, height)` shared by every variant.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.variants.first().map(|v| (v.width(), v.height()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardScheme {
    pub step: f64,
    pub goal: f64,
    pub water: f64,
}

impl Default for RewardScheme {
    fn default() -> Self {
        Self {
            step: -0.01,
            goal: 1.0,
            water: -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub rewards: RewardScheme,
    pub max_steps: usize,
    /// Probability that the chosen action is replaced by a uniform one.
    pub slip_prob: f64,
    /// Divide the ground-truth distance by the grid diameter.
    pub normalize_gt: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            rewards: RewardScheme::default(),
            max_steps: 100,
            slip_prob: 0.0,
            normalize_gt: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnvState {
    pub variant_index: usize,
    pub agent_pos: Pos,
    pub steps_taken: usize,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// One-hot grid encoding, with the ground-truth feature appended when
    /// requested.
    pub features: Vec<f64>,
    pub gt_safety: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub reward: f64,
    pub cost: u8,
    pub terminal: bool,
    pub truncated: bool,
}

/// Island Navigation dynamics over a suite of layouts. The environment
/// itself is immutable; episode progress lives in [`EnvState`].
#[derive(Debug, Clone)]
pub struct IslandEnv {
    suite: Arc<IslandSuite>,
    config: EnvConfig,
}

impl IslandEnv {
    pub fn new(suite: IslandSuite, config: EnvConfig) -> Result<Self> {
        if suite.is_empty() {
            return Err(Error::InvalidInput("island suite has no variants".into()));
        }
        if config.max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be positive".into()));
        }
        if !(0.0..=1.0).contains(&config.slip_prob) {
            return Err(Error::InvalidInput(format!(
                "slip_prob {} outside [0, 1]",
                config.slip_prob
            )));
        }
        Ok(Self {
            suite: Arc::new(suite),
            config,
        })
    }

    pub fn suite(&self) -> &IslandSuite {
        &self.suite
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    /// Length of [`Observation::features`].
    pub fn obs_dim(&self, include_gt: bool) -> usize {
        let (w, h) = self.suite.dims().expect("suite is non-empty");
        w * h * NUM_CHANNELS + usize::from(include_gt)
    }

    fn grid(&self, state: &EnvState) -> &GridSpec {
        &self.suite.variants[state.variant_index]
    }

    /// Starts an episode in a uniformly chosen variant.
    pub fn reset<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        include_gt: bool,
    ) -> Result<(EnvState, Observation)> {
        let variant_index = rng.gen_range(0..self.suite.len());
        let state = self.reset_to(variant_index)?;
        let obs = self.encode(&state, include_gt);
        Ok((state, obs))
    }

    pub fn reset_to(&self, variant_index: usize) -> Result<EnvState> {
        let grid = self.suite.variants.get(variant_index).ok_or_else(|| {
            Error::InvalidInput(format!("variant {variant_index} out of range"))
        })?;
        Ok(EnvState {
            variant_index,
            agent_pos: grid.start(),
            steps_taken: 0,
            done: false,
        })
    }

    /// Deterministic transition. Walls (and the grid edge) block movement
    /// without penalty.
    pub fn step(&self, state: &EnvState, action: usize) -> Result<StepOutcome> {
        if state.done {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        let action = Action::from_index(action)?;
        let grid = self.grid(state);
        let target = action
            .apply(state.agent_pos)
            .filter(|&p| grid.in_bounds(p) && grid.cell(p) != Cell::Wall)
            .unwrap_or(state.agent_pos);

        let steps_taken = state.steps_taken + 1;
        let rewards = &self.config.rewards;
        let (reward, cost, terminal) = match grid.cell(target) {
            Cell::Water => (rewards.water, 1, true),
            Cell::Goal => (rewards.goal, 0, true),
            Cell::Land | Cell::Wall => (rewards.step, 0, false),
        };
        let truncated = !terminal && steps_taken >= self.config.max_steps;
        Ok(StepOutcome {
            state: EnvState {
                variant_index: state.variant_index,
                agent_pos: target,
                steps_taken,
                done: terminal || truncated,
            },
            reward,
            cost,
            terminal,
            truncated,
        })
    }

    /// [`Self::step`] with the configured action-slip noise.
    pub fn step_with_slip<R: Rng + ?Sized>(
        &self,
        state: &EnvState,
        action: usize,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        let action = if self.config.slip_prob > 0.0 && rng.gen_bool(self.config.slip_prob) {
            rng.gen_range(0..NUM_ACTIONS)
        } else {
            action
        };
        self.step(state, action)
    }

    /// Minimum Manhattan distance from the agent to any water cell.
    pub fn gt_safety(&self, state: &EnvState) -> f64 {
        let grid = self.grid(state);
        match grid.water_cells().map(|w| w.manhattan(state.agent_pos)).min() {
            Some(d) => d as f64,
            None => {
                log::warn!(
                    "variant {} has no water; using sentinel ground-truth safety",
                    state.variant_index
                );
                (grid.width() + grid.height()) as f64
            }
        }
    }

    pub fn encode(&self, state: &EnvState, include_gt: bool) -> Observation {
        let grid = self.grid(state);
        let mut features = vec![0.0; self.obs_dim(include_gt)];
        for p in grid.positions() {
            let channel = if p == state.agent_pos {
                0
            } else {
                match grid.cell(p) {
                    Cell::Water => 1,
                    Cell::Goal => 2,
                    Cell::Land | Cell::Wall => 3,
                }
            };
            features[grid.index(p) * NUM_CHANNELS + channel] = 1.0;
        }
        let gt_safety = include_gt.then(|| {
            let d = self.gt_safety(state);
            if self.config.normalize_gt {
                d / (grid.width() + grid.height() - 2) as f64
            } else {
                d
            }
        });
        if let Some(gt) = gt_safety {
            *features.last_mut().expect("gt slot") = gt;
        }
        Observation {
            features,
            gt_safety,
        }
    }
}

/// Recovers the agent position from the agent channel of an encoding.
pub fn decode_agent(features: &[f64], width: usize) -> Option<Pos> {
    let cells = features.len() / NUM_CHANNELS;
    (0..cells)
        .find(|&i| features[i * NUM_CHANNELS] == 1.0)
        .map(|i| Pos::new(i % width, i / width))
}
