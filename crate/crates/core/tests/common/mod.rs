#![allow(dead_code)]

use srpl_core::envs::{bfs_water_distance, EnvConfig, EnvState, GridSpec, IslandEnv, IslandSuite, Pos};
use srpl_core::rng::{stream, Stream};
use srpl_core::s2c::{bin_index, label_trajectory, S2CBuffer, S2CModel, SafetyConfig};
use srpl_core::{Trajectory, Transition};

/// A single winding corridor through a 5x5 interior with water at one end.
pub const CORRIDOR: &str = "\
#######
#W....#
#####.#
#.....#
#.#####
#A...G#
#######
";

pub fn corridor_env() -> IslandEnv {
    let spec = GridSpec::parse(CORRIDOR).unwrap();
    IslandEnv::new(IslandSuite::new(vec![spec]).unwrap(), EnvConfig::default()).unwrap()
}

/// Land cells of the corridor with their walking distance to the water.
pub fn corridor_cells() -> Vec<(Pos, u32)> {
    let spec = GridSpec::parse(CORRIDOR).unwrap();
    let dist = bfs_water_distance(&spec);
    spec.open_cells()
        .filter(|p| spec.cell(*p) == srpl_core::envs::Cell::Land)
        .map(|p| (p, dist[p.y][p.x]))
        .collect()
}

/// Walks from `start` toward the water, always stepping to the neighbour
/// closest to it.
pub fn walk_into_water(env: &IslandEnv, start: Pos) -> Trajectory {
    let spec = &env.suite().variants()[0];
    let dist = bfs_water_distance(spec);
    let mut state = EnvState {
        variant_index: 0,
        agent_pos: start,
        steps_taken: 0,
        done: false,
    };
    let mut traj = Trajectory::new();
    loop {
        let action = (0..4)
            .min_by_key(|&a| {
                let o = env.step(&state, a).unwrap();
                let p = o.state.agent_pos;
                dist[p.y][p.x]
            })
            .unwrap();
        let o = env.step(&state, action).unwrap();
        traj.transitions.push(Transition {
            obs: env.encode(&state, false).features,
            action,
            reward: o.reward,
            cost: o.cost,
            next_obs: env.encode(&o.state, false).features,
            terminal: o.terminal,
            truncated: o.truncated,
        });
        if o.terminal || o.truncated {
            traj.failed = o.terminal && o.cost == 1;
            traj.succeeded = o.terminal && o.cost == 0;
            return traj;
        }
        state = o.state;
    }
}

pub struct CorridorResult {
    pub train_steps: usize,
    /// `(k, predicted mode, expected bin)` for every k in 1..=horizon.
    pub modes: Vec<(u32, usize, usize)>,
}

impl CorridorResult {
    pub fn all_match(&self) -> bool {
        self.modes.iter().all(|(_, got, want)| got == want)
    }
}

/// Fills a buffer with one rollout from every corridor cell, then trains
/// in rounds until each distance 1..=8 is predicted in its own bin or the
/// step budget runs out.
pub fn corridor_convergence(seed: u64, max_train_steps: usize) -> CorridorResult {
    let env = corridor_env();
    let config = SafetyConfig {
        horizon: 8,
        bin_width: 1,
        batch_size: 64,
        updates_per_round: 50,
        buffer_capacity: 1_000,
        ..SafetyConfig::default()
    };
    let mut buf = S2CBuffer::new(config.buffer_capacity);
    for (p, _) in corridor_cells() {
        let traj = walk_into_water(&env, p);
        assert!(traj.failed);
        let labels = label_trajectory(&traj, config.horizon).unwrap();
        buf.ingest(&traj, &labels).unwrap();
    }
    let mut rng = stream(seed, Stream::Safety);
    let mut model = S2CModel::new(env.obs_dim(false), config.clone(), &mut rng).unwrap();
    let probes: Vec<(u32, Vec<f64>)> = corridor_cells()
        .into_iter()
        .filter(|&(_, d)| (1..=config.horizon).contains(&d))
        .map(|(p, d)| {
            let state = EnvState {
                variant_index: 0,
                agent_pos: p,
                steps_taken: 0,
                done: false,
            };
            (d, env.encode(&state, false).features)
        })
        .collect();
    let evaluate = |model: &S2CModel| -> Vec<(u32, usize, usize)> {
        let mut modes: Vec<(u32, usize, usize)> = probes
            .iter()
            .map(|(d, obs)| {
                let mode = model.predict(obs, false).unwrap().mode();
                (*d, mode, bin_index(*d, config.bin_width, config.horizon).unwrap())
            })
            .collect();
        modes.sort();
        modes
    };
    let mut steps = 0;
    loop {
        let modes = evaluate(&model);
        let done = modes.iter().all(|(_, g, w)| g == w);
        if done || steps + config.updates_per_round > max_train_steps {
            return CorridorResult {
                train_steps: steps,
                modes,
            };
        }
        model.train_round(&buf, &mut rng).unwrap();
        steps += config.updates_per_round;
    }
}
