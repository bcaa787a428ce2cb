//! Fixtures shared by the criterion benchmarks in `benches/`.

use srpl_core::envs::{EnvConfig, EnvState, IslandEnv, IslandSuite};
use srpl_core::rng::{stream, Stream};
use srpl_core::s2c::{label_trajectory, S2CBuffer, SafetyConfig};
use srpl_core::{Trajectory, Transition};

pub fn standard_env() -> IslandEnv {
    IslandEnv::new(IslandSuite::standard(), EnvConfig::default()).expect("built-in suite")
}

/// Encoded observations from random-walk episodes on the standard suite.
pub fn random_walk_observations(n: usize, seed: u64) -> Vec<Vec<f64>> {
    random_walk_episodes(n, seed)
        .into_iter()
        .flat_map(|t| t.transitions.into_iter().map(|tr| tr.obs))
        .take(n)
        .collect()
}

/// Complete random-walk trajectories covering at least `min_steps` steps.
pub fn random_walk_episodes(min_steps: usize, seed: u64) -> Vec<Trajectory> {
    use rand::Rng;
    let env = standard_env();
    let mut rng = stream(seed, Stream::Env);
    let mut out = Vec::new();
    let mut steps = 0;
    while steps < min_steps {
        let (mut state, first): (EnvState, _) = env.reset(&mut rng, false).expect("reset");
        let mut obs = first.features;
        let mut traj = Trajectory::new();
        loop {
            let action = rng.gen_range(0..env.num_actions());
            let o = env.step(&state, action).expect("valid action");
            let next = env.encode(&o.state, false).features;
            traj.transitions.push(Transition {
                obs: obs.clone(),
                action,
                reward: o.reward,
                cost: o.cost,
                next_obs: next.clone(),
                terminal: o.terminal,
                truncated: o.truncated,
            });
            steps += 1;
            if o.terminal || o.truncated {
                traj.failed = o.terminal && o.cost == 1;
                traj.succeeded = o.terminal && o.cost == 0;
                break;
            }
            state = o.state;
            obs = next;
        }
        out.push(traj);
    }
    out
}

/// A full S2C buffer filled from random-walk episodes.
pub fn filled_buffer(config: &SafetyConfig, seed: u64) -> S2CBuffer {
    let mut buf = S2CBuffer::new(config.buffer_capacity);
    for traj in random_walk_episodes(config.buffer_capacity, seed) {
        let labels = label_trajectory(&traj, config.horizon).expect("complete trajectory");
        buf.ingest(&traj, &labels).expect("matching labels");
    }
    buf
}
