//! Scalar safety critic: the probability that the current policy fails
//! within the safety horizon from a state, fit only on the most recent
//! episodes.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::Trajectory;
use crate::nn::{bce_loss, AdamConfig, ForwardCache, Gradients, Head, Mlp, OptimizerState};

#[derive(Debug, Clone)]
pub struct ScalarCritic {
    live: Mlp,
    snapshot: Mlp,
    optimizer: OptimizerState,
    window: VecDeque<Vec<(Vec<f64>, f64)>>,
    window_episodes: usize,
    horizon: u32,
    snapshot_version: u64,
    cache: ForwardCache,
    grads: Gradients,
}

/// 1 where the episode failed within `horizon` actions of the state.
pub fn failure_within_horizon(traj: &Trajectory, horizon: u32) -> Vec<f64> {
    let n = traj.len();
    (0..n)
        .map(|t| {
            if traj.failed && n - t <= horizon as usize {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

impl ScalarCritic {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hidden: &[usize],
        learning_rate: f64,
        horizon: u32,
        window_episodes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let dims: Vec<usize> = std::iter::once(obs_dim)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        let live = Mlp::new(&dims, Head::Sigmoid, rng)?;
        let optimizer = OptimizerState::new(
            &live,
            AdamConfig {
                learning_rate,
                ..AdamConfig::default()
            },
        );
        Ok(Self {
            snapshot: live.clone(),
            grads: Gradients::zeros_like(&live),
            live,
            optimizer,
            window: VecDeque::new(),
            window_episodes,
            horizon,
            snapshot_version: 0,
            cache: ForwardCache::default(),
        })
    }

    /// Adds a finished episode, dropping the oldest beyond the window.
    pub fn observe(&mut self, traj: &Trajectory) {
        let labels = failure_within_horizon(traj, self.horizon);
        let episode = traj
            .transitions
            .iter()
            .zip(labels)
            .map(|(t, y)| (t.obs.clone(), y))
            .collect();
        self.window.push_back(episode);
        while self.window.len() > self.window_episodes {
            self.window.pop_front();
        }
    }

    pub fn window_len(&self) -> usize {
        self.window.iter().map(Vec::len).sum()
    }

    /// `updates` minibatch steps of binary cross-entropy on the window.
    /// Returns `None` when the window is empty.
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        updates: usize,
        batch: usize,
        rng: &mut R,
    ) -> Result<Option<f64>> {
        let total = self.window_len();
        if total == 0 || updates == 0 || batch == 0 {
            return Ok(None);
        }
        let mut loss_total = 0.0;
        for _ in 0..updates {
            self.grads.zero();
            let mut loss_sum = 0.0;
            for _ in 0..batch {
                let mut k = rng.gen_range(0..total);
                let (obs, y) = self
                    .window
                    .iter()
                    .find_map(|ep| {
                        if k < ep.len() {
                            Some(&ep[k])
                        } else {
                            k -= ep.len();
                            None
                        }
                    })
                    .expect("index within window");
                self.live.forward_cached(obs, &mut self.cache)?;
                let (loss, g) = bce_loss(self.cache.output[0], *y);
                loss_sum += loss;
                self.live.backward_cached(&self.cache, &[g], &mut self.grads)?;
            }
            self.grads.scale(1.0 / batch as f64);
            self.optimizer.step(&mut self.live, &self.grads)?;
            loss_total += loss_sum / batch as f64;
        }
        let mean = loss_total / updates as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite("scalar critic loss".into()));
        }
        Ok(Some(mean))
    }

    pub fn predict(&self, obs: &[f64], use_frozen: bool) -> Result<f64> {
        let net = if use_frozen { &self.snapshot } else { &self.live };
        Ok(net.forward(obs)?[0])
    }

    pub fn snapshot(&mut self) {
        self.snapshot.clone_from(&self.live);
        self.snapshot_version += 1;
    }

    pub fn snapshot_version(&self) -> u64 {
        self.snapshot_version
    }

    pub fn live_net(&self) -> &Mlp {
        &self.live
    }

    /// `[obs || p_fail]` using the frozen snapshot.
    pub fn augment(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let mut out = obs.to_vec();
        out.push(self.predict(obs, true)?);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::tests::traj_from;
    use crate::rng::{stream, Stream};

    fn critic(seed: u64) -> ScalarCritic {
        let mut rng = stream(seed, Stream::Safety);
        ScalarCritic::new(3, &[16], 1e-2, 4, 5, &mut rng).unwrap()
    }

    fn episode(failed: bool) -> Trajectory {
        let costs: Vec<u8> = if failed { vec![0, 0, 1] } else { vec![0, 0, 0] };
        let mut t = traj_from(&[0.0; 3], &costs);
        for (i, tr) in t.transitions.iter_mut().enumerate() {
            tr.obs = vec![i as f64 * 0.5, 1.0, 0.0];
        }
        t
    }

    #[test]
    fn labels() {
        let t = traj_from(&[0.0; 6], &[0, 0, 0, 0, 0, 1]);
        assert_eq!(failure_within_horizon(&t, 4), vec![0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let t = traj_from(&[0.0; 3], &[0, 0, 0]);
        assert_eq!(failure_within_horizon(&t, 4), vec![0.0; 3]);
    }

    #[test]
    fn learns_all_failure_and_all_safe_windows() {
        for (failed, check) in [(true, 0.95), (false, 0.05)] {
            let mut c = critic(7);
            let mut rng = stream(8, Stream::Safety);
            for _ in 0..5 {
                c.observe(&episode(failed));
            }
            for _ in 0..40 {
                c.train(10, 16, &mut rng).unwrap();
            }
            for i in 0..3 {
                let p = c.predict(&[i as f64 * 0.5, 1.0, 0.0], false).unwrap();
                if failed {
                    assert!(p > check, "p = {p}");
                } else {
                    assert!(p < check, "p = {p}");
                }
            }
        }
    }

    #[test]
    fn window_keeps_recent_episodes() {
        let mut c = critic(9);
        for _ in 0..8 {
            c.observe(&episode(false));
        }
        assert_eq!(c.window_len(), 15);
    }

    #[test]
    fn empty_window_skips_and_augment_width() {
        let mut c = critic(10);
        let mut rng = stream(11, Stream::Safety);
        assert_eq!(c.train(3, 4, &mut rng).unwrap(), None);
        assert_eq!(c.augment(&[0.0, 1.0, 0.0]).unwrap().len(), 4);
    }
}
