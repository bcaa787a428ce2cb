//! The training loop shared by every agent kind.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{AgentKind, DqnConfig, Pipeline};
use super::dqn::{argmax, q_update, QSample, QScratch, QUpdateParams};
use super::lagrange::{lagrange_update, LagrangeState};
use super::replay::{ReplayBuffer, ReplayEntry};
use super::scalar_critic::ScalarCritic;
use crate::envs::IslandEnv;
use crate::error::{Error, Result};
use crate::mdp::{summarize, EpisodeMetrics, Trajectory, Transition};
use crate::nn::checkpoint::check_version;
use crate::nn::{AdamConfig, ForwardCache, Head, Mlp, NetCheckpoint, OptimizerState, CHECKPOINT_VERSION};
use crate::rng::{stream, SimRng, Stream};
use crate::s2c::{label_trajectory, S2CBuffer, S2CModel, SafetyConfig};
use rand::Rng;

/// Everything needed to train one agent with one seed.
#[derive(Debug, Clone)]
pub struct TrainSetup {
    pub kind: AgentKind,
    pub env: IslandEnv,
    pub dqn: DqnConfig,
    pub safety: SafetyConfig,
    pub seed: u64,
    pub total_steps: usize,
    /// Start from this S2C model instead of a fresh one. A model with its
    /// frozen flag set is used as-is and never trained.
    pub pretrained_s2c: Option<S2CModel>,
    /// Start the online and target Q-networks from these parameters.
    pub pretrained_q: Option<Mlp>,
    /// Env steps between aggregate curve points.
    pub curve_every: usize,
}

impl TrainSetup {
    pub fn new(kind: AgentKind, env: IslandEnv, seed: u64, total_steps: usize) -> Self {
        Self {
            kind,
            env,
            dqn: DqnConfig::default(),
            safety: SafetyConfig::default(),
            seed,
            total_steps,
            pretrained_s2c: None,
            pretrained_q: None,
            curve_every: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub episode: usize,
    /// Env step at which the episode ended.
    pub env_step: usize,
    pub metrics: EpisodeMetrics,
    pub epsilon: f64,
    pub lambda: f64,
    /// Latest representation-training loss: `None` for agents that do not
    /// train one, NaN while rounds are being skipped.
    pub s2c_loss: Option<f64>,
}

/// Progress snapshot taken every `curve_every` env steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub env_step: usize,
    pub episodes: usize,
    pub cumulative_failures: usize,
    pub cumulative_cost: f64,
    /// Success rate over the last [`ROLLING_WINDOW`] finished episodes.
    pub rolling_success: f64,
    pub rolling_return: f64,
}

pub const ROLLING_WINDOW: usize = 100;

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub kind: AgentKind,
    pub seed: u64,
    pub total_steps: usize,
    /// Cost incurred over every env step, including an unfinished final
    /// episode.
    pub total_cost: f64,
    pub episodes: Vec<EpisodeRecord>,
    pub curve: Vec<CurvePoint>,
    pub q_net: Mlp,
    pub s2c: Option<S2CModel>,
}

enum Representation {
    None,
    Distribution {
        model: S2CModel,
        buffer: S2CBuffer,
        flush_on_sync: bool,
    },
    Scalar(ScalarCritic),
}

impl Representation {
    fn version(&self) -> u64 {
        match self {
            Representation::None => 0,
            Representation::Distribution { model, .. } => model.snapshot_version(),
            Representation::Scalar(c) => c.snapshot_version(),
        }
    }

    /// Features appended to a raw observation, from the frozen snapshot.
    fn extra(&self, obs: &[f64], cache: &mut ForwardCache, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        match self {
            Representation::None => {}
            Representation::Distribution { model, .. } => {
                model.snapshot_net().forward_cached(obs, cache)?;
                out.extend_from_slice(&cache.output);
            }
            Representation::Scalar(c) => out.push(c.predict(obs, true)?),
        }
        Ok(())
    }
}

/// A DQN agent of a given kind together with its safety representation.
pub struct Agent {
    kind: AgentKind,
    dqn: DqnConfig,
    safety: SafetyConfig,
    online: Mlp,
    target: Mlp,
    optimizer: OptimizerState,
    replay: ReplayBuffer,
    repr: Representation,
    lagrange: Option<LagrangeState>,
    init_rng: SimRng,
    explore_rng: SimRng,
    replay_rng: SimRng,
    safety_rng: SimRng,
    last_repr_loss: Option<f64>,
    scratch: QScratch,
    repr_cache: ForwardCache,
    q_cache: ForwardCache,
    indices: Vec<usize>,
    inputs: Vec<Vec<f64>>,
    extra_buf: Vec<f64>,
}

impl Agent {
    pub fn new(setup: &TrainSetup) -> Result<Self> {
        let TrainSetup {
            kind,
            ref env,
            ref dqn,
            ref safety,
            seed,
            ..
        } = *setup;
        dqn.validate()?;
        let mut init_rng = stream(seed, Stream::Init);
        let mut safety_rng = stream(seed, Stream::Safety);
        let include_gt = kind.pipeline() == Pipeline::GroundTruth;
        let raw_dim = env.obs_dim(include_gt);

        let repr = match kind.pipeline() {
            Pipeline::Distribution => {
                safety.validate(env.config().max_steps)?;
                let model = match &setup.pretrained_s2c {
                    Some(m) => {
                        if m.obs_dim() != raw_dim {
                            return Err(Error::Dimension {
                                what: "pretrained S2C observation".into(),
                                expected: raw_dim,
                                actual: m.obs_dim(),
                            });
                        }
                        m.clone()
                    }
                    None => S2CModel::new(raw_dim, safety.clone(), &mut safety_rng)?,
                };
                let capacity = model.config().buffer_capacity;
                Representation::Distribution {
                    model,
                    buffer: S2CBuffer::new(capacity),
                    flush_on_sync: kind == AgentKind::V2OnPolicy,
                }
            }
            Pipeline::Scalar => {
                safety.validate(env.config().max_steps)?;
                Representation::Scalar(ScalarCritic::new(
                    raw_dim,
                    &safety.hidden,
                    safety.learning_rate,
                    safety.horizon,
                    dqn.v1_window_episodes,
                    &mut safety_rng,
                )?)
            }
            Pipeline::Raw | Pipeline::GroundTruth => Representation::None,
        };
        let extra_width = match &repr {
            Representation::Distribution { model, .. } => model.num_bins(),
            Representation::Scalar(_) => 1,
            Representation::None => 0,
        };
        let q_dims = q_dims(raw_dim + extra_width, dqn, env.num_actions());
        let online = match &setup.pretrained_q {
            Some(q) => {
                if q.dims() != q_dims {
                    return Err(Error::Dimension {
                        what: "pretrained Q-network input".into(),
                        expected: q_dims[0],
                        actual: q.input_dim(),
                    });
                }
                q.clone()
            }
            None => Mlp::new(&q_dims, Head::Linear, &mut init_rng)?,
        };
        debug_assert_eq!(online.input_dim(), raw_dim + kind.augmentation_width(safety.num_bins()));
        let optimizer = OptimizerState::new(
            &online,
            AdamConfig {
                learning_rate: dqn.learning_rate,
                ..AdamConfig::default()
            },
        );
        Ok(Self {
            kind,
            dqn: dqn.clone(),
            safety: safety.clone(),
            target: online.clone(),
            scratch: QScratch::new(&online),
            online,
            optimizer,
            replay: ReplayBuffer::new(dqn.replay_capacity),
            repr,
            lagrange: kind.is_lagrangian().then(|| LagrangeState::new(&dqn.lagrange)),
            init_rng,
            explore_rng: stream(seed, Stream::Explore),
            replay_rng: stream(seed, Stream::Replay),
            safety_rng,
            last_repr_loss: None,
            repr_cache: ForwardCache::default(),
            q_cache: ForwardCache::default(),
            indices: Vec::new(),
            inputs: Vec::new(),
            extra_buf: Vec::new(),
        })
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn q_net(&self) -> &Mlp {
        &self.online
    }

    pub fn target_net(&self) -> &Mlp {
        &self.target
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lagrange.map_or(0.0, |l| l.lambda)
    }

    pub fn s2c(&self) -> Option<&S2CModel> {
        match &self.repr {
            Representation::Distribution { model, .. } => Some(model),
            _ => None,
        }
    }

    pub fn s2c_buffer_len(&self) -> Option<usize> {
        match &self.repr {
            Representation::Distribution { buffer, .. } => Some(buffer.len()),
            _ => None,
        }
    }

    /// Q-network input for a raw observation.
    pub fn q_input(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        self.repr.extra(obs, &mut self.repr_cache, &mut self.extra_buf)?;
        let mut v = Vec::with_capacity(obs.len() + self.extra_buf.len());
        v.extend_from_slice(obs);
        v.extend_from_slice(&self.extra_buf);
        Ok(v)
    }

    /// Epsilon-greedy action for a raw observation.
    pub fn act(&mut self, obs: &[f64], epsilon: f64) -> Result<usize> {
        let input = self.q_input(obs)?;
        if self.explore_rng.gen::<f64>() < epsilon {
            return Ok(self.explore_rng.gen_range(0..self.online.output_dim()));
        }
        self.online.forward_cached(&input, &mut self.q_cache)?;
        Ok(argmax(&self.q_cache.output))
    }

    pub fn remember(&mut self, entry: ReplayEntry) {
        self.replay.push(entry);
    }

    /// Labels and stores a finished episode for the representation and
    /// applies the dual update.
    pub fn end_episode(&mut self, traj: &Trajectory) -> Result<()> {
        match &mut self.repr {
            Representation::Distribution { model, buffer, .. } => {
                if !model.is_frozen() {
                    let labels = label_trajectory(traj, model.config().horizon)?;
                    buffer.ingest(traj, &labels)?;
                }
            }
            Representation::Scalar(c) => c.observe(traj),
            Representation::None => {}
        }
        if let Some(state) = self.lagrange {
            let cost = summarize(traj)?.episode_cost;
            self.lagrange = Some(lagrange_update(state, cost));
        }
        Ok(())
    }

    /// Cadenced work after env step `step` (1-based).
    pub fn after_step(&mut self, step: usize) -> Result<()> {
        let ready = self.replay.len() >= self.dqn.q_batch.max(self.dqn.learning_starts);
        if step.is_multiple_of(self.dqn.learn_every) && ready {
            self.learn()?;
        }
        if step.is_multiple_of(self.safety.train_every) {
            self.train_representation()?;
        }
        if step.is_multiple_of(self.safety.snapshot_every) {
            match &mut self.repr {
                Representation::Distribution { model, .. } if !model.is_frozen() => {
                    model.snapshot()
                }
                Representation::Scalar(c) => c.snapshot(),
                _ => {}
            }
        }
        // V2 trains on its buffer before the sync flushes it.
        if step.is_multiple_of(self.dqn.target_update_every) {
            self.target.clone_from(&self.online);
            if let Representation::Distribution {
                buffer,
                flush_on_sync: true,
                ..
            } = &mut self.repr
            {
                buffer.clear();
            }
        }
        if self.kind == AgentKind::DqnReset && step.is_multiple_of(self.dqn.reset_every) {
            self.periodic_reset()?;
        }
        Ok(())
    }

    fn train_representation(&mut self) -> Result<()> {
        let loss = match &mut self.repr {
            Representation::Distribution { model, buffer, .. } => {
                if model.is_frozen() {
                    return Ok(());
                }
                model.train_round(buffer, &mut self.safety_rng)?
            }
            Representation::Scalar(c) => c.train(
                self.safety.updates_per_round,
                self.safety.batch_size,
                &mut self.safety_rng,
            )?,
            Representation::None => return Ok(()),
        };
        self.last_repr_loss = Some(loss.unwrap_or(f64::NAN));
        Ok(())
    }

    /// Re-initializes both Q-networks and the optimizer moments. The replay
    /// buffer and the exploration schedule are kept.
    pub fn periodic_reset(&mut self) -> Result<()> {
        self.online = Mlp::new(&self.online.dims(), Head::Linear, &mut self.init_rng)?;
        self.target = self.online.clone();
        self.optimizer.reset();
        Ok(())
    }

    fn learn(&mut self) -> Result<()> {
        let n = self.dqn.q_batch;
        self.replay
            .sample_indices(n, &mut self.replay_rng, &mut self.indices);
        let version = self.repr.version();
        let has_extra = !matches!(self.repr, Representation::None);
        self.inputs.resize_with(2 * n, Vec::new);
        for (k, &i) in self.indices.iter().enumerate() {
            let entry = self.replay.get_mut(i);
            if has_extra {
                for (obs, slot) in [
                    (&entry.obs, &mut entry.extra),
                    (&entry.next_obs, &mut entry.next_extra),
                ] {
                    if slot.as_ref().is_none_or(|(v, _)| *v != version) {
                        let mut extra = Vec::new();
                        self.repr.extra(obs, &mut self.repr_cache, &mut extra)?;
                        *slot = Some((version, extra));
                    }
                }
            }
            let empty: &[f64] = &[];
            let extra = entry.extra.as_ref().map_or(empty, |(_, e)| e);
            let next_extra = entry.next_extra.as_ref().map_or(empty, |(_, e)| e);
            let input = &mut self.inputs[2 * k];
            input.clear();
            input.extend_from_slice(&entry.obs);
            input.extend_from_slice(extra);
            let next = &mut self.inputs[2 * k + 1];
            next.clear();
            next.extend_from_slice(&entry.next_obs);
            next.extend_from_slice(next_extra);
        }
        let batch: Vec<QSample<'_>> = self
            .indices
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let e = self.replay.get(i);
                QSample {
                    input: &self.inputs[2 * k],
                    action: e.action,
                    reward: e.reward,
                    cost: e.cost,
                    next_input: &self.inputs[2 * k + 1],
                    terminal: e.terminal,
                }
            })
            .collect();
        let params = QUpdateParams {
            gamma: self.dqn.gamma,
            lambda: self.lagrange.map_or(0.0, |l| l.lambda),
            huber_delta: self.dqn.huber_delta,
        };
        q_update(
            &mut self.online,
            &self.target,
            &mut self.optimizer,
            &batch,
            params,
            &mut self.scratch,
        )?;
        Ok(())
    }

    pub fn last_repr_loss(&self) -> Option<f64> {
        self.last_repr_loss
    }

    fn into_parts(self) -> (Mlp, Option<S2CModel>) {
        let s2c = match self.repr {
            Representation::Distribution { model, .. } => Some(model),
            _ => None,
        };
        (self.online, s2c)
    }
}

fn q_dims(input: usize, dqn: &DqnConfig, actions: usize) -> Vec<usize> {
    std::iter::once(input)
        .chain(dqn.hidden.iter().copied())
        .chain(std::iter::once(actions))
        .collect()
}

/// Runs one agent for `total_steps` env steps and returns its per-episode
/// log, progress curve and final networks.
pub fn train_agent(setup: TrainSetup) -> Result<TrainOutput> {
    if setup.total_steps == 0 {
        return Err(Error::validation("total_steps", "must be positive"));
    }
    if setup.curve_every == 0 {
        return Err(Error::validation("curve_every", "must be positive"));
    }
    let mut agent = Agent::new(&setup)?;
    let env = &setup.env;
    let include_gt = setup.kind.pipeline() == Pipeline::GroundTruth;
    let mut env_rng = stream(setup.seed, Stream::Env);

    let mut episodes = Vec::new();
    let mut curve = Vec::new();
    let mut recent: VecDeque<(bool, f64)> = VecDeque::with_capacity(ROLLING_WINDOW);
    let mut failures = 0usize;
    let mut total_cost = 0.0;

    let (mut state, first) = env.reset(&mut env_rng, include_gt)?;
    let mut obs: Arc<[f64]> = first.features.into();
    let mut traj = Trajectory::new();

    for step in 1..=setup.total_steps {
        let epsilon = setup.dqn.epsilon(step - 1);
        let action = agent.act(&obs, epsilon)?;
        let out = env.step_with_slip(&state, action, &mut env_rng)?;
        let next_obs: Arc<[f64]> = env.encode(&out.state, include_gt).features.into();
        total_cost += f64::from(out.cost);
        agent.remember(ReplayEntry::new(
            obs.clone(),
            action,
            out.reward,
            out.cost,
            next_obs.clone(),
            out.terminal,
            out.truncated,
        ));
        traj.transitions.push(Transition {
            obs: obs.to_vec(),
            action,
            reward: out.reward,
            cost: out.cost,
            next_obs: next_obs.to_vec(),
            terminal: out.terminal,
            truncated: out.truncated,
        });

        if out.terminal || out.truncated {
            traj.failed = out.terminal && out.cost == 1;
            traj.succeeded = out.terminal && out.cost == 0;
            agent.end_episode(&traj)?;
            let metrics = summarize(&traj)?;
            failures += usize::from(metrics.failed);
            if recent.len() == ROLLING_WINDOW {
                recent.pop_front();
            }
            recent.push_back((metrics.succeeded, metrics.episode_return));
            episodes.push(EpisodeRecord {
                seed: setup.seed,
                episode: episodes.len(),
                env_step: step,
                metrics,
                epsilon,
                lambda: agent.lambda(),
                s2c_loss: agent.last_repr_loss(),
            });
            traj = Trajectory::new();
            let (s, o) = env.reset(&mut env_rng, include_gt)?;
            state = s;
            obs = o.features.into();
        } else {
            state = out.state;
            obs = next_obs;
        }

        agent.after_step(step)?;

        if step % setup.curve_every == 0 {
            let n = recent.len().max(1) as f64;
            curve.push(CurvePoint {
                env_step: step,
                episodes: episodes.len(),
                cumulative_failures: failures,
                cumulative_cost: total_cost,
                rolling_success: recent.iter().filter(|r| r.0).count() as f64 / n,
                rolling_return: recent.iter().map(|r| r.1).sum::<f64>() / n,
            });
        }
    }

    let (q_net, s2c) = agent.into_parts();
    Ok(TrainOutput {
        kind: setup.kind,
        seed: setup.seed,
        total_steps: setup.total_steps,
        total_cost,
        episodes,
        curve,
        q_net,
        s2c,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentCheckpoint {
    version: u32,
    agent_kind: AgentKind,
    network: NetCheckpoint,
}

/// Writes a Q-network checkpoint tagged with its agent kind.
pub fn save_agent(path: impl AsRef<Path>, kind: AgentKind, q_net: &Mlp) -> Result<()> {
    let path = path.as_ref();
    let ck = AgentCheckpoint {
        version: CHECKPOINT_VERSION,
        agent_kind: kind,
        network: NetCheckpoint::from_net(q_net),
    };
    std::fs::write(path, serde_json::to_string(&ck)?).map_err(|e| Error::io(path, e))
}

pub fn load_agent(path: impl AsRef<Path>) -> Result<(AgentKind, Mlp)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ck: AgentCheckpoint = serde_json::from_str(&text)?;
    check_version(ck.version)?;
    Ok((ck.agent_kind, ck.network.to_net()?))
}
