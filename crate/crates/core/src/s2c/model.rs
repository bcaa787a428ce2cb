use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buffer::S2CBuffer;
use super::label::{bin_index, num_bins, SafetyLabel};
use crate::error::{Error, Result};
use crate::nn::checkpoint::check_version;
use crate::nn::{
    nll_loss, AdamConfig, ForwardCache, Gradients, Head, Mlp, NetCheckpoint, OptimizerState,
    CHECKPOINT_VERSION,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafetyConfig {
    /// Safety horizon: the largest steps-to-cost that is distinguished.
    pub horizon: u32,
    pub bin_width: u32,
    /// Give the safe value its own extra output instead of sharing the last
    /// bin with failures near the horizon.
    pub safe_bin: bool,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Environment steps between training rounds.
    pub train_every: usize,
    pub updates_per_round: usize,
    pub learning_rate: f64,
    /// Environment steps between refreshes of the frozen snapshot.
    pub snapshot_every: usize,
    pub hidden: Vec<usize>,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            horizon: 40,
            bin_width: 4,
            safe_bin: false,
            buffer_capacity: 50_000,
            batch_size: 512,
            train_every: 500,
            updates_per_round: 50,
            learning_rate: 1e-3,
            snapshot_every: 2_000,
            hidden: vec![64, 64],
        }
    }
}

impl SafetyConfig {
    /// Width of the predicted distribution.
    pub fn num_bins(&self) -> usize {
        num_bins(self.horizon, self.bin_width) + usize::from(self.safe_bin)
    }

    /// Checks the config against the episode horizon of the environment.
    pub fn validate(&self, episode_horizon: usize) -> Result<()> {
        let field = |f: &str, m: String| Err(Error::validation(format!("safety.{f}"), m));
        if self.horizon == 0 {
            return field("horizon", "must be positive".into());
        }
        if self.bin_width == 0 || !self.horizon.is_multiple_of(self.bin_width) {
            return field(
                "bin_width",
                format!("{} does not divide horizon {}", self.bin_width, self.horizon),
            );
        }
        if num_bins(self.horizon, self.bin_width) < 2 {
            return field("bin_width", "need at least two bins".into());
        }
        if self.horizon as usize > episode_horizon {
            return field(
                "horizon",
                format!("{} exceeds the episode horizon {episode_horizon}", self.horizon),
            );
        }
        for (name, v) in [
            ("buffer_capacity", self.buffer_capacity),
            ("batch_size", self.batch_size),
            ("train_every", self.train_every),
            ("updates_per_round", self.updates_per_round),
            ("snapshot_every", self.snapshot_every),
        ] {
            if v == 0 {
                return field(name, "must be positive".into());
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return field("learning_rate", "must be a positive number".into());
        }
        if self.hidden.contains(&0) {
            return field("hidden", "layer widths must be positive".into());
        }
        Ok(())
    }

    /// Output index trained for `label`.
    pub fn target_bin(&self, label: SafetyLabel) -> Result<usize> {
        if self.safe_bin && label.delta() == self.horizon {
            return Ok(num_bins(self.horizon, self.bin_width));
        }
        bin_index(label.delta(), self.bin_width, self.horizon)
    }

    fn layer_dims(&self, obs_dim: usize) -> Vec<usize> {
        std::iter::once(obs_dim)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(self.num_bins()))
            .collect()
    }
}

/// A point on the probability simplex over steps-to-cost bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyDistribution {
    pub probs: Vec<f64>,
}

impl SafetyDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|p| p.is_nan() || *p < 0.0) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "not a probability distribution: {probs:?}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(bins: usize) -> Self {
        Self {
            probs: vec![1.0 / bins as f64; bins],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Most likely bin; ties go to the lower index.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// `[obs || dist]`.
pub fn augment(obs: &[f64], dist: &SafetyDistribution) -> Vec<f64> {
    let mut out = Vec::with_capacity(obs.len() + dist.len());
    out.extend_from_slice(obs);
    out.extend_from_slice(&dist.probs);
    out
}

/// Steps-to-cost model: a live network trained on the buffer and a frozen
/// snapshot used to augment observations.
#[derive(Debug, Clone)]
pub struct S2CModel {
    config: SafetyConfig,
    live: Mlp,
    snapshot: Mlp,
    optimizer: OptimizerState,
    /// Parameters are locked (transferred model); training is refused.
    frozen: bool,
    snapshot_version: u64,
    cache: ForwardCache,
    grads: Gradients,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct S2CCheckpoint {
    version: u32,
    safety: SafetyConfig,
    frozen: bool,
    live: NetCheckpoint,
    snapshot: NetCheckpoint,
}

impl S2CModel {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, config: SafetyConfig, rng: &mut R) -> Result<Self> {
        let live = Mlp::new(&config.layer_dims(obs_dim), Head::Softmax, rng)?;
        Ok(Self::from_nets(config, live.clone(), live, false))
    }

    /// All-zero parameters; predicts the uniform distribution everywhere.
    pub fn zeros(obs_dim: usize, config: SafetyConfig) -> Result<Self> {
        let live = Mlp::zeros(&config.layer_dims(obs_dim), Head::Softmax)?;
        Ok(Self::from_nets(config, live.clone(), live, false))
    }

    fn from_nets(config: SafetyConfig, live: Mlp, snapshot: Mlp, frozen: bool) -> Self {
        let optimizer = OptimizerState::new(
            &live,
            AdamConfig {
                learning_rate: config.learning_rate,
                ..AdamConfig::default()
            },
        );
        let grads = Gradients::zeros_like(&live);
        Self {
            config,
            live,
            snapshot,
            optimizer,
            frozen,
            snapshot_version: 0,
            cache: ForwardCache::default(),
            grads,
        }
    }

    pub fn config(&self) -> &SafetyConfig {
        &self.config
    }

    pub fn num_bins(&self) -> usize {
        self.config.num_bins()
    }

    pub fn obs_dim(&self) -> usize {
        self.live.input_dim()
    }

    pub fn live_net(&self) -> &Mlp {
        &self.live
    }

    pub fn snapshot_net(&self) -> &Mlp {
        &self.snapshot
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    /// Incremented by every [`Self::snapshot`]; lets callers cache
    /// augmentations computed with the current snapshot.
    pub fn snapshot_version(&self) -> u64 {
        self.snapshot_version
    }

    /// One training round of `updates_per_round` minibatch steps on the
    /// negative log-likelihood of the labelled bin. Returns the mean loss, or
    /// `None` when the buffer holds fewer than `batch_size` entries.
    pub fn train_round<R: Rng + ?Sized>(
        &mut self,
        buffer: &S2CBuffer,
        rng: &mut R,
    ) -> Result<Option<f64>> {
        if self.frozen {
            return Err(Error::Contract("S2C model is frozen".into()));
        }
        if buffer.len() < self.config.batch_size || buffer.is_empty() {
            log::debug!(
                "s2c round skipped: {} buffered < batch {}",
                buffer.len(),
                self.config.batch_size
            );
            return Ok(None);
        }
        let mut total = 0.0;
        for _ in 0..self.config.updates_per_round {
            total += self.train_batch(buffer, rng)?;
        }
        Ok(Some(total / self.config.updates_per_round as f64))
    }

    fn train_batch<R: Rng + ?Sized>(&mut self, buffer: &S2CBuffer, rng: &mut R) -> Result<f64> {
        let batch = self.config.batch_size;
        self.grads.zero();
        let mut loss_sum = 0.0;
        for _ in 0..batch {
            let (obs, label) = buffer.sample(rng);
            let target = self.config.target_bin(label)?;
            self.live.forward_cached(obs, &mut self.cache)?;
            let nll = nll_loss(&self.cache.output, target)?;
            loss_sum += nll.loss;
            self.live
                .backward_cached(&self.cache, &nll.grad_logits, &mut self.grads)?;
        }
        self.grads.scale(1.0 / batch as f64);
        self.optimizer.step(&mut self.live, &self.grads)?;
        let mean = loss_sum / batch as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite("S2C training loss".into()));
        }
        Ok(mean)
    }

    pub fn predict(&self, obs: &[f64], use_frozen: bool) -> Result<SafetyDistribution> {
        let net = if use_frozen { &self.snapshot } else { &self.live };
        Ok(SafetyDistribution {
            probs: net.forward(obs)?,
        })
    }

    /// Augmentation used by agents: always the frozen snapshot.
    pub fn augment(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(augment(obs, &self.predict(obs, true)?))
    }

    pub fn snapshot(&mut self) {
        self.snapshot.clone_from(&self.live);
        self.snapshot_version += 1;
    }

    /// Parameters of both networks, for freeze checks.
    pub fn params(&self) -> Vec<f64> {
        self.live.params().chain(self.snapshot.params()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let ck = S2CCheckpoint {
            version: CHECKPOINT_VERSION,
            safety: self.config.clone(),
            frozen: self.frozen,
            live: NetCheckpoint::from_net(&self.live),
            snapshot: NetCheckpoint::from_net(&self.snapshot),
        };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: S2CCheckpoint = serde_json::from_str(text)?;
        check_version(ck.version)?;
        let live = ck.live.to_net()?;
        let snapshot = ck.snapshot.to_net()?;
        let expected = ck.safety.layer_dims(live.input_dim());
        if live.dims() != expected || snapshot.dims() != expected {
            return Err(Error::Checkpoint(format!(
                "network dims {:?} do not match safety config {:?}",
                live.dims(),
                expected
            )));
        }
        if live.head() != Head::Softmax {
            return Err(Error::Checkpoint("S2C network must have a softmax head".into()));
        }
        Ok(Self::from_nets(ck.safety, live, snapshot, ck.frozen))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Loads a model and checks it accepts observations of `obs_dim`.
    pub fn load_for(path: impl AsRef<Path>, obs_dim: usize) -> Result<Self> {
        let model = Self::load(path)?;
        if model.obs_dim() != obs_dim {
            return Err(Error::Dimension {
                what: "S2C checkpoint observation".into(),
                expected: obs_dim,
                actual: model.obs_dim(),
            });
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use rand::Rng;

    fn small_config() -> SafetyConfig {
        SafetyConfig {
            horizon: 8,
            bin_width: 2,
            batch_size: 4,
            updates_per_round: 5,
            hidden: vec![8],
            ..SafetyConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        let ok = SafetyConfig::default();
        ok.validate(100).unwrap();
        assert_eq!(ok.num_bins(), 10);
        let bad = SafetyConfig {
            bin_width: 3,
            ..ok.clone()
        };
        assert!(matches!(bad.validate(100), Err(Error::Validation { field, .. }) if field == "safety.bin_width"));
        let bad = SafetyConfig {
            bin_width: 40,
            ..ok.clone()
        };
        assert!(bad.validate(100).is_err());
        assert!(ok.validate(30).is_err());
        let extra = SafetyConfig {
            safe_bin: true,
            ..ok
        };
        assert_eq!(extra.num_bins(), 11);
        assert_eq!(extra.target_bin(SafetyLabel::new(40, 40).unwrap()).unwrap(), 10);
        assert_eq!(extra.target_bin(SafetyLabel::new(39, 40).unwrap()).unwrap(), 9);
    }

    #[test]
    fn zero_model_predicts_uniform() {
        let m = S2CModel::zeros(252, SafetyConfig::default()).unwrap();
        let obs = vec![0.5; 252];
        for frozen in [true, false] {
            let d = m.predict(&obs, frozen).unwrap();
            assert_eq!(d.len(), 10);
            for p in &d.probs {
                approx::assert_relative_eq!(*p, 0.1, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn augment_concatenates() {
        let obs: Vec<f64> = (0..252).map(f64::from).collect();
        let a = augment(&obs, &SafetyDistribution::uniform(10));
        assert_eq!(a.len(), 262);
        assert_eq!(a[..252], obs[..]);
        assert!(a[252..].iter().all(|&p| p == 0.1));
        let mut other = obs.clone();
        other[3] += 1.0;
        assert_ne!(augment(&other, &SafetyDistribution::uniform(10)), a);
    }

    #[test]
    fn distribution_validation_and_mode() {
        assert!(SafetyDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(SafetyDistribution::new(vec![-0.1, 1.1]).is_err());
        let d = SafetyDistribution::new(vec![0.2, 0.4, 0.4]).unwrap();
        assert_eq!(d.mode(), 1);
    }

    #[test]
    fn overfits_a_single_point() {
        let mut rng = stream(1, Stream::Safety);
        let cfg = SafetyConfig {
            learning_rate: 1e-2,
            ..small_config()
        };
        let mut m = S2CModel::new(6, cfg, &mut rng).unwrap();
        let mut buf = S2CBuffer::new(10);
        for _ in 0..6 {
            buf.push(vec![1.0, 0.0, 0.5, 0.0, 0.0, 1.0], SafetyLabel::new(3, 8).unwrap());
        }
        let mut losses = Vec::new();
        for _ in 0..50 {
            losses.push(m.train_round(&buf, &mut rng).unwrap().unwrap());
        }
        for w in losses.windows(2) {
            assert!(w[1] < w[0], "{losses:?}");
        }
        assert!(*losses.last().unwrap() < 0.05, "{losses:?}");
        let d = m.predict(buf.get(0).unwrap().0, false).unwrap();
        assert_eq!(d.mode(), 1);
    }

    #[test]
    fn empty_buffer_skips() {
        let mut rng = stream(2, Stream::Safety);
        let mut m = S2CModel::new(3, small_config(), &mut rng).unwrap();
        assert_eq!(m.train_round(&S2CBuffer::new(5), &mut rng).unwrap(), None);
    }

    #[test]
    fn snapshot_contract() {
        let mut rng = stream(3, Stream::Safety);
        let mut m = S2CModel::new(4, small_config(), &mut rng).unwrap();
        let mut buf = S2CBuffer::new(16);
        for i in 0..16 {
            let obs: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
            buf.push(obs, SafetyLabel::new(i % 8 + 1, 8).unwrap());
        }
        let x = [0.3, 0.1, 0.9, 0.2];
        m.train_round(&buf, &mut rng).unwrap();
        m.snapshot();
        assert_eq!(m.predict(&x, true).unwrap(), m.predict(&x, false).unwrap());
        let frozen_before = m.snapshot_net().clone();
        m.train_round(&buf, &mut rng).unwrap();
        assert_eq!(m.snapshot_net(), &frozen_before);
        assert_ne!(m.predict(&x, true).unwrap(), m.predict(&x, false).unwrap());
        assert_eq!(m.snapshot_version(), 1);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s2c.json");
        let mut rng = stream(4, Stream::Safety);
        let mut m = S2CModel::new(5, small_config(), &mut rng).unwrap();
        let mut buf = S2CBuffer::new(8);
        for i in 0..8 {
            buf.push(vec![i as f64 / 8.0; 5], SafetyLabel::new(i + 1, 8).unwrap());
        }
        m.train_round(&buf, &mut rng).unwrap();
        m.save(&path).unwrap();
        let back = S2CModel::load_for(&path, 5).unwrap();
        let x = [0.1, 0.7, 0.0, 0.2, 1.0];
        for frozen in [true, false] {
            assert_eq!(back.predict(&x, frozen).unwrap(), m.predict(&x, frozen).unwrap());
        }
        let err = S2CModel::load_for(&path, 7).unwrap_err();
        assert!(
            matches!(err, Error::Dimension { expected: 7, actual: 5, .. }),
            "{err}"
        );
    }

    #[test]
    fn frozen_model_refuses_training() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s2c.json");
        let mut m = S2CModel::zeros(3, small_config()).unwrap();
        m.set_frozen(true);
        m.save(&path).unwrap();
        let mut back = S2CModel::load(&path).unwrap();
        assert!(back.is_frozen());
        let mut buf = S2CBuffer::new(8);
        for _ in 0..8 {
            buf.push(vec![0.0; 3], SafetyLabel::new(1, 8).unwrap());
        }
        let mut rng = stream(5, Stream::Safety);
        assert!(matches!(back.train_round(&buf, &mut rng), Err(Error::Contract(_))));
    }

    #[test]
    fn version_mismatch_rejected() {
        let m = S2CModel::zeros(3, small_config()).unwrap();
        let text = m.to_json().unwrap().replacen("\"version\":1", "\"version\":2", 1);
        assert!(matches!(S2CModel::from_json(&text), Err(Error::Version { found: 2, .. })));
    }
}
