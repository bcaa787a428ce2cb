use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{huber_loss, ForwardCache, Gradients, Mlp, OptimizerState};

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy action over the Q-network's outputs.
pub fn select_action<R: Rng + ?Sized>(
    qnet: &Mlp,
    obs_aug: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    let q = qnet.forward(obs_aug)?;
    if rng.gen::<f64>() < epsilon {
        Ok(rng.gen_range(0..q.len()))
    } else {
        Ok(argmax(&q))
    }
}

/// A replayed transition with augmentation already applied to both ends.
#[derive(Debug, Clone, Copy)]
pub struct QSample<'a> {
    pub input: &'a [f64],
    pub action: usize,
    pub reward: f64,
    pub cost: u8,
    pub next_input: &'a [f64],
    /// Episode ended by the environment. Truncated transitions are not
    /// terminal and bootstrap.
    pub terminal: bool,
}

/// Regression target with the cost folded into the reward as
/// `r - lambda * c`.
pub fn dqn_target(sample: &QSample<'_>, target_net: &Mlp, gamma: f64, lambda: f64) -> Result<f64> {
    let shaped = sample.reward - lambda * f64::from(sample.cost);
    if sample.terminal {
        return Ok(shaped);
    }
    let next = target_net.forward(sample.next_input)?;
    Ok(shaped + gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Reusable buffers for [`q_update`].
#[derive(Debug, Clone)]
pub struct QScratch {
    cache: ForwardCache,
    target_cache: ForwardCache,
    grads: Gradients,
}

impl QScratch {
    pub fn new(net: &Mlp) -> Self {
        Self {
            cache: ForwardCache::default(),
            target_cache: ForwardCache::default(),
            grads: Gradients::zeros_like(net),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QUpdateParams {
    pub gamma: f64,
    pub lambda: f64,
    pub huber_delta: f64,
}

/// One optimizer step of Huber regression of `Q(s)[a]` toward the target of
/// every sample. Returns the mean loss.
pub fn q_update(
    online: &mut Mlp,
    target_net: &Mlp,
    optimizer: &mut OptimizerState,
    batch: &[QSample<'_>],
    params: QUpdateParams,
    scratch: &mut QScratch,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty Q-update batch".into()));
    }
    let QScratch {
        cache,
        target_cache,
        grads,
    } = scratch;
    grads.zero();
    let mut grad_out = vec![0.0; online.output_dim()];
    let mut loss_sum = 0.0;
    for s in batch {
        let shaped = s.reward - params.lambda * f64::from(s.cost);
        let y = if s.terminal {
            shaped
        } else {
            target_net.forward_cached(s.next_input, target_cache)?;
            let max_next = target_cache
                .output
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            shaped + params.gamma * max_next
        };
        online.forward_cached(s.input, cache)?;
        if s.action >= grad_out.len() {
            return Err(Error::InvalidInput(format!("action {} out of range", s.action)));
        }
        let (loss, g) = huber_loss(cache.output[s.action], y, params.huber_delta);
        loss_sum += loss;
        grad_out.fill(0.0);
        grad_out[s.action] = g;
        online.backward_cached(cache, &grad_out, grads)?;
    }
    let mean = loss_sum / batch.len() as f64;
    if !mean.is_finite() {
        return Err(Error::NonFinite(format!("Q loss ({mean})")));
    }
    grads.scale(1.0 / batch.len() as f64);
    optimizer.step(online, grads)?;
    Ok(mean)
}
