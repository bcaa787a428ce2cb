use crate::error::{Error, Result};

const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NllLoss {
    pub loss: f64,
    /// Gradient with respect to the pre-softmax logits: `p - onehot(target)`.
    pub grad_logits: Vec<f64>,
    /// `p[target]` was below the log floor and got clamped.
    pub clamped: bool,
}

/// Negative log-likelihood of `target` under a softmax output.
pub fn nll_loss(pred_dist: &[f64], target: usize) -> Result<NllLoss> {
    if target >= pred_dist.len() {
        return Err(Error::InvalidInput(format!(
            "target bin {target} outside distribution of length {}",
            pred_dist.len()
        )));
    }
    let sum: f64 = pred_dist.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "prediction is not a distribution (sums to {sum})"
        )));
    }
    let p = pred_dist[target];
    let clamped = p < LOG_FLOOR;
    if clamped {
        log::debug!("nll: p[{target}] = {p} clamped to {LOG_FLOOR}");
    }
    let mut grad_logits = pred_dist.to_vec();
    grad_logits[target] -= 1.0;
    Ok(NllLoss {
        loss: -p.max(LOG_FLOOR).ln(),
        grad_logits,
        clamped,
    })
}

/// Huber loss and its derivative with respect to `pred`, which is clipped to
/// `[-delta, delta]`.
pub fn huber_loss(pred: f64, target: f64, delta: f64) -> (f64, f64) {
    debug_assert!(delta > 0.0);
    let err = pred - target;
    if err.abs() <= delta {
        (0.5 * err * err, err)
    } else {
        (delta * (err.abs() - 0.5 * delta), delta * err.signum())
    }
}

/// Binary cross-entropy on a sigmoid output `p` for label `y`; the gradient
/// is with respect to the logit.
pub fn bce_loss(p: f64, y: f64) -> (f64, f64) {
    let loss = -(y * p.max(LOG_FLOOR).ln() + (1.0 - y) * (1.0 - p).max(LOG_FLOOR).ln());
    (loss, p - y)
}
