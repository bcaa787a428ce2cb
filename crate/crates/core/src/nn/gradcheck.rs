//! Finite-difference verification of [`Mlp::backward_cached`].
//!
//! Each parameter is perturbed by `±h` and the central difference of the
//! loss is compared against the analytic gradient. The relative error of a
//! parameter is `|a - n| / max(|a|, |n|, 1e-6)`, so gradients below `1e-6`
//! are effectively compared in absolute terms.
//!
//! ReLU is not differentiable at zero. Before checking, hidden units whose
//! pre-activation lies within [`KINK_MARGIN`] of zero have their bias
//! shifted out of that band so no perturbation crosses a kink.

use serde::Serialize;

use super::loss::{bce_loss, huber_loss, nll_loss};
use super::mlp::{ForwardCache, Gradients, Head, Mlp};
use crate::error::{Error, Result};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const KINK_MARGIN: f64 = 1e-3;
const REL_FLOOR: f64 = 1e-6;

/// Scalar loss attached to the network output for checking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CheckLoss {
    /// Softmax head, negative log-likelihood of `target`.
    Nll { target: usize },
    /// Linear head, Huber regression of output `output` toward `target`.
    Huber {
        output: usize,
        target: f64,
        delta: f64,
    },
    /// Linear head, squared error of output `output`.
    Mse { output: usize, target: f64 },
    /// Sigmoid head, binary cross-entropy of output 0.
    Bce { label: f64 },
}

impl CheckLoss {
    fn expected_head(&self) -> Head {
        match self {
            CheckLoss::Nll { .. } => Head::Softmax,
            CheckLoss::Huber { .. } | CheckLoss::Mse { .. } => Head::Linear,
            CheckLoss::Bce { .. } => Head::Sigmoid,
        }
    }

    /// Loss value and its gradient with respect to the logits.
    pub fn evaluate(&self, output: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; output.len()];
        let loss = match *self {
            CheckLoss::Nll { target } => {
                let l = nll_loss(output, target)?;
                grad = l.grad_logits;
                l.loss
            }
            CheckLoss::Huber {
                output: k,
                target,
                delta,
            } => {
                let (l, g) = huber_loss(output[k], target, delta);
                grad[k] = g;
                l
            }
            CheckLoss::Mse { output: k, target } => {
                let err = output[k] - target;
                grad[k] = 2.0 * err;
                err * err
            }
            CheckLoss::Bce { label } => {
                let (l, g) = bce_loss(output[0], label);
                grad[0] = g;
                l
            }
        };
        Ok((loss, grad))
    }

    fn value(&self, net: &Mlp, input: &[f64]) -> Result<f64> {
        Ok(self.evaluate(&net.forward(input)?)?.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ParamRef {
    Weight { row: usize, col: usize },
    Bias { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamError {
    pub layer: usize,
    pub param: ParamRef,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub checked: usize,
    /// Worst parameter of each layer.
    pub per_layer: Vec<ParamError>,
    pub passed: bool,
}

pub fn analytic_gradients(net: &Mlp, loss: &CheckLoss, input: &[f64]) -> Result<Gradients> {
    let mut cache = ForwardCache::default();
    net.forward_cached(input, &mut cache)?;
    let (_, grad_logits) = loss.evaluate(&cache.output)?;
    let mut grads = Gradients::zeros_like(net);
    net.backward_cached(&cache, &grad_logits, &mut grads)?;
    Ok(grads)
}

/// Copy of `net` whose hidden pre-activations for `input` are at least
/// `margin` away from zero.
pub fn nudge_away_from_kinks(net: &Mlp, input: &[f64], margin: f64) -> Result<Mlp> {
    let mut net = net.clone();
    let hidden = net.layers().len() - 1;
    for l in 0..hidden {
        let mut cache = ForwardCache::default();
        net.forward_cached(input, &mut cache)?;
        let x = cache.acts[l].clone();
        let layer = &mut net.layers_mut()[l];
        for o in 0..layer.outputs {
            let z = layer.biases[o]
                + x.iter()
                    .enumerate()
                    .map(|(i, &xi)| xi * layer.weight(i, o))
                    .sum::<f64>();
            if z.abs() < margin {
                layer.biases[o] += if z >= 0.0 { 2.0 * margin } else { -2.0 * margin };
            }
        }
    }
    Ok(net)
}

/// Compares `analytic` against central differences of `loss` at `input`.
pub fn compare(
    net: &Mlp,
    loss: &CheckLoss,
    input: &[f64],
    analytic: &Gradients,
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if net.head() != loss.expected_head() {
        return Err(Error::InvalidInput(format!(
            "{loss:?} needs a {:?} head, network has {:?}",
            loss.expected_head(),
            net.head()
        )));
    }
    let mut probe = net.clone();
    let mut per_layer: Vec<Option<ParamError>> = vec![None; net.layers().len()];
    let mut k = 0;
    for (l, layer) in net.layers().iter().enumerate() {
        let g = &analytic.layers[l];
        let refs = (0..layer.weights.len())
            .map(|i| {
                (
                    ParamRef::Weight {
                        row: i / layer.outputs,
                        col: i % layer.outputs,
                    },
                    g.weights[i],
                )
            })
            .chain((0..layer.biases.len()).map(|i| (ParamRef::Bias { index: i }, g.biases[i])));
        for (param, a) in refs {
            let original = *probe.param_mut(k);
            *probe.param_mut(k) = original + h;
            let plus = loss.value(&probe, input)?;
            *probe.param_mut(k) = original - h;
            let minus = loss.value(&probe, input)?;
            *probe.param_mut(k) = original;
            k += 1;

            let n = (plus - minus) / (2.0 * h);
            let rel_error = (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR);
            let worst = &mut per_layer[l];
            if worst.as_ref().is_none_or(|w| rel_error > w.rel_error) {
                *worst = Some(ParamError {
                    layer: l,
                    param,
                    analytic: a,
                    numeric: n,
                    rel_error,
                });
            }
        }
    }
    let per_layer: Vec<ParamError> = per_layer.into_iter().flatten().collect();
    let max_rel_error = per_layer.iter().map(|p| p.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_rel_error,
        tolerance,
        checked: k,
        per_layer,
        passed: max_rel_error <= tolerance,
    })
}

/// Nudges `net` off ReLU kinks, then checks every parameter.
pub fn grad_check(
    net: &Mlp,
    loss: &CheckLoss,
    input: &[f64],
    tolerance: f64,
) -> Result<GradCheckReport> {
    let net = nudge_away_from_kinks(net, input, KINK_MARGIN)?;
    let analytic = analytic_gradients(&net, loss, input)?;
    compare(&net, loss, input, &analytic, DEFAULT_STEP, tolerance)
}
