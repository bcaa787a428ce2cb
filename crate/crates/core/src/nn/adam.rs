use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected adaptive-moment optimizer state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    first: Gradients,
    second: Gradients,
    steps: u64,
}

impl OptimizerState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        Self {
            config,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Clears the moment estimates and the step count.
    pub fn reset(&mut self) {
        self.first.zero();
        self.second.zero();
        self.steps = 0;
    }

    /// Applies one update. Fails without touching `net` if any gradient is
    /// non-finite or shapes disagree.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers().len() {
            return Err(Error::Dimension {
                what: "gradient layers".into(),
                expected: net.layers().len(),
                actual: grads.layers.len(),
            });
        }
        for (l, (g, p)) in grads.layers.iter().zip(net.layers()).enumerate() {
            if g.weights.len() != p.weights.len() || g.biases.len() != p.biases.len() {
                return Err(Error::Dimension {
                    what: format!("gradient of layer {l}"),
                    expected: p.param_count(),
                    actual: g.param_count(),
                });
            }
            if let Some(i) = g.weights.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient of layer {l} weight ({}, {})",
                    i / g.outputs,
                    i % g.outputs
                )));
            }
            if let Some(i) = g.biases.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of layer {l} bias {i}")));
            }
        }

        self.steps += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.steps as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in net
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first.layers)
            .zip(&mut self.second.layers)
        {
            let params = p.weights.iter_mut().chain(p.biases.iter_mut());
            let gs = g.weights.iter().chain(&g.biases);
            let ms = m.weights.iter_mut().chain(m.biases.iter_mut());
            let vs = v.weights.iter_mut().chain(v.biases.iter_mut());
            for (((p, &g), m), v) in params.zip(gs).zip(ms).zip(vs) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// One optimizer update of `params` with `grads`.
pub fn adam_step(state: &mut OptimizerState, params: &mut Mlp, grads: &Gradients) -> Result<()> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::Head;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        Mlp::new(&[3, 4, 2], Head::Linear, &mut rng).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut n = net();
        let before = n.clone();
        let mut opt = OptimizerState::new(&n, AdamConfig::default());
        opt.step(&mut n, &Gradients::zeros_like(&before)).unwrap();
        assert_eq!(n, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut n = net();
        let before = n.clone();
        let mut grads = Gradients::zeros_like(&n);
        for l in &mut grads.layers {
            l.weights.fill(0.37);
            l.biases.fill(-2.5);
        }
        let cfg = AdamConfig::default();
        let mut opt = OptimizerState::new(&n, cfg);
        opt.step(&mut n, &grads).unwrap();
        // m_hat = g, v_hat = g^2 so the step is lr * g / (|g| + eps)
        for (l, (a, b)) in n.layers().iter().zip(before.layers()).enumerate() {
            for (x, y) in a.weights.iter().zip(&b.weights) {
                assert_relative_eq!(y - x, cfg.learning_rate * 0.37 / (0.37 + 1e-8), epsilon = 1e-15);
            }
            for (x, y) in a.biases.iter().zip(&b.biases) {
                assert_relative_eq!(x - y, cfg.learning_rate * 2.5 / (2.5 + 1e-8), epsilon = 1e-15);
            }
            assert!(l < 2);
        }
    }

    #[test]
    fn deterministic_replay() {
        let mut grads = Gradients::zeros_like(&net());
        grads.layers[0].weights[3] = 0.1;
        grads.layers[1].biases[1] = -0.3;
        let run = || {
            let mut n = net();
            let mut opt = OptimizerState::new(&n, AdamConfig::default());
            opt.step(&mut n, &grads).unwrap();
            opt.step(&mut n, &grads).unwrap();
            n
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_names_location() {
        let mut n = net();
        let before = n.clone();
        let mut grads = Gradients::zeros_like(&n);
        grads.layers[1].weights[5] = f64::NAN;
        let mut opt = OptimizerState::new(&n, AdamConfig::default());
        let err = opt.step(&mut n, &grads).unwrap_err();
        assert!(err.to_string().contains("layer 1 weight (2, 1)"), "{err}");
        assert_eq!(n, before);
        assert_eq!(opt.steps(), 0);
    }
}
