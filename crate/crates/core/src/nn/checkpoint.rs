use serde::{Deserialize, Serialize};

use super::mlp::{Head, Layer, Mlp};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized network. `weights[l][i]` is the row of outgoing weights of
/// input `i` into layer `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetCheckpoint {
    pub version: u32,
    pub layer_dims: Vec<usize>,
    pub head: Head,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl NetCheckpoint {
    pub fn from_net(net: &Mlp) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            layer_dims: net.dims(),
            head: net.head(),
            weights: net
                .layers()
                .iter()
                .map(|l| l.weights.chunks(l.outputs).map(<[f64]>::to_vec).collect())
                .collect(),
            biases: net.layers().iter().map(|l| l.biases.clone()).collect(),
        }
    }

    pub fn to_net(&self) -> Result<Mlp> {
        check_version(self.version)?;
        let n = self.layer_dims.len().saturating_sub(1);
        if n == 0 || self.weights.len() != n || self.biases.len() != n {
            return Err(Error::Checkpoint(format!(
                "layer_dims {:?} disagree with {} weight and {} bias blocks",
                self.layer_dims,
                self.weights.len(),
                self.biases.len()
            )));
        }
        let layers = (0..n)
            .map(|l| {
                let (inputs, outputs) = (self.layer_dims[l], self.layer_dims[l + 1]);
                let rows = &self.weights[l];
                if rows.len() != inputs || rows.iter().any(|r| r.len() != outputs) {
                    return Err(Error::Checkpoint(format!(
                        "layer {l} weights are not {inputs}x{outputs}"
                    )));
                }
                Ok(Layer {
                    inputs,
                    outputs,
                    weights: rows.concat(),
                    biases: self.biases[l].clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_layers(layers, self.head)
    }
}

pub(crate) fn check_version(found: u32) -> Result<()> {
    if found == CHECKPOINT_VERSION {
        Ok(())
    } else {
        Err(Error::Version {
            found,
            expected: CHECKPOINT_VERSION,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn json_round_trip_is_bitwise(seed in any::<u64>(), hidden in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = Mlp::new(&[5, hidden, 3], Head::Softmax, &mut rng).unwrap();
            let text = serde_json::to_string(&NetCheckpoint::from_net(&net)).unwrap();
            let back: NetCheckpoint = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.to_net().unwrap(), net);
        }
    }

    #[test]
    fn rejects_bad_version_and_shapes() {
        let net = Mlp::zeros(&[2, 3], Head::Linear).unwrap();
        let mut ck = NetCheckpoint::from_net(&net);
        ck.version = 7;
        assert!(matches!(ck.to_net(), Err(Error::Version { found: 7, .. })));
        let mut ck = NetCheckpoint::from_net(&net);
        ck.layer_dims = vec![3, 3];
        assert!(matches!(ck.to_net(), Err(Error::Checkpoint(_))));
    }
}
