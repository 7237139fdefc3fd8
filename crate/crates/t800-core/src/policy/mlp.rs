//! Multilayer perceptron inference: sigmoid hidden layers, softmax output.
//!
//! The struct supports arbitrary layer shapes so the trainer and the
//! gradient checker can build small networks; the filtering policy shape
//! (16 inputs, two hidden layers of 16, 2 outputs) is enforced when a model
//! is loaded into the engine via [`MlpModel::validate_policy_shape`].

use serde::{Deserialize, Serialize};

use super::linear::sigmoid;
use super::{Class, Policy, PolicyError, POLICY_CODE_MLP};

/// Dense feed-forward network. `weights[l][o][i]` is the weight from input
/// `i` to output `o` of layer `l`; `biases[l][o]` its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub dims: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

/// Policy hidden width mandated for the filter engine.
pub const POLICY_HIDDEN: usize = 16;

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

impl MlpModel {
    /// Zero-initialized network with the given layer dims.
    pub fn zeroed(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "network needs input and output layers");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 1..dims.len() {
            weights.push(vec![vec![0.0; dims[l - 1]]; dims[l]]);
            biases.push(vec![0.0; dims[l]]);
        }
        Self {
            dims: dims.to_vec(),
            weights,
            biases,
        }
    }

    pub fn input_len(&self) -> usize {
        self.dims[0]
    }

    pub fn output_len(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Structural consistency of dims vs weight/bias shapes.
    pub fn validate(&self) -> Result<(), String> {
        if self.dims.len() < 2 {
            return Err("network needs at least input and output layers".into());
        }
        if self.weights.len() != self.dims.len() - 1 || self.biases.len() != self.dims.len() - 1 {
            return Err("layer count does not match dims".into());
        }
        for l in 0..self.weights.len() {
            if self.weights[l].len() != self.dims[l + 1] || self.biases[l].len() != self.dims[l + 1] {
                return Err(format!("layer {l} output width mismatch"));
            }
            for row in &self.weights[l] {
                if row.len() != self.dims[l] {
                    return Err(format!("layer {l} input width mismatch"));
                }
            }
        }
        Ok(())
    }

    /// The fixed policy architecture: [16, 16, 16, 2].
    pub fn validate_policy_shape(&self, feature_len: usize) -> Result<(), String> {
        self.validate()?;
        let expected = vec![feature_len, POLICY_HIDDEN, POLICY_HIDDEN, 2];
        if self.dims != expected {
            return Err(format!(
                "policy MLP must have dims {expected:?}, found {:?}",
                self.dims
            ));
        }
        Ok(())
    }

    /// Pre-activation outputs of the final layer (logits).
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>, PolicyError> {
        if x.len() != self.input_len() {
            return Err(PolicyError::DimensionMismatch {
                expected: self.input_len(),
                got: x.len(),
            });
        }
        let mut act = x.to_vec();
        for l in 0..self.weights.len() {
            let mut z: Vec<f64> = self.biases[l].clone();
            for (o, row) in self.weights[l].iter().enumerate() {
                let mut acc = z[o];
                for (w, a) in row.iter().zip(&act) {
                    acc += w * a;
                }
                z[o] = acc;
            }
            if l + 1 == self.weights.len() {
                return Ok(z);
            }
            act = z.into_iter().map(sigmoid).collect();
        }
        unreachable!("network has at least one layer");
    }

    /// Softmax class probabilities.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, PolicyError> {
        Ok(softmax(&self.logits(x)?))
    }

    /// Signed logit margin (malicious minus benign). Positive means the
    /// model favors malicious.
    pub fn logit_margin(&self, x: &[f64]) -> Result<f64, PolicyError> {
        let z = self.logits(x)?;
        Ok(z[1] - z[0])
    }

    /// Argmax of the 2-class softmax; an exact tie resolves to benign.
    pub fn classify(&self, x: &[f64]) -> Result<Class, PolicyError> {
        let p = self.forward(x)?;
        Ok(if p[1] > p[0] { Class::Malicious } else { Class::Benign })
    }
}

impl Policy for MlpModel {
    fn kind(&self) -> &'static str {
        "mlp"
    }

    fn classify(&self, x: &[f64]) -> Result<Class, PolicyError> {
        MlpModel::classify(self, x)
    }

    fn policy_code(&self) -> u8 {
        POLICY_CODE_MLP
    }

    fn scratch_bytes(&self) -> usize {
        // Two activation buffers of the widest layer.
        2 * 8 * self.dims.iter().copied().max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::FEATURE_LEN;

    #[test]
    fn zero_network_ties_to_benign() {
        let m = MlpModel::zeroed(&[FEATURE_LEN, 16, 16, 2]);
        let p = m.forward(&[0.3; FEATURE_LEN]).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert_eq!(m.classify(&[0.3; FEATURE_LEN]).unwrap(), Class::Benign);
    }

    #[test]
    fn output_bias_dominates_zero_weights() {
        let mut m = MlpModel::zeroed(&[FEATURE_LEN, 16, 16, 2]);
        m.biases[2] = vec![0.0, 10.0];
        // softmax(0, 10): second component e^10/(1+e^10) > 0.9999
        let p = m.forward(&[0.7; FEATURE_LEN]).unwrap();
        assert!(p[1] > 0.99);
        assert_eq!(m.classify(&[0.7; FEATURE_LEN]).unwrap(), Class::Malicious);
    }

    #[test]
    fn forward_matches_hand_computed_toy_network() {
        // 2 inputs -> 1 sigmoid hidden neuron -> 2 outputs.
        let m = MlpModel {
            dims: vec![2, 1, 2],
            weights: vec![vec![vec![1.0, -1.0]], vec![vec![2.0], vec![-2.0]]],
            biases: vec![vec![0.5], vec![0.1, -0.1]],
        };
        let x = [0.25, 0.75];
        // hidden z = 1*0.25 - 1*0.75 + 0.5 = 0.0 -> a = sigmoid(0) = 0.5
        // logits = [2*0.5 + 0.1, -2*0.5 - 0.1] = [1.1, -1.1]
        let z = m.logits(&x).unwrap();
        assert!((z[0] - 1.1).abs() < 1e-12);
        assert!((z[1] + 1.1).abs() < 1e-12);
        let p = m.forward(&x).unwrap();
        let e = (2.2_f64).exp();
        assert!((p[0] - e / (1.0 + e)).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_a_distribution() {
        let mut rng = crate::rng::SplitMix64::new(17);
        let m = {
            let mut m = MlpModel::zeroed(&[FEATURE_LEN, 16, 16, 2]);
            for layer in m.weights.iter_mut() {
                for row in layer.iter_mut() {
                    for w in row.iter_mut() {
                        *w = rng.next_range(-2.0, 2.0);
                    }
                }
            }
            m
        };
        for _ in 0..100 {
            let x: Vec<f64> = (0..FEATURE_LEN).map(|_| rng.next_f64()).collect();
            let p = m.forward(&x).unwrap();
            assert!(p.iter().all(|v| *v > 0.0 && *v < 1.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn policy_shape_enforced() {
        let good = MlpModel::zeroed(&[FEATURE_LEN, 16, 16, 2]);
        assert!(good.validate_policy_shape(FEATURE_LEN).is_ok());
        let bad = MlpModel::zeroed(&[FEATURE_LEN, 8, 2]);
        assert!(bad.validate_policy_shape(FEATURE_LEN).is_err());
    }
}
