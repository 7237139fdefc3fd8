//! Per-layer symmetric int8 quantization of MLP weights.
//!
//! Weights quantize to `q = round(w / scale)` with `scale = max|w| / 127`
//! and zero point 0; biases are stored as 32-bit integers at the
//! accumulated scale `w_scale * x_scale`. Activations enter each layer
//! quantized at the fixed scale 1/127 (features and sigmoid outputs both
//! live in [0, 1]), the matrix product accumulates in i32, and activation
//! functions run on the dequantized pre-activations.

use serde::{Deserialize, Serialize};

use super::linear::sigmoid;
use super::mlp::{softmax, MlpModel};
use super::{Class, Policy, PolicyError, POLICY_CODE_MLP};

/// Fixed activation scale: inputs and hidden activations are in [0, 1].
pub const ACT_SCALE: f64 = 1.0 / 127.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantLayer {
    /// `weights_q[o][i]`, symmetric int8.
    pub weights_q: Vec<Vec<i8>>,
    pub w_scale: f64,
    pub w_zero_point: i8,
    /// Biases at the accumulated scale `w_scale * ACT_SCALE`.
    pub bias_q: Vec<i32>,
}

impl QuantLayer {
    pub fn dequantize_weight(&self, o: usize, i: usize) -> f64 {
        (self.weights_q[o][i] as f64 - self.w_zero_point as f64) * self.w_scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedMlpModel {
    pub dims: Vec<usize>,
    pub layers: Vec<QuantLayer>,
}

fn quantize_value(v: f64, scale: f64) -> i8 {
    let q = (v / scale).round();
    q.clamp(-127.0, 127.0) as i8
}

/// Quantize every layer of a float MLP. A layer whose weights are all zero
/// has no range to derive a scale from; it degrades to scale 1 with every
/// quantized value at the zero point, which reproduces the zeros exactly.
pub fn quantize_mlp(m: &MlpModel) -> QuantizedMlpModel {
    let layers = m
        .weights
        .iter()
        .zip(&m.biases)
        .map(|(w, b)| {
            let max_abs = w
                .iter()
                .flat_map(|row| row.iter())
                .fold(0.0_f64, |acc, v| acc.max(v.abs()));
            let w_scale = if max_abs == 0.0 { 1.0 } else { max_abs / 127.0 };
            let weights_q = w
                .iter()
                .map(|row| row.iter().map(|v| quantize_value(*v, w_scale)).collect())
                .collect();
            let acc_scale = w_scale * ACT_SCALE;
            let bias_q = b.iter().map(|v| (v / acc_scale).round() as i32).collect();
            QuantLayer {
                weights_q,
                w_scale,
                w_zero_point: 0,
                bias_q,
            }
        })
        .collect();
    QuantizedMlpModel {
        dims: m.dims.clone(),
        layers,
    }
}

impl QuantizedMlpModel {
    pub fn input_len(&self) -> usize {
        self.dims[0]
    }

    /// Dequantized logits of the final layer: int8 x int8 products summed
    /// in i32, then scaled back to float.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>, PolicyError> {
        if x.len() != self.input_len() {
            return Err(PolicyError::DimensionMismatch {
                expected: self.input_len(),
                got: x.len(),
            });
        }
        let mut act_q: Vec<i8> = x.iter().map(|v| quantize_value(*v, ACT_SCALE)).collect();
        for (l, layer) in self.layers.iter().enumerate() {
            let acc_scale = layer.w_scale * ACT_SCALE;
            let mut pre = Vec::with_capacity(layer.weights_q.len());
            for (o, row) in layer.weights_q.iter().enumerate() {
                let mut acc: i32 = layer.bias_q[o];
                for (w, a) in row.iter().zip(&act_q) {
                    acc += *w as i32 * *a as i32;
                }
                pre.push(acc as f64 * acc_scale);
            }
            if l + 1 == self.layers.len() {
                return Ok(pre);
            }
            act_q = pre
                .into_iter()
                .map(|z| quantize_value(sigmoid(z), ACT_SCALE))
                .collect();
        }
        unreachable!("network has at least one layer");
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, PolicyError> {
        Ok(softmax(&self.logits(x)?))
    }

    pub fn classify(&self, x: &[f64]) -> Result<Class, PolicyError> {
        let p = self.forward(x)?;
        Ok(if p[1] > p[0] { Class::Malicious } else { Class::Benign })
    }
}

impl Policy for QuantizedMlpModel {
    fn kind(&self) -> &'static str {
        "mlp_q8"
    }

    fn classify(&self, x: &[f64]) -> Result<Class, PolicyError> {
        QuantizedMlpModel::classify(self, x)
    }

    fn policy_code(&self) -> u8 {
        POLICY_CODE_MLP
    }

    fn scratch_bytes(&self) -> usize {
        // int8 activation buffer + i32 accumulator row of the widest layer.
        let widest = self.dims.iter().copied().max().unwrap_or(0);
        widest + 4 * widest
    }
}
