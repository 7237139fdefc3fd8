//! MLP training: mini-batch Adam on softmax cross-entropy with seeded
//! Xavier initialization, plus the finite-difference gradient oracle used
//! to verify backpropagation.

use crate::policy::{softmax, Class, MlpModel, PolicyModel};
use crate::rng::SplitMix64;

use super::{LabeledDataset, TrainError};

#[derive(Debug, Clone)]
pub struct MlpTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden: usize,
}

impl Default for MlpTrainConfig {
    /// The reference training recipe: 2000 epochs of Adam at 1e-5 with
    /// batches of 260 over the 16-16-2 architecture.
    fn default() -> Self {
        Self {
            epochs: 2000,
            lr: 1e-5,
            batch_size: 260,
            seed: 1,
            hidden: 16,
        }
    }
}

/// Per-layer weight and bias gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeroed(m: &MlpModel) -> Self {
        Self {
            weights: m
                .weights
                .iter()
                .map(|l| l.iter().map(|r| vec![0.0; r.len()]).collect())
                .collect(),
            biases: m.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean softmax cross-entropy of the model over a batch, computed from the
/// logits via log-sum-exp.
pub fn loss_cross_entropy(m: &MlpModel, batch: &[(&[f64], Class)]) -> f64 {
    let mut total = 0.0;
    for (x, label) in batch {
        let z = m.logits(x).expect("widths agree");
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - z[label.index()];
    }
    total / batch.len() as f64
}

/// Backpropagation: the analytic gradient of [`loss_cross_entropy`] with
/// respect to every weight and bias, averaged over the batch.
pub fn analytic_gradients(m: &MlpModel, batch: &[(&[f64], Class)]) -> Gradients {
    let mut grads = Gradients::zeroed(m);
    let n_layers = m.weights.len();
    let inv = 1.0 / batch.len() as f64;

    for (x, label) in batch {
        // Forward pass, keeping each layer's activations.
        let mut activations: Vec<Vec<f64>> = vec![x.to_vec()];
        for l in 0..n_layers {
            let prev = &activations[l];
            let mut z = m.biases[l].clone();
            for (o, row) in m.weights[l].iter().enumerate() {
                for (w, a) in row.iter().zip(prev) {
                    z[o] += w * a;
                }
            }
            let a = if l + 1 == n_layers {
                softmax(&z)
            } else {
                z.into_iter().map(sigmoid).collect()
            };
            activations.push(a);
        }

        // Output delta of softmax + cross-entropy: p - onehot(y).
        let mut delta: Vec<f64> = activations[n_layers].clone();
        delta[label.index()] -= 1.0;

        for l in (0..n_layers).rev() {
            let prev = &activations[l];
            for (o, dz) in delta.iter().enumerate() {
                grads.biases[l][o] += dz * inv;
                for (i, a) in prev.iter().enumerate() {
                    grads.weights[l][o][i] += dz * a * inv;
                }
            }
            if l > 0 {
                // delta_prev = (W^T delta) * a (1 - a)
                let mut prev_delta = vec![0.0; prev.len()];
                for (o, dz) in delta.iter().enumerate() {
                    for (i, w) in m.weights[l][o].iter().enumerate() {
                        prev_delta[i] += w * dz;
                    }
                }
                for (i, a) in prev.iter().enumerate() {
                    prev_delta[i] *= a * (1.0 - a);
                }
                delta = prev_delta;
            }
        }
    }
    grads
}

/// Central finite differences with step `h` over every parameter. This is
/// the independent oracle for backpropagation: it only ever evaluates the
/// loss, never the analytic gradient.
pub fn finite_difference_gradients(m: &MlpModel, batch: &[(&[f64], Class)], h: f64) -> Gradients {
    let mut probe = m.clone();
    let mut grads = Gradients::zeroed(m);
    for l in 0..m.weights.len() {
        for o in 0..m.weights[l].len() {
            for i in 0..m.weights[l][o].len() {
                let orig = probe.weights[l][o][i];
                probe.weights[l][o][i] = orig + h;
                let up = loss_cross_entropy(&probe, batch);
                probe.weights[l][o][i] = orig - h;
                let down = loss_cross_entropy(&probe, batch);
                probe.weights[l][o][i] = orig;
                grads.weights[l][o][i] = (up - down) / (2.0 * h);
            }
            let orig = probe.biases[l][o];
            probe.biases[l][o] = orig + h;
            let up = loss_cross_entropy(&probe, batch);
            probe.biases[l][o] = orig - h;
            let down = loss_cross_entropy(&probe, batch);
            probe.biases[l][o] = orig;
            grads.biases[l][o] = (up - down) / (2.0 * h);
        }
    }
    grads
}

/// Largest relative disagreement between two gradient sets, with the
/// denominator floored so near-zero gradients compare absolutely.
pub fn max_relative_gradient_error(a: &Gradients, b: &Gradients) -> f64 {
    let mut worst = 0.0_f64;
    let mut consider = |x: f64, y: f64| {
        let rel = (x - y).abs() / x.abs().max(y.abs()).max(1e-3);
        worst = worst.max(rel);
    };
    for (la, lb) in a.weights.iter().zip(&b.weights) {
        for (ra, rb) in la.iter().zip(lb) {
            for (x, y) in ra.iter().zip(rb) {
                consider(*x, *y);
            }
        }
    }
    for (ba, bb) in a.biases.iter().zip(&b.biases) {
        for (x, y) in ba.iter().zip(bb) {
            consider(*x, *y);
        }
    }
    worst
}

/// Seeded uniform Xavier/Glorot initialization.
pub fn xavier_init(dims: &[usize], seed: u64) -> MlpModel {
    let mut m = MlpModel::zeroed(dims);
    let mut rng = SplitMix64::new(seed);
    for l in 0..m.weights.len() {
        let fan_in = dims[l] as f64;
        let fan_out = dims[l + 1] as f64;
        let limit = (6.0 / (fan_in + fan_out)).sqrt();
        for row in m.weights[l].iter_mut() {
            for w in row.iter_mut() {
                *w = rng.next_range(-limit, limit);
            }
        }
    }
    m
}

struct AdamState {
    m: Gradients,
    v: Gradients,
    t: u64,
}

impl AdamState {
    fn new(model: &MlpModel) -> Self {
        Self {
            m: Gradients::zeroed(model),
            v: Gradients::zeroed(model),
            t: 0,
        }
    }

    /// One Adam update (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
    fn step(&mut self, model: &mut MlpModel, grads: &Gradients, lr: f64) {
        const BETA1: f64 = 0.9;
        const BETA2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + EPS);
        };
        for l in 0..model.weights.len() {
            for o in 0..model.weights[l].len() {
                for i in 0..model.weights[l][o].len() {
                    update(
                        &mut model.weights[l][o][i],
                        grads.weights[l][o][i],
                        &mut self.m.weights[l][o][i],
                        &mut self.v.weights[l][o][i],
                    );
                }
                update(
                    &mut model.biases[l][o],
                    grads.biases[l][o],
                    &mut self.m.biases[l][o],
                    &mut self.v.biases[l][o],
                );
            }
        }
    }
}

/// Train the fixed `[n_features, hidden, hidden, 2]` architecture with
/// mini-batch Adam on cross-entropy. Zero epochs returns the seeded
/// initialization untouched.
pub fn train_mlp(d: &LabeledDataset, cfg: &MlpTrainConfig) -> Result<MlpModel, TrainError> {
    assert!(!d.is_empty(), "cannot train on an empty dataset");
    let dims = [d.feature_len, cfg.hidden, cfg.hidden, 2];
    let mut model = xavier_init(&dims, cfg.seed);
    let mut rng = SplitMix64::new(cfg.seed ^ 0xA11C_E5ED);
    let mut adam = AdamState::new(&model);
    let mut last_finite = model.clone();
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..d.samples.len()).collect();
        rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<(&[f64], Class)> = chunk
                .iter()
                .map(|i| (d.samples[*i].features.as_slice(), d.samples[*i].label))
                .collect();
            let grads = analytic_gradients(&model, &batch);
            adam.step(&mut model, &grads, cfg.lr);
        }
        let full: Vec<(&[f64], Class)> = d
            .samples
            .iter()
            .map(|s| (s.features.as_slice(), s.label))
            .collect();
        if !loss_cross_entropy(&model, &full).is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                last_finite: Box::new(PolicyModel::Mlp(last_finite)),
            });
        }
        last_finite = model.clone();
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::{evaluate, Provenance};

    fn toy_batch() -> (MlpModel, Vec<(Vec<f64>, Class)>) {
        let mut rng = SplitMix64::new(0x5EED);
        let mut m = xavier_init(&[4, 3, 2], 77);
        for layer in m.biases.iter_mut() {
            for b in layer.iter_mut() {
                *b = rng.next_range(-0.5, 0.5);
            }
        }
        let batch: Vec<(Vec<f64>, Class)> = (0..6)
            .map(|i| {
                let x: Vec<f64> = (0..4).map(|_| rng.next_f64()).collect();
                (x, Class::from_index(i % 2))
            })
            .collect();
        (m, batch)
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let (m, owned) = toy_batch();
        let batch: Vec<(&[f64], Class)> = owned.iter().map(|(x, c)| (x.as_slice(), *c)).collect();
        let analytic = analytic_gradients(&m, &batch);
        let numeric = finite_difference_gradients(&m, &batch, 1e-5);
        let err = max_relative_gradient_error(&analytic, &numeric);
        assert!(err <= 1e-4, "max relative error {err}");
    }

    #[test]
    fn zero_epochs_returns_seeded_initialization() {
        let mut d = LabeledDataset::new(4);
        d.push(vec![0.0; 4], Class::Benign, Provenance::DatasetImport);
        d.push(vec![1.0; 4], Class::Malicious, Provenance::DatasetImport);
        let cfg = MlpTrainConfig {
            epochs: 0,
            seed: 123,
            ..MlpTrainConfig::default()
        };
        let trained = train_mlp(&d, &cfg).unwrap();
        let init = xavier_init(&[4, 16, 16, 2], 123);
        assert_eq!(trained, init);
    }

    #[test]
    fn separable_set_reaches_high_accuracy() {
        let mut d = LabeledDataset::new(2);
        let mut rng = SplitMix64::new(8);
        for _ in 0..60 {
            d.push(
                vec![0.1 + 0.15 * rng.next_f64(), 0.1 + 0.15 * rng.next_f64()],
                Class::Benign,
                Provenance::DatasetImport,
            );
            d.push(
                vec![0.75 + 0.15 * rng.next_f64(), 0.75 + 0.15 * rng.next_f64()],
                Class::Malicious,
                Provenance::DatasetImport,
            );
        }
        let cfg = MlpTrainConfig {
            epochs: 500,
            lr: 1e-2,
            batch_size: 16,
            seed: 9,
            hidden: 16,
        };
        let m = train_mlp(&d, &cfg).unwrap();
        let r = evaluate(&PolicyModel::Mlp(m), &d);
        assert!(r.accuracy >= 0.95, "accuracy {}", r.accuracy);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let mut d = LabeledDataset::new(3);
        let mut rng = SplitMix64::new(44);
        for i in 0..30 {
            let x: Vec<f64> = (0..3).map(|_| rng.next_f64()).collect();
            d.push(x, Class::from_index(i % 2), Provenance::DatasetImport);
        }
        let cfg = MlpTrainConfig {
            epochs: 20,
            lr: 1e-3,
            batch_size: 8,
            seed: 3,
            hidden: 16,
        };
        let a = train_mlp(&d, &cfg).unwrap();
        let b = train_mlp(&d, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
