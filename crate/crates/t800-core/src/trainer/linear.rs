//! Gradient training of the linear policies: mini-batch gradient descent on
//! cross-entropy for logistic regression, sub-gradient descent on
//! L2-regularized hinge loss for the linear SVM. Both start from zero
//! parameters and are deterministic given a seed.

use crate::policy::{Class, LinearKind, LinearModel, PolicyModel};
use crate::rng::SplitMix64;

use super::{LabeledDataset, TrainError};

#[derive(Debug, Clone)]
pub struct LinearTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LinearTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.1,
            batch_size: 32,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvmTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Inverse regularization strength; the objective is
    /// `||w||^2 / (2c) + mean hinge`.
    pub c: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 1e-3,
            c: 1.0,
            batch_size: 32,
            seed: 1,
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

/// Numerically safe mean binary cross-entropy of a linear model.
fn logistic_loss(m: &LinearModel, d: &LabeledDataset) -> f64 {
    let mut total = 0.0;
    for s in &d.samples {
        let z = m.margin(&s.features).expect("widths agree");
        // -[y ln p + (1-y) ln(1-p)] written via softplus for stability.
        let y = s.label.index() as f64;
        let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
        total += softplus - y * z;
    }
    total / d.samples.len() as f64
}

fn hinge_objective(m: &LinearModel, d: &LabeledDataset, c: f64) -> f64 {
    let reg: f64 = m.weights.iter().map(|w| w * w).sum::<f64>() / (2.0 * c);
    let mut hinge = 0.0;
    for s in &d.samples {
        let t = if s.label == Class::Malicious { 1.0 } else { -1.0 };
        let z = m.margin(&s.features).expect("widths agree");
        hinge += (1.0 - t * z).max(0.0);
    }
    reg + hinge / d.samples.len() as f64
}

fn epoch_batches(n: usize, batch_size: usize, rng: &mut SplitMix64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order
        .chunks(batch_size.max(1))
        .map(|c| c.to_vec())
        .collect()
}

/// Mini-batch gradient descent on mean cross-entropy. Zero-initialized, so
/// `lr = 0` returns the zero model unchanged.
pub fn train_logistic(d: &LabeledDataset, cfg: &LinearTrainConfig) -> Result<LinearModel, TrainError> {
    assert!(!d.is_empty(), "cannot train on an empty dataset");
    assert!(cfg.lr >= 0.0, "learning rate must be nonnegative");
    let mut m = LinearModel {
        kind: LinearKind::Logistic,
        weights: vec![0.0; d.feature_len],
        bias: 0.0,
    };
    let mut rng = SplitMix64::new(cfg.seed);
    let mut last_finite = m.clone();
    for epoch in 0..cfg.epochs {
        for batch in epoch_batches(d.samples.len(), cfg.batch_size, &mut rng) {
            let mut grad_w = vec![0.0; d.feature_len];
            let mut grad_b = 0.0;
            for i in &batch {
                let s = &d.samples[*i];
                let p = sigmoid(m.margin(&s.features).expect("widths agree"));
                let err = p - s.label.index() as f64;
                for (g, x) in grad_w.iter_mut().zip(&s.features) {
                    *g += err * x;
                }
                grad_b += err;
            }
            let scale = cfg.lr / batch.len() as f64;
            for (w, g) in m.weights.iter_mut().zip(&grad_w) {
                *w -= scale * g;
            }
            m.bias -= scale * grad_b;
        }
        if !logistic_loss(&m, d).is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                last_finite: Box::new(PolicyModel::Linear(last_finite)),
            });
        }
        last_finite = m.clone();
    }
    Ok(m)
}

/// Sub-gradient descent on the L2-regularized hinge loss.
pub fn train_svm(d: &LabeledDataset, cfg: &SvmTrainConfig) -> Result<LinearModel, TrainError> {
    assert!(!d.is_empty(), "cannot train on an empty dataset");
    assert!(cfg.lr >= 0.0, "learning rate must be nonnegative");
    assert!(cfg.c > 0.0, "c must be positive");
    let mut m = LinearModel {
        kind: LinearKind::SvmLinear,
        weights: vec![0.0; d.feature_len],
        bias: 0.0,
    };
    let mut rng = SplitMix64::new(cfg.seed);
    let mut last_finite = m.clone();
    for epoch in 0..cfg.epochs {
        for batch in epoch_batches(d.samples.len(), cfg.batch_size, &mut rng) {
            let mut grad_w: Vec<f64> = m.weights.iter().map(|w| w / cfg.c).collect();
            let mut grad_b = 0.0;
            let inv = 1.0 / batch.len() as f64;
            for i in &batch {
                let s = &d.samples[*i];
                let t = if s.label == Class::Malicious { 1.0 } else { -1.0 };
                let z = m.margin(&s.features).expect("widths agree");
                if t * z < 1.0 {
                    for (g, x) in grad_w.iter_mut().zip(&s.features) {
                        *g -= t * x * inv;
                    }
                    grad_b -= t * inv;
                }
            }
            for (w, g) in m.weights.iter_mut().zip(&grad_w) {
                *w -= cfg.lr * g;
            }
            m.bias -= cfg.lr * grad_b;
        }
        if !hinge_objective(&m, d, cfg.c).is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                last_finite: Box::new(PolicyModel::Linear(last_finite)),
            });
        }
        last_finite = m.clone();
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::{evaluate, Provenance};

    /// Two clusters separated along both features.
    fn separable(n: usize) -> LabeledDataset {
        let mut d = LabeledDataset::new(2);
        let mut rng = SplitMix64::new(5);
        for _ in 0..n {
            d.push(
                vec![0.1 + 0.1 * rng.next_f64(), 0.2 * rng.next_f64()],
                Class::Benign,
                Provenance::DatasetImport,
            );
            d.push(
                vec![0.8 + 0.1 * rng.next_f64(), 0.8 + 0.2 * rng.next_f64()],
                Class::Malicious,
                Provenance::DatasetImport,
            );
        }
        d
    }

    #[test]
    fn logistic_separates_toy_set() {
        let d = separable(40);
        let cfg = LinearTrainConfig {
            epochs: 500,
            lr: 0.5,
            batch_size: 16,
            seed: 2,
        };
        let m = train_logistic(&d, &cfg).unwrap();
        let r = evaluate(&PolicyModel::Linear(m.clone()), &d);
        assert_eq!(r.accuracy, 1.0, "confusion {:?}", r.confusion);
        // Every point classified by the sign of its margin.
        for s in &d.samples {
            let z = m.margin(&s.features).unwrap();
            match s.label {
                Class::Malicious => assert!(z > 0.0),
                Class::Benign => assert!(z < 0.0),
            }
        }
    }

    #[test]
    fn svm_separates_toy_set() {
        let d = separable(40);
        let cfg = SvmTrainConfig {
            epochs: 800,
            lr: 0.05,
            c: 10.0,
            batch_size: 16,
            seed: 2,
        };
        let m = train_svm(&d, &cfg).unwrap();
        for s in &d.samples {
            let z = m.margin(&s.features).unwrap();
            match s.label {
                Class::Malicious => assert!(z > 0.0, "margin {z}"),
                Class::Benign => assert!(z < 0.0, "margin {z}"),
            }
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_at_initialization() {
        let d = separable(10);
        let cfg = LinearTrainConfig {
            epochs: 10,
            lr: 0.0,
            batch_size: 4,
            seed: 3,
        };
        let m = train_logistic(&d, &cfg).unwrap();
        assert!(m.weights.iter().all(|w| *w == 0.0));
        assert_eq!(m.bias, 0.0);

        let svm_cfg = SvmTrainConfig {
            epochs: 10,
            lr: 0.0,
            c: 1.0,
            batch_size: 4,
            seed: 3,
        };
        let m = train_svm(&d, &svm_cfg).unwrap();
        assert!(m.weights.iter().all(|w| *w == 0.0));
        assert_eq!(m.bias, 0.0);
    }

    #[test]
    fn duplicating_samples_keeps_full_batch_gradient_direction() {
        let d = separable(10);
        let mut doubled = LabeledDataset::new(2);
        for s in d.samples.iter().chain(d.samples.iter()) {
            doubled.samples.push(s.clone());
        }
        // One full-batch epoch: the mean gradient is identical, so the
        // resulting parameters are identical.
        let cfg = |n: usize| LinearTrainConfig {
            epochs: 1,
            lr: 0.3,
            batch_size: n,
            seed: 4,
        };
        let a = train_logistic(&d, &cfg(d.len())).unwrap();
        let b = train_logistic(&doubled, &cfg(doubled.len())).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.bias - b.bias).abs() < 1e-12);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let d = separable(20);
        let cfg = LinearTrainConfig::default();
        let a = train_logistic(&d, &cfg).unwrap();
        let b = train_logistic(&d, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
