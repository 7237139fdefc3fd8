//! Linear policies: logistic regression and the linear-kernel SVM.
//!
//! Both threshold the same margin w.x + b. The decision boundary itself
//! (margin exactly 0, i.e. sigmoid exactly 0.5) resolves to benign, the
//! fail-open convention used by every policy in this crate.

use serde::{Deserialize, Serialize};

use super::{Class, Policy, PolicyError, POLICY_CODE_LR, POLICY_CODE_SVM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Logistic,
    SvmLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn margin(&self, x: &[f64]) -> Result<f64, PolicyError> {
        if x.len() != self.weights.len() {
            return Err(PolicyError::DimensionMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        let dot: f64 = self.weights.iter().zip(x).map(|(w, v)| w * v).sum();
        Ok(dot + self.bias)
    }

    pub fn classify(&self, x: &[f64]) -> Result<Class, PolicyError> {
        let m = self.margin(x)?;
        Ok(if m > 0.0 { Class::Malicious } else { Class::Benign })
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Policy for LinearModel {
    fn kind(&self) -> &'static str {
        match self.kind {
            LinearKind::Logistic => "logreg",
            LinearKind::SvmLinear => "svm",
        }
    }

    fn classify(&self, x: &[f64]) -> Result<Class, PolicyError> {
        LinearModel::classify(self, x)
    }

    fn policy_code(&self) -> u8 {
        match self.kind {
            LinearKind::Logistic => POLICY_CODE_LR,
            LinearKind::SvmLinear => POLICY_CODE_SVM,
        }
    }

    fn scratch_bytes(&self) -> usize {
        // Running dot-product accumulator.
        16
    }
}
