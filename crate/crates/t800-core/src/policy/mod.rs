//! Filtering policies: the pluggable classification strategies of the
//! filter.
//!
//! Every model family implements [`Policy`] and is registered by kind name
//! in [`PolicyRegistry`], which maps the `kind` field of a model file to a
//! decoder. The filter core holds the active policy as `Arc<dyn Policy>`
//! and swaps it at runtime; classification itself is pure and lock-free.

mod file;
mod linear;
mod mlp;
mod quant;
mod tree;

pub use file::{load_model, load_model_from_path, save_model, save_model_to_path, ModelError};
pub use linear::{LinearKind, LinearModel};
pub use mlp::{softmax, MlpModel};
pub use quant::{quantize_mlp, QuantLayer, QuantizedMlpModel};
pub use tree::{DecisionTreeModel, TreeNode};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::packet::FEATURE_LEN;

/// Classification outcome. `benign` encodes as 0 and `malicious` as 1
/// everywhere (dataset files, confusion matrices, output layers).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Benign,
    Malicious,
}

impl Class {
    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Class::Benign
        } else {
            Class::Malicious
        }
    }

    pub fn index(self) -> usize {
        match self {
            Class::Benign => 0,
            Class::Malicious => 1,
        }
    }
}

/// Errors surfaced by a policy at classification time. The filter hook
/// treats any of these as an accept (fail-open) and counts the event.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("feature vector has length {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("policy fault: {0}")]
    Fault(String),
}

/// A packet classification strategy. Implementations are immutable after
/// construction and callable from any number of threads.
pub trait Policy: Send + Sync {
    /// Registry kind name ("dt", "logreg", "svm", "mlp", "mlp_q8").
    fn kind(&self) -> &'static str;

    /// Classify one feature vector.
    fn classify(&self, x: &[f64]) -> Result<Class, PolicyError>;

    /// Wire code used by the harness protocol when selecting this policy.
    fn policy_code(&self) -> u8;

    /// Peak per-call working memory of the classifier, in bytes. Feeds the
    /// stack usage metric of the benchmark harness.
    fn scratch_bytes(&self) -> usize {
        0
    }
}

/// Policy wire codes (the values carried by the harness protocol).
pub const POLICY_CODE_DISABLED: u8 = 0;
pub const POLICY_CODE_DT: u8 = 1;
pub const POLICY_CODE_LR: u8 = 2;
pub const POLICY_CODE_SVM: u8 = 3;
pub const POLICY_CODE_MLP: u8 = 4;

/// A model as data: the serializable union of the four families. Training
/// produces these; [`PolicyModel::into_policy`] turns one into the runtime
/// strategy object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PolicyModel {
    Dt(DecisionTreeModel),
    Linear(LinearModel),
    Mlp(MlpModel),
    QuantMlp(QuantizedMlpModel),
}

impl PolicyModel {
    pub fn kind(&self) -> &'static str {
        match self {
            PolicyModel::Dt(_) => "dt",
            PolicyModel::Linear(m) => match m.kind {
                LinearKind::Logistic => "logreg",
                LinearKind::SvmLinear => "svm",
            },
            PolicyModel::Mlp(_) => "mlp",
            PolicyModel::QuantMlp(_) => "mlp_q8",
        }
    }

    pub fn feature_len(&self) -> usize {
        match self {
            PolicyModel::Dt(m) => m.feature_len,
            PolicyModel::Linear(m) => m.weights.len(),
            PolicyModel::Mlp(m) => m.input_len(),
            PolicyModel::QuantMlp(m) => m.input_len(),
        }
    }

    pub fn classify(&self, x: &[f64]) -> Result<Class, PolicyError> {
        match self {
            PolicyModel::Dt(m) => Ok(m.classify(x)),
            PolicyModel::Linear(m) => m.classify(x),
            PolicyModel::Mlp(m) => m.classify(x),
            PolicyModel::QuantMlp(m) => m.classify(x),
        }
    }

    pub fn into_policy(self) -> Arc<dyn Policy> {
        match self {
            PolicyModel::Dt(m) => Arc::new(m),
            PolicyModel::Linear(m) => Arc::new(m),
            PolicyModel::Mlp(m) => Arc::new(m),
            PolicyModel::QuantMlp(m) => Arc::new(m),
        }
    }
}

type Decoder = fn(serde_json::Value) -> Result<PolicyModel, ModelError>;

struct RegistryEntry {
    kind: &'static str,
    policy_code: u8,
    decode: Decoder,
}

/// Name-indexed registry of the available policy families. The `kind`
/// field of a model file selects the decoder; the policy code is what the
/// harness protocol carries on the wire.
pub struct PolicyRegistry {
    entries: Vec<RegistryEntry>,
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        let mut reg = Self {
            entries: Vec::new(),
        };
        reg.register("dt", POLICY_CODE_DT, file::decode_dt);
        reg.register("logreg", POLICY_CODE_LR, file::decode_logreg);
        reg.register("svm", POLICY_CODE_SVM, file::decode_svm);
        reg.register("mlp", POLICY_CODE_MLP, file::decode_mlp);
        // The quantized MLP is the MLP family under a different executor,
        // so it shares the MLP wire code.
        reg.register("mlp_q8", POLICY_CODE_MLP, file::decode_mlp_q8);
        reg
    }
}

impl PolicyRegistry {
    pub fn register(&mut self, kind: &'static str, policy_code: u8, decode: Decoder) {
        self.entries.push(RegistryEntry {
            kind,
            policy_code,
            decode,
        });
    }

    pub fn kinds(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.kind).collect()
    }

    pub fn policy_code(&self, kind: &str) -> Option<u8> {
        self.entries
            .iter()
            .find(|e| e.kind == kind)
            .map(|e| e.policy_code)
    }

    pub(crate) fn decode(
        &self,
        kind: &str,
        params: serde_json::Value,
    ) -> Result<PolicyModel, ModelError> {
        let entry = self
            .entries
            .iter()
            .find(|e| e.kind == kind)
            .ok_or_else(|| ModelError::SchemaMismatch(format!("unknown model kind `{kind}`")))?;
        (entry.decode)(params)
    }
}


/// Engine feature width re-exported for policy consumers.
pub const ENGINE_FEATURE_LEN: usize = FEATURE_LEN;
