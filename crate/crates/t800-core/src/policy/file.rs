//! Versioned model file format.
//!
//! A model file is a JSON document with exactly these top-level fields:
//!
//! ```text
//! format_version   integer, currently 1
//! kind             one of "dt", "logreg", "svm", "mlp", "mlp_q8"
//! feature_len      integer, must match the running engine
//! feature_order    array of feature names, length feature_len
//! params           kind-specific parameter object
//! ```
//!
//! `params` holds the serialized model struct of the family: tree nodes for
//! `dt`, `{kind, weights, bias}` for the linear kinds, `{dims, weights,
//! biases}` for `mlp` and `{dims, layers}` for `mlp_q8`. Floats are written
//! in shortest round-trip form, so integer fields reload bit-identical and
//! doubles reload exactly.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mlp::POLICY_HIDDEN;
use super::{
    DecisionTreeModel, LinearKind, LinearModel, MlpModel, PolicyModel, PolicyRegistry,
    QuantizedMlpModel,
};
use crate::packet::{FEATURE_LEN, FEATURE_ORDER};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unsupported model file version {found} (expected {FORMAT_VERSION})")]
    UnsupportedVersion { found: u64 },
    #[error("model schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("model file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model file i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format_version: u64,
    kind: String,
    feature_len: usize,
    feature_order: Vec<String>,
    params: serde_json::Value,
}

fn feature_names(len: usize) -> Vec<String> {
    if len == FEATURE_LEN {
        FEATURE_ORDER.iter().map(|s| s.to_string()).collect()
    } else {
        (0..len).map(|i| format!("f{i}")).collect()
    }
}

/// Serialize a model to the versioned document.
pub fn save_model<W: Write>(model: &PolicyModel, mut sink: W) -> Result<(), ModelError> {
    let params = match model {
        PolicyModel::Dt(m) => serde_json::to_value(m)?,
        PolicyModel::Linear(m) => serde_json::to_value(m)?,
        PolicyModel::Mlp(m) => serde_json::to_value(m)?,
        PolicyModel::QuantMlp(m) => serde_json::to_value(m)?,
    };
    let doc = ModelDoc {
        format_version: FORMAT_VERSION,
        kind: model.kind().to_string(),
        feature_len: model.feature_len(),
        feature_order: feature_names(model.feature_len()),
        params,
    };
    let text = serde_json::to_string_pretty(&doc)?;
    sink.write_all(text.as_bytes())?;
    sink.write_all(b"\n")?;
    Ok(())
}

pub fn save_model_to_path<P: AsRef<Path>>(model: &PolicyModel, path: P) -> Result<(), ModelError> {
    save_model(model, File::create(path)?)
}

/// Load and validate a model against the engine's feature width.
pub fn load_model<R: Read>(mut source: R, expected_feature_len: usize) -> Result<PolicyModel, ModelError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let doc: ModelDoc = serde_json::from_str(&text)?;
    if doc.format_version != FORMAT_VERSION {
        return Err(ModelError::UnsupportedVersion {
            found: doc.format_version,
        });
    }
    if doc.feature_len != expected_feature_len {
        return Err(ModelError::SchemaMismatch(format!(
            "file feature length {} does not match engine feature length {expected_feature_len}",
            doc.feature_len
        )));
    }
    if doc.feature_order.len() != doc.feature_len {
        return Err(ModelError::SchemaMismatch(format!(
            "feature_order lists {} names for feature_len {}",
            doc.feature_order.len(),
            doc.feature_len
        )));
    }
    let registry = PolicyRegistry::default();
    let model = registry.decode(&doc.kind, doc.params)?;
    if model.feature_len() != doc.feature_len {
        return Err(ModelError::SchemaMismatch(format!(
            "params encode feature length {} but the document declares {}",
            model.feature_len(),
            doc.feature_len
        )));
    }
    Ok(model)
}

pub fn load_model_from_path<P: AsRef<Path>>(
    path: P,
    expected_feature_len: usize,
) -> Result<PolicyModel, ModelError> {
    load_model(File::open(path)?, expected_feature_len)
}

pub(crate) fn decode_dt(params: serde_json::Value) -> Result<PolicyModel, ModelError> {
    let m: DecisionTreeModel = serde_json::from_value(params)?;
    m.validate().map_err(ModelError::SchemaMismatch)?;
    Ok(PolicyModel::Dt(m))
}

fn decode_linear(params: serde_json::Value, expect: LinearKind) -> Result<PolicyModel, ModelError> {
    let m: LinearModel = serde_json::from_value(params)?;
    if m.kind != expect {
        return Err(ModelError::SchemaMismatch(
            "linear params kind disagrees with document kind".into(),
        ));
    }
    if m.weights.is_empty() {
        return Err(ModelError::SchemaMismatch("linear model has no weights".into()));
    }
    Ok(PolicyModel::Linear(m))
}

pub(crate) fn decode_logreg(params: serde_json::Value) -> Result<PolicyModel, ModelError> {
    decode_linear(params, LinearKind::Logistic)
}

pub(crate) fn decode_svm(params: serde_json::Value) -> Result<PolicyModel, ModelError> {
    decode_linear(params, LinearKind::SvmLinear)
}

fn check_mlp_dims(dims: &[usize]) -> Result<(), ModelError> {
    let expected = [dims.first().copied().unwrap_or(0), POLICY_HIDDEN, POLICY_HIDDEN, 2];
    if dims != expected {
        return Err(ModelError::SchemaMismatch(format!(
            "MLP policy requires dims [n, {POLICY_HIDDEN}, {POLICY_HIDDEN}, 2], found {dims:?}"
        )));
    }
    Ok(())
}

pub(crate) fn decode_mlp(params: serde_json::Value) -> Result<PolicyModel, ModelError> {
    let m: MlpModel = serde_json::from_value(params)?;
    m.validate().map_err(ModelError::SchemaMismatch)?;
    check_mlp_dims(&m.dims)?;
    Ok(PolicyModel::Mlp(m))
}

pub(crate) fn decode_mlp_q8(params: serde_json::Value) -> Result<PolicyModel, ModelError> {
    let m: QuantizedMlpModel = serde_json::from_value(params)?;
    check_mlp_dims(&m.dims)?;
    if m.layers.len() != m.dims.len() - 1 {
        return Err(ModelError::SchemaMismatch(
            "quantized layer count does not match dims".into(),
        ));
    }
    Ok(PolicyModel::QuantMlp(m))
}
