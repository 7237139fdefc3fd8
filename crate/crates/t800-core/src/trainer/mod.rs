//! Offline training of filtering policies: labeled datasets, the salting
//! merge, stratified splitting, the four family trainers and F1 evaluation.

mod linear;
mod mlp;
mod tree;

pub use linear::{train_logistic, train_svm, LinearTrainConfig, SvmTrainConfig};
pub use mlp::{
    analytic_gradients, finite_difference_gradients, loss_cross_entropy,
    max_relative_gradient_error, train_mlp, xavier_init, Gradients, MlpTrainConfig,
};
pub use tree::{train_dt, train_dt_with, DEFAULT_MIN_LEAF};

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::packet::{FEATURE_LEN, FEATURE_ORDER};
use crate::policy::{Class, PolicyModel};
use crate::rng::SplitMix64;

/// Where a sample came from. The generators tag their own output; data read
/// back from files carries the import tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    SyntheticBenign,
    SyntheticScan,
    PcapImport,
    DatasetImport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Class,
    pub source: Provenance,
}

/// A labeled dataset. All samples share one feature width.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub feature_len: usize,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset i/o: {0}")]
    Io(#[from] io::Error),
    #[error("dataset line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("dataset is empty")]
    Empty,
}

/// Divergence during gradient training. Carries the last parameters that
/// still had a finite loss.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at epoch {epoch}; last finite parameters attached")]
    NonFiniteLoss {
        epoch: usize,
        last_finite: Box<PolicyModel>,
    },
}

impl LabeledDataset {
    pub fn new(feature_len: usize) -> Self {
        Self {
            feature_len,
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, features: Vec<f64>, label: Class, source: Provenance) {
        assert_eq!(features.len(), self.feature_len, "feature width mismatch");
        self.samples.push(Sample {
            features,
            label,
            source,
        });
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count_label(&self, label: Class) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    /// Column header for the dataset file: feature names then `label`.
    fn header(&self) -> String {
        let names: Vec<String> = if self.feature_len == FEATURE_LEN {
            FEATURE_ORDER.iter().map(|s| s.to_string()).collect()
        } else {
            (0..self.feature_len).map(|i| format!("f{i}")).collect()
        };
        let mut h = names.join(",");
        h.push_str(",label");
        h
    }

    /// Write the delimited text form: mandatory header row, one row per
    /// sample, label encoded 0 (benign) / 1 (malicious).
    pub fn write_csv<W: Write>(&self, mut sink: W) -> Result<(), DatasetError> {
        writeln!(sink, "{}", self.header())?;
        for s in &self.samples {
            let mut row = String::new();
            for v in &s.features {
                row.push_str(&format!("{v}"));
                row.push(',');
            }
            row.push_str(&format!("{}", s.label.index()));
            writeln!(sink, "{row}")?;
        }
        Ok(())
    }

    pub fn write_csv_to_path<P: AsRef<Path>>(&self, path: P) -> Result<(), DatasetError> {
        self.write_csv(File::create(path)?)
    }

    /// Read the delimited text form back. The header row is mandatory and
    /// fixes the feature width; imported samples are tagged
    /// [`Provenance::DatasetImport`].
    pub fn read_csv<R: Read>(source: R) -> Result<Self, DatasetError> {
        let mut lines = BufReader::new(source).lines();
        let header = match lines.next() {
            Some(h) => h?,
            None => return Err(DatasetError::Empty),
        };
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 2 || cols.last() != Some(&"label") {
            return Err(DatasetError::Malformed {
                line: 1,
                msg: "header must list feature names then `label`".into(),
            });
        }
        let feature_len = cols.len() - 1;
        let mut ds = LabeledDataset::new(feature_len);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != feature_len + 1 {
                return Err(DatasetError::Malformed {
                    line: lineno,
                    msg: format!("expected {} fields, found {}", feature_len + 1, fields.len()),
                });
            }
            let mut features = Vec::with_capacity(feature_len);
            for f in &fields[..feature_len] {
                features.push(f.parse::<f64>().map_err(|e| DatasetError::Malformed {
                    line: lineno,
                    msg: format!("bad feature value `{f}`: {e}"),
                })?);
            }
            let label = match fields[feature_len] {
                "0" => Class::Benign,
                "1" => Class::Malicious,
                other => {
                    return Err(DatasetError::Malformed {
                        line: lineno,
                        msg: format!("bad label `{other}` (expected 0 or 1)"),
                    })
                }
            };
            ds.push(features, label, Provenance::DatasetImport);
        }
        Ok(ds)
    }

    pub fn read_csv_from_path<P: AsRef<Path>>(path: P) -> Result<Self, DatasetError> {
        Self::read_csv(File::open(path)?)
    }
}

/// Merge two labeled captures into one training dataset in a seeded random
/// interleaving. Every sample of both inputs appears exactly once with its
/// label preserved.
pub fn salting_merge(benign: &LabeledDataset, malicious: &LabeledDataset, seed: u64) -> LabeledDataset {
    assert_eq!(
        benign.feature_len, malicious.feature_len,
        "feature widths must agree"
    );
    let mut out = LabeledDataset::new(benign.feature_len);
    out.samples.extend(benign.samples.iter().cloned());
    out.samples.extend(malicious.samples.iter().cloned());
    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut out.samples);
    out
}

/// Seeded stratified split: `test_fraction` of each class goes to the test
/// set, the rest to train. Order within each part follows the seeded
/// shuffle.
pub fn split_stratified(
    d: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> (LabeledDataset, LabeledDataset) {
    assert!((0.0..1.0).contains(&test_fraction));
    let mut rng = SplitMix64::new(seed);
    let mut train = LabeledDataset::new(d.feature_len);
    let mut test = LabeledDataset::new(d.feature_len);
    for class in [Class::Benign, Class::Malicious] {
        let mut idx: Vec<usize> = (0..d.samples.len())
            .filter(|i| d.samples[*i].label == class)
            .collect();
        rng.shuffle(&mut idx);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        for (k, i) in idx.into_iter().enumerate() {
            if k < n_test {
                test.samples.push(d.samples[i].clone());
            } else {
                train.samples.push(d.samples[i].clone());
            }
        }
    }
    (train, test)
}

/// Precision/recall/F1/accuracy with `malicious` as the positive class.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// `confusion[actual][predicted]`, classes indexed benign=0, malicious=1.
    pub confusion: [[u64; 2]; 2],
}

impl EvalReport {
    pub fn from_confusion(confusion: [[u64; 2]; 2]) -> Self {
        let tp = confusion[1][1] as f64;
        let fp = confusion[0][1] as f64;
        let fn_ = confusion[1][0] as f64;
        let tn = confusion[0][0] as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let total = tp + fp + fn_ + tn;
        let accuracy = if total > 0.0 { (tp + tn) / total } else { 0.0 };
        Self {
            precision,
            recall,
            f1,
            accuracy,
            confusion,
        }
    }
}

/// Evaluate a model over a dataset.
pub fn evaluate(model: &PolicyModel, d: &LabeledDataset) -> EvalReport {
    let mut confusion = [[0u64; 2]; 2];
    for s in &d.samples {
        let predicted = model
            .classify(&s.features)
            .expect("dimensions checked by caller");
        confusion[s.label.index()][predicted.index()] += 1;
    }
    EvalReport::from_confusion(confusion)
}
