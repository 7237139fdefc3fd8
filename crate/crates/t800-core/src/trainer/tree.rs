//! Greedy top-down decision tree induction with the Shannon entropy
//! criterion.
//!
//! At each node the trainer scans every (feature, threshold) candidate,
//! where thresholds are midpoints between consecutive distinct sorted
//! feature values, and keeps the split with the largest information gain.
//! Recursion stops at `max_depth`, node purity or fewer than `min_leaf`
//! samples; leaves take the majority class, ties resolving to benign.

use crate::policy::{Class, DecisionTreeModel, TreeNode};

use super::LabeledDataset;

/// Minimum node size for a split attempt.
pub const DEFAULT_MIN_LEAF: usize = 5;

fn entropy(benign: usize, malicious: usize) -> f64 {
    let n = (benign + malicious) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for count in [benign, malicious] {
        if count > 0 {
            let p = count as f64 / n;
            h -= p * p.log2();
        }
    }
    h
}

fn majority(d: &LabeledDataset, idx: &[usize]) -> Class {
    let malicious = idx
        .iter()
        .filter(|i| d.samples[**i].label == Class::Malicious)
        .count();
    let benign = idx.len() - malicious;
    if malicious > benign {
        Class::Malicious
    } else {
        Class::Benign
    }
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Scan all candidates at a node; `None` when no split has positive gain.
fn best_split(d: &LabeledDataset, idx: &[usize]) -> Option<BestSplit> {
    let total_mal = idx
        .iter()
        .filter(|i| d.samples[**i].label == Class::Malicious)
        .count();
    let total_ben = idx.len() - total_mal;
    let parent = entropy(total_ben, total_mal);
    let n = idx.len() as f64;

    let mut best: Option<BestSplit> = None;
    for feature in 0..d.feature_len {
        let mut rows: Vec<(f64, Class)> = idx
            .iter()
            .map(|i| (d.samples[*i].features[feature], d.samples[*i].label))
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_ben = 0usize;
        let mut left_mal = 0usize;
        let mut k = 0;
        while k < rows.len() {
            // Advance over one block of equal values.
            let value = rows[k].0;
            while k < rows.len() && rows[k].0 == value {
                match rows[k].1 {
                    Class::Benign => left_ben += 1,
                    Class::Malicious => left_mal += 1,
                }
                k += 1;
            }
            if k == rows.len() {
                break;
            }
            let threshold = (value + rows[k].0) / 2.0;
            let right_ben = total_ben - left_ben;
            let right_mal = total_mal - left_mal;
            let n_left = (left_ben + left_mal) as f64;
            let n_right = (right_ben + right_mal) as f64;
            let children =
                n_left / n * entropy(left_ben, left_mal) + n_right / n * entropy(right_ben, right_mal);
            // Zero-gain splits are accepted (max_depth, purity and min_leaf
            // are the stopping rules); XOR-shaped data needs them.
            let gain = parent - children;
            let better = match &best {
                None => true,
                Some(b) => gain > b.gain + 1e-12,
            };
            if better {
                best = Some(BestSplit {
                    gain,
                    feature,
                    threshold,
                });
            }
        }
    }
    best
}

fn build(
    d: &LabeledDataset,
    idx: &[usize],
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let malicious = idx
        .iter()
        .filter(|i| d.samples[**i].label == Class::Malicious)
        .count();
    let pure = malicious == 0 || malicious == idx.len();
    if depth >= max_depth || pure || idx.len() < min_leaf {
        nodes.push(TreeNode::Leaf {
            class: majority(d, idx),
        });
        return nodes.len() - 1;
    }
    let Some(split) = best_split(d, idx) else {
        nodes.push(TreeNode::Leaf {
            class: majority(d, idx),
        });
        return nodes.len() - 1;
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|i| d.samples[**i].features[split.feature] <= split.threshold);
    let placeholder = nodes.len();
    nodes.push(TreeNode::Leaf { class: Class::Benign });
    let left = build(d, &left_idx, depth + 1, max_depth, min_leaf, nodes);
    let right = build(d, &right_idx, depth + 1, max_depth, min_leaf, nodes);
    nodes[placeholder] = TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    placeholder
}

/// Train with the default `min_leaf`.
pub fn train_dt(d: &LabeledDataset, max_depth: usize) -> DecisionTreeModel {
    train_dt_with(d, max_depth, DEFAULT_MIN_LEAF)
}

/// Train a depth-bounded tree. A single-class dataset yields a single leaf
/// of that class rather than an error.
pub fn train_dt_with(d: &LabeledDataset, max_depth: usize, min_leaf: usize) -> DecisionTreeModel {
    assert!(max_depth >= 1, "max_depth must be at least 1");
    assert!(!d.is_empty(), "cannot train on an empty dataset");
    let idx: Vec<usize> = (0..d.samples.len()).collect();
    let mut nodes = Vec::new();
    let root = build(d, &idx, 0, max_depth, min_leaf, &mut nodes);
    let model = DecisionTreeModel {
        nodes,
        root,
        max_depth,
        feature_len: d.feature_len,
    };
    debug_assert!(model.validate().is_ok());
    model
}
