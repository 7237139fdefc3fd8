//! Decision tree inference: a chain of attribute tests ending in a class
//! leaf.

use serde::{Deserialize, Serialize};

use super::{Class, Policy, PolicyError, POLICY_CODE_DT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node")]
pub enum TreeNode {
    #[serde(rename = "split")]
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    #[serde(rename = "leaf")]
    Leaf { class: Class },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub nodes: Vec<TreeNode>,
    pub root: usize,
    pub max_depth: usize,
    pub feature_len: usize,
}

impl DecisionTreeModel {
    /// Single-leaf tree, the degenerate output of training on one class.
    pub fn single_leaf(class: Class, feature_len: usize) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { class }],
            root: 0,
            max_depth: 0,
            feature_len,
        }
    }

    /// Walk from the root: go left iff `x[feature] <= threshold`. Total on
    /// valid models (validation bounds both indices and depth).
    pub fn classify(&self, x: &[f64]) -> Class {
        let mut idx = self.root;
        loop {
            match self.nodes[idx] {
                TreeNode::Leaf { class } => return class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// Depth of the deepest leaf (root = depth 0).
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], idx: usize) -> usize {
            match nodes[idx] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, self.root)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    /// Check the structural invariants: the node graph reachable from the
    /// root is a tree (every non-root node has exactly one parent, no
    /// cycles, no dangling indices), every split feature is inside the
    /// feature width, and no leaf sits deeper than `max_depth`.
    pub fn validate(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        if self.root >= self.nodes.len() {
            return Err("root index out of range".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![(self.root, 0usize)];
        while let Some((idx, depth)) = stack.pop() {
            if idx >= self.nodes.len() {
                return Err(format!("child index {idx} out of range"));
            }
            if seen[idx] {
                return Err(format!("node {idx} has more than one parent"));
            }
            seen[idx] = true;
            match self.nodes[idx] {
                TreeNode::Leaf { .. } => {
                    if depth > self.max_depth {
                        return Err(format!(
                            "leaf at depth {depth} exceeds max_depth {}",
                            self.max_depth
                        ));
                    }
                }
                TreeNode::Split { feature, left, right, .. } => {
                    if feature >= self.feature_len {
                        return Err(format!(
                            "split feature {feature} outside feature length {}",
                            self.feature_len
                        ));
                    }
                    if depth >= self.max_depth {
                        return Err(format!(
                            "split at depth {depth} leaves no room under max_depth {}",
                            self.max_depth
                        ));
                    }
                    stack.push((left, depth + 1));
                    stack.push((right, depth + 1));
                }
            }
        }
        Ok(())
    }
}

impl Policy for DecisionTreeModel {
    fn kind(&self) -> &'static str {
        "dt"
    }

    fn classify(&self, x: &[f64]) -> Result<Class, PolicyError> {
        if x.len() != self.feature_len {
            return Err(PolicyError::DimensionMismatch {
                expected: self.feature_len,
                got: x.len(),
            });
        }
        Ok(DecisionTreeModel::classify(self, x))
    }

    fn policy_code(&self) -> u8 {
        POLICY_CODE_DT
    }

    fn scratch_bytes(&self) -> usize {
        // Iterative walk: node index + comparison scratch.
        32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::FEATURE_LEN;
    use crate::rng::SplitMix64;

    #[test]
    fn single_leaf_ignores_input() {
        let t = DecisionTreeModel::single_leaf(Class::Benign, FEATURE_LEN);
        assert_eq!(t.classify(&[0.0; FEATURE_LEN]), Class::Benign);
        assert_eq!(t.classify(&[1.0; FEATURE_LEN]), Class::Benign);
        t.validate().unwrap();
    }

    #[test]
    fn depth_one_split_goes_right_on_syn() {
        // Split on the SYN slot at 0.5: left (<= 0.5) benign, right malicious.
        let t = DecisionTreeModel {
            nodes: vec![
                TreeNode::Split {
                    feature: crate::packet::SYN_SLOT,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf { class: Class::Benign },
                TreeNode::Leaf { class: Class::Malicious },
            ],
            root: 0,
            max_depth: 1,
            feature_len: FEATURE_LEN,
        };
        t.validate().unwrap();
        let mut x = [0.0; FEATURE_LEN];
        x[crate::packet::SYN_SLOT] = 1.0;
        assert_eq!(t.classify(&x), Class::Malicious);
        x[crate::packet::SYN_SLOT] = 0.0;
        assert_eq!(t.classify(&x), Class::Benign);
    }

    /// Independent recursive traversal, kept deliberately naive.
    fn oracle(t: &DecisionTreeModel, idx: usize, x: &[f64]) -> Class {
        match t.nodes[idx] {
            TreeNode::Leaf { class } => class,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[feature] <= threshold {
                    oracle(t, left, x)
                } else {
                    oracle(t, right, x)
                }
            }
        }
    }

    /// Random complete-ish tree built top-down; depth bounded by `max_depth`.
    pub(crate) fn random_tree(rng: &mut SplitMix64, max_depth: usize, feature_len: usize) -> DecisionTreeModel {
        fn build(
            rng: &mut SplitMix64,
            nodes: &mut Vec<TreeNode>,
            depth: usize,
            max_depth: usize,
            feature_len: usize,
        ) -> usize {
            let make_leaf = depth >= max_depth || rng.next_f64() < 0.3;
            if make_leaf {
                let class = Class::from_index(rng.next_below(2) as usize);
                nodes.push(TreeNode::Leaf { class });
                return nodes.len() - 1;
            }
            let feature = rng.next_below(feature_len as u64) as usize;
            let threshold = rng.next_f64();
            let placeholder = nodes.len();
            nodes.push(TreeNode::Leaf { class: Class::Benign });
            let left = build(rng, nodes, depth + 1, max_depth, feature_len);
            let right = build(rng, nodes, depth + 1, max_depth, feature_len);
            nodes[placeholder] = TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            };
            placeholder
        }
        let mut nodes = Vec::new();
        let root = build(rng, &mut nodes, 0, max_depth, feature_len);
        DecisionTreeModel {
            nodes,
            root,
            max_depth,
            feature_len,
        }
    }

    #[test]
    fn matches_recursive_oracle_on_random_trees() {
        let mut rng = SplitMix64::new(0xDEC1);
        for _ in 0..20 {
            let t = random_tree(&mut rng, 12, FEATURE_LEN);
            t.validate().unwrap();
            for _ in 0..50 {
                let mut x = [0.0; FEATURE_LEN];
                for v in x.iter_mut() {
                    *v = rng.next_f64();
                }
                assert_eq!(t.classify(&x), oracle(&t, t.root, &x));
            }
        }
    }

    #[test]
    fn validate_rejects_cycles_and_bad_features() {
        let cyclic = DecisionTreeModel {
            nodes: vec![TreeNode::Split {
                feature: 0,
                threshold: 0.5,
                left: 0,
                right: 0,
            }],
            root: 0,
            max_depth: 12,
            feature_len: 4,
        };
        assert!(cyclic.validate().is_err());

        let bad_feature = DecisionTreeModel {
            nodes: vec![
                TreeNode::Split {
                    feature: 99,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf { class: Class::Benign },
                TreeNode::Leaf { class: Class::Malicious },
            ],
            root: 0,
            max_depth: 12,
            feature_len: 4,
        };
        assert!(bad_feature.validate().is_err());
    }
}
