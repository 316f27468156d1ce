use serde::{Deserialize, Serialize};

use super::GbdtError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// `value <= threshold` goes left; NaN also goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Flat binary tree rooted at `nodes[0]`; children always follow their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature] > threshold { right } else { left };
                }
            }
        }
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Structural check used when loading untrusted model files.
    pub fn validate(&self, n_features: usize) -> Result<(), GbdtError> {
        if self.nodes.is_empty() {
            return Err(GbdtError::MalformedTree("tree has no nodes".into()));
        }
        let mut referenced = vec![false; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { value } if !value.is_finite() => {
                    return Err(GbdtError::MalformedTree(format!("node {i}: non-finite leaf")));
                }
                Node::Leaf { .. } => {}
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_features {
                        return Err(GbdtError::MalformedTree(format!(
                            "node {i}: feature {feature} out of range"
                        )));
                    }
                    if threshold.is_nan() {
                        return Err(GbdtError::MalformedTree(format!("node {i}: NaN threshold")));
                    }
                    for child in [left, right] {
                        if child <= i || child >= self.nodes.len() || referenced[child] {
                            return Err(GbdtError::MalformedTree(format!(
                                "node {i}: bad child index {child}"
                            )));
                        }
                        referenced[child] = true;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> Tree {
        Tree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 1.0 },
            ],
        }
    }

    #[test]
    fn stump_routes_on_threshold() {
        let t = stump();
        assert_eq!(t.predict(&[0.5]), 0.0);
        assert_eq!(t.predict(&[0.6]), 1.0);
        assert_eq!(t.predict(&[f64::NAN]), 0.0);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.n_leaves(), 2);
        assert!(t.validate(1).is_ok());
    }

    #[test]
    fn validation_catches_bad_structure() {
        let mut t = stump();
        assert!(t.validate(0).is_err());
        if let Node::Split { right, .. } = &mut t.nodes[0] {
            *right = 7;
        }
        assert!(t.validate(1).is_err());
        let cyclic = Tree {
            nodes: vec![Node::Split {
                feature: 0,
                threshold: 0.0,
                left: 0,
                right: 0,
            }],
        };
        assert!(cyclic.validate(1).is_err());
    }
}
