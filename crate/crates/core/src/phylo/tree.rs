use std::collections::HashMap;

use super::TreeError;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Length of the edge above this node.
    pub branch_length: f64,
    pub label: Option<String>,
    /// Clade support in [0, 1]; only meaningful on internal nodes.
    pub support: Option<f64>,
}

impl Node {
    pub fn new(parent: Option<NodeId>) -> Self {
        Self {
            parent,
            children: Vec::new(),
            branch_length: 0.0,
            label: None,
            support: None,
        }
    }

    pub fn is_tip(&self) -> bool {
        self.children.is_empty()
    }
}

/// Rooted phylogeny stored as a node arena.
///
/// Edge attributes (length and support) live on the lower endpoint of each
/// edge. Tips are the childless nodes; their labels are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyloTree {
    nodes: Vec<Node>,
    root: NodeId,
    tips: Vec<NodeId>,
    tip_lookup: HashMap<String, NodeId>,
    /// Count of edges whose length was absent on input and set to 0.
    pub missing_lengths: usize,
}

impl PhyloTree {
    /// Validates an arena. Parent/child links must agree and form a single
    /// tree rooted at `root`.
    pub fn from_nodes(nodes: Vec<Node>, root: NodeId) -> Result<Self, TreeError> {
        if nodes.is_empty() || root >= nodes.len() || nodes[root].parent.is_some() {
            return Err(TreeError::Malformed("root missing or has a parent"));
        }
        // preorder from the root; detects orphans and cycles
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![root];
        let mut order = Vec::with_capacity(nodes.len());
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut seen[v], true) {
                return Err(TreeError::Malformed("cycle"));
            }
            order.push(v);
            for &c in nodes[v].children.iter().rev() {
                if c >= nodes.len() || nodes[c].parent != Some(v) {
                    return Err(TreeError::Malformed("inconsistent parent link"));
                }
                stack.push(c);
            }
        }
        if order.len() != nodes.len() {
            return Err(TreeError::Malformed("unreachable nodes"));
        }

        let mut tips = Vec::new();
        let mut tip_lookup = HashMap::new();
        for &v in &order {
            let node = &nodes[v];
            if v != root && !(node.branch_length >= 0.0 && node.branch_length.is_finite()) {
                return Err(TreeError::NegativeBranchLength(node.branch_length));
            }
            if let Some(s) = node.support {
                if !(0.0..=1.0).contains(&s) {
                    return Err(TreeError::InvalidSupport(s));
                }
            }
            if node.is_tip() {
                let label = node
                    .label
                    .clone()
                    .filter(|l| !l.is_empty())
                    .ok_or(TreeError::UnlabeledTip)?;
                if tip_lookup.insert(label.clone(), v).is_some() {
                    return Err(TreeError::DuplicateTipLabel(label));
                }
                tips.push(v);
            }
        }
        Ok(Self {
            nodes,
            root,
            tips,
            tip_lookup,
            missing_lengths: 0,
        })
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    pub fn is_tip(&self, id: NodeId) -> bool {
        self.nodes[id].is_tip()
    }

    pub fn branch_length(&self, id: NodeId) -> f64 {
        self.nodes[id].branch_length
    }

    pub fn support(&self, id: NodeId) -> Option<f64> {
        self.nodes[id].support
    }

    /// Tip nodes in left-to-right order.
    pub fn tips(&self) -> &[NodeId] {
        &self.tips
    }

    pub fn num_tips(&self) -> usize {
        self.tips.len()
    }

    pub fn tip_label(&self, id: NodeId) -> &str {
        self.nodes[id].label.as_deref().unwrap_or("")
    }

    /// Tip labels in left-to-right order.
    pub fn tip_labels(&self) -> Vec<String> {
        self.tips.iter().map(|&t| self.tip_label(t).to_string()).collect()
    }

    pub fn tip_by_label(&self, label: &str) -> Option<NodeId> {
        self.tip_lookup.get(label).copied()
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&v| !self.nodes[v].is_tip())
    }

    /// Children before parents; siblings left to right.
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((v, expanded)) = stack.pop() {
            if expanded {
                out.push(v);
            } else {
                stack.push((v, true));
                for &c in self.nodes[v].children.iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        out
    }

    /// Parents before children; siblings left to right.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend(self.nodes[v].children.iter().rev());
        }
        out
    }

    /// Distance from the root to every node.
    pub fn root_distances(&self) -> Vec<f64> {
        let mut depth = vec![0.0; self.nodes.len()];
        for v in self.preorder() {
            if let Some(p) = self.nodes[v].parent {
                depth[v] = depth[p] + self.nodes[v].branch_length;
            }
        }
        depth
    }

    /// Tip positions (indices into [`tips`](Self::tips)) below each node.
    pub fn tips_below(&self) -> Vec<Vec<usize>> {
        let pos: HashMap<NodeId, usize> =
            self.tips.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        let mut below: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for v in self.postorder() {
            if self.nodes[v].is_tip() {
                below[v].push(pos[&v]);
            } else {
                let mut acc = Vec::new();
                for &c in &self.nodes[v].children {
                    acc.extend_from_slice(&below[c]);
                }
                below[v] = acc;
            }
        }
        below
    }

    /// Returns a copy with the given per-node supports.
    pub fn with_supports(&self, supports: &[Option<f64>]) -> Self {
        let mut t = self.clone();
        for (node, s) in t.nodes.iter_mut().zip(supports) {
            node.support = *s;
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cherry_plus_tip() -> PhyloTree {
        // ((a,b),c)
        let mut nodes = vec![Node::new(None), Node::new(Some(0))];
        nodes[0].children = vec![1, 4];
        nodes[1].children = vec![2, 3];
        for (name, parent) in [("a", 1), ("b", 1), ("c", 0)] {
            let mut n = Node::new(Some(parent));
            n.label = Some(name.into());
            n.branch_length = 0.1;
            nodes.push(n);
        }
        PhyloTree::from_nodes(nodes, 0).unwrap()
    }

    #[test]
    fn traversal_orders() {
        let t = cherry_plus_tip();
        assert_eq!(t.preorder(), vec![0, 1, 2, 3, 4]);
        assert_eq!(t.postorder(), vec![2, 3, 1, 4, 0]);
        assert_eq!(t.tip_labels(), vec!["a", "b", "c"]);
    }

    #[test]
    fn duplicate_tip_rejected() {
        let mut nodes = cherry_plus_tip().nodes().to_vec();
        nodes[4].label = Some("a".into());
        assert_eq!(
            PhyloTree::from_nodes(nodes, 0).unwrap_err(),
            TreeError::DuplicateTipLabel("a".into())
        );
    }
}
