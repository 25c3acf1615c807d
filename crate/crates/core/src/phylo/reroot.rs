use fixedbitset::FixedBitSet;

use super::clades::TipIndex;
use super::{Node, NodeId, PhyloTree, TreeError};

struct Draft {
    children: Vec<usize>,
    length: f64,
    support: Option<f64>,
    label: Option<String>,
}

/// Roots the tree on the edge separating `outgroup` from the remaining tips
/// and removes the outgroup.
///
/// The outgroup only has to be a clade of the unrooted tree. Branch lengths
/// and supports travel with their edges, and nodes left with a single child
/// are spliced out with their edge lengths summed.
pub fn root_at_outgroup<S: AsRef<str>>(
    tree: &PhyloTree,
    outgroup: &[S],
) -> Result<PhyloTree, TreeError> {
    let index = TipIndex::of(tree);
    let n = index.len();
    let mut out_set = FixedBitSet::with_capacity(n);
    for id in outgroup {
        let bit = index
            .get(id.as_ref())
            .ok_or_else(|| TreeError::OutgroupMissing(id.as_ref().to_string()))?;
        out_set.insert(bit);
    }
    if out_set.count_ones(..) == 0 || out_set.count_ones(..) == n {
        return Err(TreeError::OutgroupNotMonophyletic);
    }
    let mut in_set = out_set.clone();
    in_set.toggle_range(..);

    let sets = index.node_sets(tree)?;
    // the cut edge is (keep, drop): keep lies on the ingroup side
    let cut = (0..tree.len()).find_map(|v| {
        let parent = tree.parent(v)?;
        if sets[v] == out_set {
            Some((parent, v))
        } else if sets[v] == in_set {
            Some((v, parent))
        } else {
            None
        }
    });
    let (keep, drop) = cut.ok_or(TreeError::OutgroupNotMonophyletic)?;

    let draft = orient(tree, keep, drop);
    compress(&draft)
}

/// Re-hangs the component containing `start` (with `excluded` removed) from
/// `start`. Index 0 of the result is the new root.
fn orient(tree: &PhyloTree, start: NodeId, excluded: NodeId) -> Vec<Draft> {
    let mut draft: Vec<Draft> = Vec::new();
    // (old node, old node we came from, new parent, edge length, edge support)
    let mut stack = vec![(start, usize::MAX, usize::MAX, 0.0, None)];
    while let Some((v, from, new_parent, length, support)) = stack.pop() {
        let id = draft.len();
        draft.push(Draft {
            children: Vec::new(),
            length,
            support,
            label: tree.node(v).label.clone(),
        });
        if new_parent != usize::MAX {
            draft[new_parent].children.push(id);
        }
        let mut next = Vec::new();
        if let Some(p) = tree.parent(v) {
            if p != from && p != excluded {
                next.push((p, tree.branch_length(v), tree.support(v)));
            }
        }
        for &c in tree.children(v) {
            if c != from && c != excluded {
                next.push((c, tree.branch_length(c), tree.support(c)));
            }
        }
        for (w, len, sup) in next.into_iter().rev() {
            stack.push((w, v, id, len, sup));
        }
    }
    draft
}

fn compress(draft: &[Draft]) -> Result<PhyloTree, TreeError> {
    let mut nodes: Vec<Node> = Vec::with_capacity(draft.len());
    // (draft node, new parent, carried length, carried support)
    let mut stack: Vec<(usize, Option<NodeId>, f64, Option<f64>)> = vec![(0, None, 0.0, None)];
    while let Some((v, parent, carry, carried_support)) = stack.pop() {
        let d = &draft[v];
        if d.children.len() == 1 {
            let (len, sup) = match parent {
                None => (0.0, None),
                Some(_) => (carry + d.length, d.support.or(carried_support)),
            };
            stack.push((d.children[0], parent, len, sup));
            continue;
        }
        let id = nodes.len();
        let mut node = Node::new(parent);
        node.label = d.label.clone();
        if parent.is_some() {
            node.branch_length = d.length + carry;
            if !d.children.is_empty() {
                node.support = d.support.or(carried_support);
            }
        }
        nodes.push(node);
        if let Some(p) = parent {
            nodes[p].children.push(id);
        }
        for &c in d.children.iter().rev() {
            stack.push((c, Some(id), 0.0, None));
        }
    }
    PhyloTree::from_nodes(nodes, 0)
}
