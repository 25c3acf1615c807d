use std::collections::HashMap;

use super::clades::{TipIndex, TipSet};
use super::{Node, NodeId, PhyloTree, TreeError};

#[derive(Default)]
struct CladeTally {
    count: usize,
    length_sum: f64,
}

/// Majority-rule consensus of identically rooted trees.
///
/// Keeps every clade found in more than half of the trees. Support is the
/// clade's frequency; branch length is its mean over the trees that contain
/// it. Tip lengths average over all trees. Tip order follows the first tree.
pub fn majority_consensus(sample: &[PhyloTree]) -> Result<PhyloTree, TreeError> {
    let first = sample.first().ok_or(TreeError::EmptySample)?;
    let index = TipIndex::of(first);
    let n = index.len();
    let m = sample.len();

    let mut clades: HashMap<TipSet, CladeTally> = HashMap::new();
    let mut tip_lengths = vec![0.0; n];
    for tree in sample {
        let sets = index.node_sets(tree)?;
        for v in 0..tree.len() {
            if tree.is_tip(v) {
                let bit = sets[v].ones().next().expect("tip set has one bit");
                tip_lengths[bit] += tree.branch_length(v);
            } else if v != tree.root() && sets[v].count_ones(..) < n {
                let tally = clades.entry(sets[v].clone()).or_default();
                tally.count += 1;
                tally.length_sum += tree.branch_length(v);
            }
        }
    }

    let mut kept: Vec<(TipSet, CladeTally)> = clades
        .into_iter()
        .filter(|(_, t)| 2 * t.count > m)
        .collect();
    kept.sort_by_key(|(set, _)| (std::cmp::Reverse(set.count_ones(..)), set.minimum()));

    // node 0 is the root; clades follow in decreasing size, so scanning
    // placed clades backwards finds the smallest container first
    let mut nodes = vec![Node::new(None)];
    nodes[0].support = Some(1.0);
    let mut placed: Vec<(TipSet, NodeId)> = Vec::with_capacity(kept.len());
    let smallest_container = |placed: &[(TipSet, NodeId)], probe: &TipSet| -> NodeId {
        placed
            .iter()
            .rev()
            .find(|(set, _)| probe.is_subset(set))
            .map_or(0, |&(_, id)| id)
    };
    for (set, tally) in kept {
        let parent = smallest_container(&placed, &set);
        let id = nodes.len();
        let mut node = Node::new(Some(parent));
        node.branch_length = tally.length_sum / tally.count as f64;
        node.support = Some(tally.count as f64 / m as f64);
        nodes.push(node);
        placed.push((set, id));
    }
    let mut min_tip: Vec<usize> = vec![usize::MAX; nodes.len()];
    for (set, id) in &placed {
        min_tip[*id] = set.minimum().unwrap_or(usize::MAX);
    }
    min_tip[0] = 0;
    for (bit, label) in index.labels().iter().enumerate() {
        let mut probe = TipSet::with_capacity(n);
        probe.insert(bit);
        let parent = smallest_container(&placed, &probe);
        let mut node = Node::new(Some(parent));
        node.label = Some(label.clone());
        node.branch_length = tip_lengths[bit] / m as f64;
        nodes.push(node);
        min_tip.push(bit);
    }
    for id in 1..nodes.len() {
        let parent = nodes[id].parent.expect("non-root");
        nodes[parent].children.push(id);
    }
    for node in &mut nodes {
        node.children.sort_by_key(|&c| min_tip[c]);
    }
    PhyloTree::from_nodes(nodes, 0)
}
