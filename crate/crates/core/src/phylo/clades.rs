use std::collections::{HashMap, HashSet};

use fixedbitset::FixedBitSet;
use rayon::prelude::*;

use super::{NodeId, PhyloTree, TreeError};

pub type TipSet = FixedBitSet;

/// Shared label-to-bit mapping so clades from different trees compare as
/// plain bitsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TipIndex {
    labels: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl TipIndex {
    /// Index following the tree's left-to-right tip order.
    pub fn of(tree: &PhyloTree) -> Self {
        Self::new(tree.tip_labels())
    }

    pub fn new(labels: Vec<String>) -> Self {
        let lookup = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Self { labels, lookup }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.lookup.get(label).copied()
    }

    /// Tip set of every node of `tree`; fails unless the tree has exactly
    /// the indexed labels.
    pub fn node_sets(&self, tree: &PhyloTree) -> Result<Vec<TipSet>, TreeError> {
        if tree.num_tips() != self.len() {
            return Err(TreeError::TipSetMismatch);
        }
        let n = self.len();
        let mut sets = vec![FixedBitSet::with_capacity(n); tree.len()];
        for v in tree.postorder() {
            if tree.is_tip(v) {
                let bit = self
                    .get(tree.tip_label(v))
                    .ok_or(TreeError::TipSetMismatch)?;
                sets[v].insert(bit);
            } else {
                let mut acc = FixedBitSet::with_capacity(n);
                for &c in tree.children(v) {
                    acc.union_with(&sets[c]);
                }
                sets[v] = acc;
            }
        }
        Ok(sets)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clade {
    pub tip_set: TipSet,
    pub node: NodeId,
}

/// One clade per internal node in post-order, as bitsets over the tree's
/// tip order.
pub fn enumerate_clades(tree: &PhyloTree) -> Vec<Clade> {
    let index = TipIndex::of(tree);
    let sets = index.node_sets(tree).expect("index built from this tree");
    tree.postorder()
        .into_iter()
        .filter(|&v| !tree.is_tip(v))
        .map(|v| Clade {
            tip_set: sets[v].clone(),
            node: v,
        })
        .collect()
}

fn internal_clade_set(tree: &PhyloTree, index: &TipIndex) -> Result<HashSet<TipSet>, TreeError> {
    let sets = index.node_sets(tree)?;
    Ok(tree
        .internal_nodes()
        .map(|v| sets[v].clone())
        .collect())
}

/// Sets each internal node's support of `reference` to the fraction of
/// `sample` trees containing the same rooted tip set.
pub fn annotate_support(reference: &PhyloTree, sample: &[PhyloTree]) -> Result<PhyloTree, TreeError> {
    if sample.is_empty() {
        return Err(TreeError::EmptySample);
    }
    let index = TipIndex::of(reference);
    let ref_sets = index.node_sets(reference)?;
    let internal: Vec<NodeId> = reference.internal_nodes().collect();

    let counts = sample
        .par_iter()
        .map(|t| {
            let present = internal_clade_set(t, &index)?;
            Ok(internal
                .iter()
                .map(|&v| usize::from(present.contains(&ref_sets[v])))
                .collect::<Vec<usize>>())
        })
        .try_reduce(
            || vec![0usize; internal.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;

    let mut supports = vec![None; reference.len()];
    for (&v, &c) in internal.iter().zip(&counts) {
        supports[v] = Some(c as f64 / sample.len() as f64);
    }
    Ok(reference.with_supports(&supports))
}
