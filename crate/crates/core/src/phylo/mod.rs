//! Rooted-tree algebra: patristic distances, clade enumeration, support
//! annotation from tree samples, majority-rule consensus and outgroup
//! rooting.
//!
//! Clades are compared as rooted tip sets over a shared label index, so
//! every tree in a sample must be rooted the same way first.

mod clades;
mod consensus;
mod reroot;
mod tree;

use thiserror::Error;

pub use clades::{annotate_support, enumerate_clades, Clade, TipIndex, TipSet};
pub use consensus::majority_consensus;
pub use reroot::root_at_outgroup;
pub use tree::{Node, NodeId, PhyloTree};

use crate::distance::{DistanceKind, DistanceMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("duplicate tip label {0}")]
    DuplicateTipLabel(String),
    #[error("tip without a label")]
    UnlabeledTip,
    #[error("invalid branch length {0}")]
    NegativeBranchLength(f64),
    #[error("support value {0} outside [0, 1] after scaling")]
    InvalidSupport(f64),
    #[error("malformed tree: {0}")]
    Malformed(&'static str),
    #[error("trees do not share the same tip labels")]
    TipSetMismatch,
    #[error("outgroup tip {0} not found")]
    OutgroupMissing(String),
    #[error("outgroup is not monophyletic")]
    OutgroupNotMonophyletic,
    #[error("tree sample is empty")]
    EmptySample,
    #[error("tree needs at least two tips")]
    TooFewTips,
}

/// Sum of branch lengths on the path between every pair of tips, in tip order.
pub fn patristic_matrix(tree: &PhyloTree) -> Result<DistanceMatrix, TreeError> {
    if tree.num_tips() < 2 {
        return Err(TreeError::TooFewTips);
    }
    let tips = tree.tips();
    let pos: std::collections::HashMap<NodeId, usize> =
        tips.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let n = tips.len();

    // one traversal from each tip over the undirected tree; rows are
    // filled independently so the pair function is a lookup
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        tips.par_iter()
            .map(|&start| {
                let mut row = vec![0.0; n];
                let mut stack = vec![(start, usize::MAX, 0.0f64)];
                while let Some((v, from, d)) = stack.pop() {
                    if let Some(&i) = pos.get(&v) {
                        row[i] = d;
                    }
                    if let Some(p) = tree.parent(v) {
                        if p != from {
                            stack.push((p, v, d + tree.branch_length(v)));
                        }
                    }
                    for &c in tree.children(v) {
                        if c != from {
                            stack.push((c, v, d + tree.branch_length(c)));
                        }
                    }
                }
                row
            })
            .collect()
    };
    Ok(DistanceMatrix::from_pair_fn(
        tree.tip_labels(),
        DistanceKind::Patristic,
        |i, j| Some(rows[i][j]),
    ))
}
