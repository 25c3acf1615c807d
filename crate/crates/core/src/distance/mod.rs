//! Pairwise nucleotide distances.
//!
//! Sites where either sequence holds anything other than A, C, G or T are
//! dropped from a pair's comparison (pairwise deletion).

mod matrix;
mod packed;

use thiserror::Error;

use crate::alignment::{Alignment, SequenceRecord};

pub use matrix::{DistanceKind, DistanceMatrix, PairFlag, BINARY_MAGIC, BINARY_VERSION};
pub use packed::PackedSequence;

#[derive(Debug, Error, PartialEq)]
pub enum DistanceError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("distance matrix needs at least two sequences")]
    TooFewSequences,
    #[error("matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("malformed matrix: {0}")]
    Format(String),
}

/// Site counts for one sequence pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairComparison {
    pub compared_sites: usize,
    pub mismatches: usize,
    /// A<->G and C<->T differences.
    pub transitions: usize,
    pub transversions: usize,
}

pub fn compare_pair(x: &SequenceRecord, y: &SequenceRecord) -> Result<PairComparison, DistanceError> {
    if x.len() != y.len() {
        return Err(DistanceError::LengthMismatch(x.len(), y.len()));
    }
    Ok(PackedSequence::new(x.residues()).compare(&PackedSequence::new(y.residues())))
}

/// Proportion of mismatched sites; `None` when no site was comparable.
pub fn p_distance(c: &PairComparison) -> Option<f64> {
    (c.compared_sites > 0).then(|| c.mismatches as f64 / c.compared_sites as f64)
}

/// Kimura two-parameter distance
/// `-1/2 ln(1 - 2P - Q) - 1/4 ln(1 - 2Q)` with `P`, `Q` the transition and
/// transversion proportions. `None` when nothing was compared or either log
/// argument is non-positive (saturation).
pub fn k80_distance(c: &PairComparison) -> Option<f64> {
    if c.compared_sites == 0 {
        return None;
    }
    let l = c.compared_sites as f64;
    let p = c.transitions as f64 / l;
    let q = c.transversions as f64 / l;
    let a1 = 1.0 - 2.0 * p - q;
    let a2 = 1.0 - 2.0 * q;
    if a1 <= 0.0 || a2 <= 0.0 {
        return None;
    }
    // -0.0 for identical sequences
    Some((-0.5 * a1.ln() - 0.25 * a2.ln()).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceDistance {
    PDistance,
    K80,
}

impl SequenceDistance {
    pub fn evaluate(self, c: &PairComparison) -> Option<f64> {
        match self {
            SequenceDistance::PDistance => p_distance(c),
            SequenceDistance::K80 => k80_distance(c),
        }
    }

    pub fn kind(self) -> DistanceKind {
        match self {
            SequenceDistance::PDistance => DistanceKind::PDistance,
            SequenceDistance::K80 => DistanceKind::K80,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SaturationPolicy {
    Undefined,
    Cap(f64),
}

/// All pairwise distances of an alignment, in alignment order. Work is
/// split across rows on the current rayon pool; the result does not depend
/// on the number of workers.
pub fn build_distance_matrix(
    alignment: &Alignment,
    distance: SequenceDistance,
    policy: SaturationPolicy,
) -> Result<DistanceMatrix, DistanceError> {
    if alignment.len() < 2 {
        return Err(DistanceError::TooFewSequences);
    }
    let packed: Vec<PackedSequence> = alignment
        .records()
        .iter()
        .map(|r| PackedSequence::new(r.residues()))
        .collect();
    let mut m = DistanceMatrix::from_pair_fn(alignment.ids(), distance.kind(), |i, j| {
        distance.evaluate(&packed[i].compare(&packed[j]))
    });
    if let SaturationPolicy::Cap(cap) = policy {
        let capped = m.apply_cap(cap);
        if capped > 0 {
            log::warn!("{capped} undefined {} distances capped at {cap}", distance.kind());
        }
    }
    Ok(m)
}
