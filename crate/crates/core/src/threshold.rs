//! Clade-based clustering under a support gate and a within-clade distance
//! ceiling.
//!
//! The tree is walked from the root. The first node on each path whose
//! support and distance statistic both qualify becomes a cluster; tips never
//! covered by such a node are singletons. Because the walk always stops at
//! the highest qualifying node, loosening either threshold can only merge
//! clusters.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;
use thiserror::Error;

use crate::alignment::Alignment;
use crate::distance::{build_distance_matrix, DistanceMatrix, SaturationPolicy, SequenceDistance};
use crate::partition::Partition;
use crate::phylo::{patristic_matrix, NodeId, PhyloTree, TreeError};

#[derive(Debug, Error, PartialEq)]
pub enum ThresholdError {
    #[error("no sequence for tip {0}")]
    MissingSequence(String),
    #[error("internal node without support while support_min > 0")]
    UnannotatedSupport,
    #[error("tree needs at least two tips")]
    DegenerateTree,
    #[error("invalid criteria: {0}")]
    InvalidCriteria(String),
    #[error("maximum pairwise p-distance needs an alignment or distance matrix")]
    MissingAlignment,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceStatistic {
    /// Largest p-distance between any two tips of the clade.
    MaxPairwiseP,
    /// Median of the patristic distances among the clade's tips.
    MedianPatristic,
    /// Largest patristic distance among the clade's tips.
    MaxPatristic,
}

impl DistanceStatistic {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceStatistic::MaxPairwiseP => "MAX_PAIRWISE_P",
            DistanceStatistic::MedianPatristic => "MEDIAN_PATRISTIC",
            DistanceStatistic::MaxPatristic => "MAX_PATRISTIC",
        }
    }
}

impl fmt::Display for DistanceStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceStatistic {
    type Err = ThresholdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "MAX_PAIRWISE_P" => Ok(DistanceStatistic::MaxPairwiseP),
            "MEDIAN_PATRISTIC" => Ok(DistanceStatistic::MedianPatristic),
            "MAX_PATRISTIC" => Ok(DistanceStatistic::MaxPatristic),
            _ => Err(ThresholdError::InvalidCriteria(format!("unknown statistic {s}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterCriteria {
    pub support_min: f64,
    pub distance_max: f64,
    pub statistic: DistanceStatistic,
}

impl ClusterCriteria {
    pub fn new(
        support_min: f64,
        distance_max: f64,
        statistic: DistanceStatistic,
    ) -> Result<Self, ThresholdError> {
        let c = Self {
            support_min,
            distance_max,
            statistic,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ThresholdError> {
        if !(0.0..=1.0).contains(&self.support_min) {
            return Err(ThresholdError::InvalidCriteria(format!(
                "support_min {} outside [0, 1]",
                self.support_min
            )));
        }
        if !(self.distance_max > 0.0) {
            return Err(ThresholdError::InvalidCriteria(format!(
                "distance_max {} must be positive",
                self.distance_max
            )));
        }
        Ok(())
    }
}

/// Nearest-rank percentile: the value at rank `ceil(p/100 * N)` of the
/// sorted sample.
pub fn nearest_rank(values: &mut [f64], percentile: f64) -> Option<f64> {
    if values.is_empty() || !(percentile > 0.0 && percentile < 100.0) {
        return None;
    }
    let rank = ((percentile / 100.0) * values.len() as f64).ceil() as usize;
    let k = rank.clamp(1, values.len()) - 1;
    let (_, v, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    Some(*v)
}

/// Percentile of all pairwise patristic distances of `tree`, for use as a
/// distance cutoff.
pub fn percentile_cutoff(tree: &PhyloTree, percentile: f64) -> Result<f64, ThresholdError> {
    if tree.num_tips() < 2 {
        return Err(ThresholdError::DegenerateTree);
    }
    if !(percentile > 0.0 && percentile < 100.0) {
        return Err(ThresholdError::InvalidCriteria(format!(
            "percentile {percentile} outside (0, 100)"
        )));
    }
    let m = patristic_matrix(tree)?;
    let mut values = m.upper_triangle().to_vec();
    Ok(nearest_rank(&mut values, percentile).expect("non-empty"))
}

fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let (lower, upper, _) = values.select_nth_unstable_by(n / 2, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower_max + upper) / 2.0
    }
}

enum Statistics {
    /// Precomputed per node; `INFINITY` marks a disqualified clade.
    Eager(Vec<f64>),
    /// Computed on first visit from the patristic matrix.
    Median {
        patristic: DistanceMatrix,
        cache: Vec<OnceLock<f64>>,
    },
}

/// Reusable clustering of one tree under one distance statistic.
///
/// Statistics are prepared once, so sweeping many thresholds only repeats
/// the cheap top-down walk.
pub struct ThresholdClusterer<'t> {
    tree: &'t PhyloTree,
    statistic: DistanceStatistic,
    below: Vec<Vec<usize>>,
    stats: Statistics,
}

impl<'t> ThresholdClusterer<'t> {
    /// Prepares `statistic`; the alignment is only consulted for
    /// [`DistanceStatistic::MaxPairwiseP`].
    pub fn new(
        tree: &'t PhyloTree,
        statistic: DistanceStatistic,
        alignment: Option<&Alignment>,
    ) -> Result<Self, ThresholdError> {
        match statistic {
            DistanceStatistic::MaxPairwiseP => {
                let a = alignment.ok_or(ThresholdError::MissingAlignment)?;
                let records = tree
                    .tip_labels()
                    .iter()
                    .map(|id| {
                        a.get(id)
                            .cloned()
                            .ok_or_else(|| ThresholdError::MissingSequence(id.clone()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let sub = Alignment::new(records).expect("records drawn from a valid alignment");
                let m = if sub.len() < 2 {
                    DistanceMatrix::from_pair_fn(sub.ids(), SequenceDistance::PDistance.kind(), |_, _| None)
                } else {
                    build_distance_matrix(&sub, SequenceDistance::PDistance, SaturationPolicy::Undefined)
                        .expect("equal-length records")
                };
                Self::with_distances(tree, &m)
            }
            DistanceStatistic::MaxPatristic => {
                let below = tree.tips_below();
                let stats = Statistics::Eager(max_patristic(tree));
                Ok(Self {
                    tree,
                    statistic,
                    below,
                    stats,
                })
            }
            DistanceStatistic::MedianPatristic => {
                let below = tree.tips_below();
                let patristic = if tree.num_tips() < 2 {
                    DistanceMatrix::from_pair_fn(tree.tip_labels(), crate::distance::DistanceKind::Patristic, |_, _| None)
                } else {
                    patristic_matrix(tree)?
                };
                let cache = (0..tree.len()).map(|_| OnceLock::new()).collect();
                Ok(Self {
                    tree,
                    statistic,
                    below,
                    stats: Statistics::Median { patristic, cache },
                })
            }
        }
    }

    /// Maximum pairwise statistic from a precomputed sequence distance
    /// matrix whose ids cover the tree's tips.
    pub fn with_distances(tree: &'t PhyloTree, distances: &DistanceMatrix) -> Result<Self, ThresholdError> {
        let below = tree.tips_below();
        let index: Vec<usize> = tree
            .tip_labels()
            .iter()
            .map(|id| {
                distances
                    .position(id)
                    .ok_or_else(|| ThresholdError::MissingSequence(id.clone()))
            })
            .collect::<Result<_, _>>()?;
        let stats = Statistics::Eager(max_pairwise(tree, &below, |i, j| {
            distances.get(index[i], index[j]).unwrap_or(f64::INFINITY)
        }));
        Ok(Self {
            tree,
            statistic: DistanceStatistic::MaxPairwiseP,
            below,
            stats,
        })
    }

    pub fn statistic(&self) -> DistanceStatistic {
        self.statistic
    }

    /// Distance statistic of the clade below `v`.
    pub fn clade_statistic(&self, v: NodeId) -> f64 {
        match &self.stats {
            Statistics::Eager(values) => values[v],
            Statistics::Median { patristic, cache } => *cache[v].get_or_init(|| {
                let tips = &self.below[v];
                let mut values = Vec::with_capacity(tips.len() * tips.len().saturating_sub(1) / 2);
                for (a, &i) in tips.iter().enumerate() {
                    for &j in &tips[a + 1..] {
                        values.push(patristic.value(i, j));
                    }
                }
                median_in_place(&mut values)
            }),
        }
    }

    pub fn cluster(&self, support_min: f64, distance_max: f64) -> Result<Partition, ThresholdError> {
        ClusterCriteria::new(support_min, distance_max, self.statistic)?;
        let tree = self.tree;
        let root = tree.root();
        if support_min > 0.0
            && tree
                .internal_nodes()
                .any(|v| v != root && tree.support(v).is_none())
        {
            return Err(ThresholdError::UnannotatedSupport);
        }

        let labels = tree.tip_labels();
        let mut assigned: Vec<usize> = vec![0; labels.len()];
        let mut next_label = 0;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            let support = if v == root { 1.0 } else { tree.support(v).unwrap_or(0.0) };
            let accepted = tree.is_tip(v)
                || (support >= support_min && self.clade_statistic(v) <= distance_max);
            if accepted {
                next_label += 1;
                for &t in &self.below[v] {
                    assigned[t] = next_label;
                }
            } else {
                stack.extend(tree.children(v).iter().rev());
            }
        }
        Ok(Partition::from_labels(&labels, &assigned).expect("tip labels are unique"))
    }

    pub fn cluster_with(&self, criteria: &ClusterCriteria) -> Result<Partition, ThresholdError> {
        if criteria.statistic != self.statistic {
            return Err(ThresholdError::InvalidCriteria(format!(
                "clusterer prepared for {}, criteria ask for {}",
                self.statistic, criteria.statistic
            )));
        }
        self.cluster(criteria.support_min, criteria.distance_max)
    }
}

/// One-shot clustering; see [`ThresholdClusterer`] for repeated thresholds.
pub fn threshold_cluster(
    tree: &PhyloTree,
    alignment: Option<&Alignment>,
    criteria: &ClusterCriteria,
) -> Result<Partition, ThresholdError> {
    criteria.validate()?;
    ThresholdClusterer::new(tree, criteria.statistic, alignment)?.cluster_with(criteria)
}

/// Per-node maximum of `d` over tip pairs. Each pair is examined once, at
/// its most recent common ancestor.
fn max_pairwise<F>(tree: &PhyloTree, below: &[Vec<usize>], d: F) -> Vec<f64>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let cross: Vec<f64> = (0..tree.len())
        .into_par_iter()
        .map(|v| {
            let children = tree.children(v);
            let mut best = 0.0f64;
            for (a, &ca) in children.iter().enumerate() {
                for &cb in &children[a + 1..] {
                    for &i in &below[ca] {
                        for &j in &below[cb] {
                            let x = d(i, j);
                            if x > best || x.is_nan() {
                                best = if x.is_nan() { f64::INFINITY } else { x };
                            }
                        }
                    }
                }
            }
            best
        })
        .collect();
    let mut stat = cross;
    for v in tree.postorder() {
        for &c in tree.children(v) {
            stat[v] = stat[v].max(stat[c]);
        }
    }
    stat
}

fn max_patristic(tree: &PhyloTree) -> Vec<f64> {
    // height: longest path from the node down to a tip below it
    let mut height = vec![0.0f64; tree.len()];
    let mut stat = vec![0.0f64; tree.len()];
    for v in tree.postorder() {
        let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &c in tree.children(v) {
            stat[v] = stat[v].max(stat[c]);
            let reach = height[c] + tree.branch_length(c);
            if reach > first {
                second = first;
                first = reach;
            } else if reach > second {
                second = reach;
            }
        }
        if first.is_finite() {
            height[v] = first;
        }
        if second.is_finite() {
            stat[v] = stat[v].max(first + second);
        }
    }
    stat
}
