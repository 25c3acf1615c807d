//! Distance-only clustering by per-sequence largest-gap detection.
//!
//! For each sequence the sorted distances to all others are scanned for the
//! largest jump within a leading fraction of the row; everything before
//! the jump counts as a friend. Friendship is symmetrised and clusters are
//! the connected components.
//!
//! This is a reimplementation of the idea, not a port of the original
//! GapProcedure library, and its output need not match that library.

use rayon::prelude::*;
use thiserror::Error;

use crate::distance::DistanceMatrix;
use crate::partition::Partition;

#[derive(Debug, Error, PartialEq)]
pub enum GapError {
    #[error("distance between {0} and {1} is undefined")]
    UndefinedDistance(String, String),
    #[error("search quantile {0} outside (0, 1]")]
    InvalidQuantile(f64),
    #[error("gap clustering needs at least two sequences")]
    TooFewSequences,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapConfig {
    pub search_quantile: f64,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            search_quantile: 0.90,
        }
    }
}

impl GapConfig {
    pub fn new(search_quantile: f64) -> Result<Self, GapError> {
        if !(search_quantile > 0.0 && search_quantile <= 1.0) {
            return Err(GapError::InvalidQuantile(search_quantile));
        }
        Ok(Self { search_quantile })
    }
}

/// Indices of the friends of sequence `i`, in ascending distance order.
///
/// Ties in the largest gap go to the earliest position; a largest gap of
/// zero yields no friends. Rows with fewer than two searchable entries
/// befriend everything searched.
pub fn friend_set(i: usize, d: &DistanceMatrix, cfg: &GapConfig) -> Result<Vec<usize>, GapError> {
    let n = d.len();
    let mut row: Vec<(f64, usize)> = Vec::with_capacity(n.saturating_sub(1));
    for j in (0..n).filter(|&j| j != i) {
        let v = d
            .get(i, j)
            .ok_or_else(|| GapError::UndefinedDistance(d.ids()[i].clone(), d.ids()[j].clone()))?;
        row.push((v, j));
    }
    row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let m = ((cfg.search_quantile * row.len() as f64).ceil() as usize).min(row.len());
    if m < 2 {
        return Ok(row[..m].iter().map(|&(_, j)| j).collect());
    }
    let mut best = 0.0;
    let mut cut = 0;
    for k in 0..m - 1 {
        let gap = row[k + 1].0 - row[k].0;
        if gap > best {
            best = gap;
            cut = k + 1;
        }
    }
    Ok(row[..cut].iter().map(|&(_, j)| j).collect())
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so the representative is deterministic
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

pub fn gap_cluster(d: &DistanceMatrix, cfg: &GapConfig) -> Result<Partition, GapError> {
    GapConfig::new(cfg.search_quantile)?;
    let n = d.len();
    if n < 2 {
        return Err(GapError::TooFewSequences);
    }
    let rows: Vec<Result<Vec<usize>, GapError>> = (0..n)
        .into_par_iter()
        .map(|i| friend_set(i, d, cfg))
        .collect();
    let friends: Vec<Vec<usize>> = rows.into_iter().collect::<Result<_, _>>()?;
    let mut uf = UnionFind::new(n);
    for (i, fs) in friends.iter().enumerate() {
        for &j in fs {
            uf.union(i, j);
        }
    }
    let labels: Vec<usize> = (0..n).map(|i| uf.find(i) + 1).collect();
    Ok(Partition::from_labels(d.ids(), &labels)
        .expect("matrix ids are unique")
        .canonical())
}
