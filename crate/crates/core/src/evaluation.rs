//! Partition comparison: adjusted Rand index, scoring against a reference
//! known only on part of the sample, threshold sweeps, cross-method
//! co-clustering and cluster-size summaries.

use std::collections::{BTreeMap, HashMap};

use kodama::{linkage, Method};
use rayon::prelude::*;
use thiserror::Error;

use crate::community::WeightedGraph;
use crate::partition::{Partition, PartitionError};

pub const SUPPORT_GRID: [f64; 3] = [0.70, 0.90, 0.95];
pub const DISTANCE_GRID: [f64; 5] = [0.015, 0.03, 0.045, 0.068, 0.077];

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("partitions do not cover the same ids")]
    IdSetMismatch,
    #[error("reference id {0} is not in the universe")]
    ReferenceOutsideUniverse(String),
    #[error("partition is empty")]
    EmptyPartition,
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

fn choose2(k: u64) -> u64 {
    k * k.saturating_sub(1) / 2
}

/// Hubert–Arabie adjusted Rand index.
///
/// When both partitions are trivial enough that the index is 0/0 the result
/// is 1 for identical groupings and 0 otherwise.
pub fn adjusted_rand_index(p: &Partition, q: &Partition) -> Result<f64, EvalError> {
    if !p.same_ids(q) {
        return Err(EvalError::IdSetMismatch);
    }
    let mut table: HashMap<(&str, &str), u64> = HashMap::new();
    let mut rows: HashMap<&str, u64> = HashMap::new();
    let mut cols: HashMap<&str, u64> = HashMap::new();
    for ((id, a), (_, b)) in p.iter().zip(q.iter()) {
        debug_assert_eq!(Some(a), p.label(id));
        *table.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let index: u64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: u64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: u64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(p.len() as u64);
    let (index, sum_a, sum_b) = (index as f64, sum_a as f64, sum_b as f64);
    let expected = if total == 0 { 0.0 } else { sum_a * sum_b / total as f64 };
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        let identical = p.canonical() == q.canonical();
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// A reference partition over part of a universe of ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    reference: Partition,
    universe: Vec<String>,
}

impl ReferenceSet {
    pub fn new(reference: Partition, universe: Vec<String>) -> Result<Self, EvalError> {
        let known: std::collections::HashSet<&str> = universe.iter().map(String::as_str).collect();
        if known.len() != universe.len() {
            return Err(EvalError::IdSetMismatch);
        }
        if let Some(id) = reference.ids().find(|id| !known.contains(id)) {
            return Err(EvalError::ReferenceOutsideUniverse(id.to_string()));
        }
        Ok(Self { reference, universe })
    }

    pub fn reference(&self) -> &Partition {
        &self.reference
    }

    pub fn universe(&self) -> &[String] {
        &self.universe
    }
}

/// Extends a partial reference to the whole universe and collapses the
/// candidate accordingly.
///
/// Candidate clusters touching a reference id are numbered `1..=K_c` by
/// first appearance in universe order; every other id gets `K_c + 1`. The
/// gold standard numbers reference clusters `1..=K_r` the same way and
/// gives `K_r + 1` to all ids outside the reference.
pub fn partial_gold_transform(candidate: &Partition, rs: &ReferenceSet) -> Result<(Partition, Partition), EvalError> {
    if candidate.len() != rs.universe.len() || rs.universe.iter().any(|id| !candidate.contains(id)) {
        return Err(EvalError::IdSetMismatch);
    }
    let touching: std::collections::HashSet<&str> = rs
        .reference
        .ids()
        .map(|id| candidate.label(id).expect("checked coverage"))
        .collect();

    let mut cand_codes: HashMap<&str, usize> = HashMap::new();
    let mut gold_codes: HashMap<&str, usize> = HashMap::new();
    let mut cand_labels = Vec::with_capacity(rs.universe.len());
    let mut gold_labels = Vec::with_capacity(rs.universe.len());
    let k_c = touching.len();
    let k_r = rs.reference.num_clusters();
    for id in &rs.universe {
        let label = candidate.label(id).expect("checked coverage");
        cand_labels.push(if touching.contains(label) {
            let next = cand_codes.len() + 1;
            *cand_codes.entry(label).or_insert(next)
        } else {
            k_c + 1
        });
        gold_labels.push(match rs.reference.label(id) {
            Some(r) => {
                let next = gold_codes.len() + 1;
                *gold_codes.entry(r).or_insert(next)
            }
            None => k_r + 1,
        });
    }
    Ok((
        Partition::from_labels(&rs.universe, &cand_labels)?,
        Partition::from_labels(&rs.universe, &gold_labels)?,
    ))
}

/// ARI between the transformed candidate and the expanded gold standard.
pub fn partial_gold_ari(candidate: &Partition, rs: &ReferenceSet) -> Result<f64, EvalError> {
    let (c, g) = partial_gold_transform(candidate, rs)?;
    adjusted_rand_index(&c, &g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub support_min: f64,
    pub distance_max: f64,
    pub ari: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub best: SweepCell,
    /// Every grid point, ordered by support then distance.
    pub grid: Vec<SweepCell>,
}

impl SweepResult {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("support_min\tdistance_max\tari\n");
        for c in &self.grid {
            out.push_str(&format!("{}\t{}\t{:.6}\n", c.support_min, c.distance_max, c.ari));
        }
        out
    }
}

/// Scores `runner` at every grid point against the reference and returns
/// the best cell. Ties go to the smallest distance, then the largest
/// support.
pub fn cutpoint_sweep<F, E>(
    support_grid: &[f64],
    distance_grid: &[f64],
    rs: &ReferenceSet,
    runner: F,
) -> Result<SweepResult, E>
where
    F: Fn(f64, f64) -> Result<Partition, E> + Sync,
    E: From<EvalError> + Send,
{
    if support_grid.is_empty() || distance_grid.is_empty() {
        return Err(EvalError::EmptyGrid.into());
    }
    let points: Vec<(f64, f64)> = support_grid
        .iter()
        .flat_map(|&s| distance_grid.iter().map(move |&d| (s, d)))
        .collect();
    let scored: Vec<Result<SweepCell, E>> = points
        .par_iter()
        .map(|&(s, d)| {
            let p = runner(s, d)?;
            let ari = partial_gold_ari(&p, rs)?;
            Ok(SweepCell {
                support_min: s,
                distance_max: d,
                ari,
            })
        })
        .collect();
    let mut grid: Vec<SweepCell> = scored.into_iter().collect::<Result<_, _>>()?;
    grid.sort_by(|a, b| {
        a.support_min
            .total_cmp(&b.support_min)
            .then(a.distance_max.total_cmp(&b.distance_max))
    });
    let best = *grid
        .iter()
        .min_by(|a, b| {
            b.ari
                .total_cmp(&a.ari)
                .then(a.distance_max.total_cmp(&b.distance_max))
                .then(b.support_min.total_cmp(&a.support_min))
        })
        .expect("non-empty grid");
    Ok(SweepResult { best, grid })
}

/// Co-clustering frequencies across methods, restricted to ids that are
/// in a multi-member cluster under at least one method.
#[derive(Debug, Clone, PartialEq)]
pub struct CoclusterMatrix {
    /// Retained ids in seriated order.
    pub ids: Vec<String>,
    /// Fraction of partitions placing each pair together, zero diagonal.
    pub graph: WeightedGraph,
}

impl CoclusterMatrix {
    pub fn row_order(&self) -> String {
        let mut out = self.ids.join("\n");
        out.push('\n');
        out
    }
}

/// Builds the cross-method co-clustering matrix. Rows follow the leaf order
/// of an average-linkage tree on `1 − frequency`.
pub fn method_cocluster_matrix<S: AsRef<str>>(partitions: &[Partition], ids: &[S]) -> Result<CoclusterMatrix, EvalError> {
    let labels: Vec<Vec<usize>> = partitions
        .iter()
        .map(|p| p.dense_labels(ids).map_err(|_| EvalError::IdSetMismatch))
        .collect::<Result<_, _>>()?;
    let sizes: Vec<HashMap<&str, usize>> = partitions
        .iter()
        .map(|p| p.cluster_sizes().into_iter().collect())
        .collect();
    let kept: Vec<usize> = (0..ids.len())
        .filter(|&i| {
            partitions
                .iter()
                .zip(&sizes)
                .any(|(p, s)| s[p.label(ids[i].as_ref()).expect("checked")] >= 2)
        })
        .collect();
    let n = kept.len();
    let m = partitions.len().max(1) as f64;
    let freq = |a: usize, b: usize| -> f64 {
        labels.iter().filter(|l| l[kept[a]] == l[kept[b]]).count() as f64 / m
    };

    let order: Vec<usize> = if n < 2 {
        (0..n).collect()
    } else {
        let mut condensed = Vec::with_capacity(n * (n - 1) / 2);
        for a in 0..n {
            for b in a + 1..n {
                condensed.push(1.0 - freq(a, b));
            }
        }
        let dendrogram = linkage(&mut condensed, n, Method::Average);
        let steps = dendrogram.steps();
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![n + steps.len() - 1];
        while let Some(c) = stack.pop() {
            if c < n {
                order.push(c);
            } else {
                let s = &steps[c - n];
                stack.push(s.cluster2);
                stack.push(s.cluster1);
            }
        }
        order
    };

    let mut graph = WeightedGraph::empty(n);
    for a in 0..n {
        for b in a + 1..n {
            graph
                .set_weight(a, b, freq(order[a], order[b]))
                .expect("frequency in [0, 1]");
        }
    }
    Ok(CoclusterMatrix {
        ids: order.iter().map(|&k| ids[kept[k]].as_ref().to_string()).collect(),
        graph,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSummary {
    pub mean_size: f64,
    /// Zero when there is no multi-member cluster.
    pub mean_size_no_singletons: f64,
    pub median_size_no_singletons: f64,
    pub max_size: usize,
    pub num_singletons: usize,
    pub num_clusters_ge2: usize,
}

pub fn partition_summary(p: &Partition) -> Result<PartitionSummary, EvalError> {
    if p.is_empty() {
        return Err(EvalError::EmptyPartition);
    }
    let sizes: Vec<usize> = p.cluster_sizes().into_values().collect();
    let mut multi: Vec<usize> = sizes.iter().copied().filter(|&s| s >= 2).collect();
    multi.sort_unstable();
    let k = multi.len();
    let (mean_multi, median_multi) = if k == 0 {
        (0.0, 0.0)
    } else {
        let mean = multi.iter().sum::<usize>() as f64 / k as f64;
        let median = if k % 2 == 1 {
            multi[k / 2] as f64
        } else {
            (multi[k / 2 - 1] + multi[k / 2]) as f64 / 2.0
        };
        (mean, median)
    };
    Ok(PartitionSummary {
        mean_size: p.len() as f64 / sizes.len() as f64,
        mean_size_no_singletons: mean_multi,
        median_size_no_singletons: median_multi,
        max_size: sizes.iter().copied().max().unwrap_or(0),
        num_singletons: sizes.iter().filter(|&&s| s == 1).count(),
        num_clusters_ge2: k,
    })
}

/// One summary row per named partition.
pub fn summary_tsv(rows: &BTreeMap<String, PartitionSummary>) -> String {
    let mut out = String::from(
        "method\tmean_size\tmean_size_no_singletons\tmedian_size_no_singletons\tmax_size\tnum_singletons\tnum_clusters_ge2\n",
    );
    for (name, s) in rows {
        out.push_str(&format!(
            "{name}\t{:.4}\t{:.4}\t{}\t{}\t{}\t{}\n",
            s.mean_size,
            s.mean_size_no_singletons,
            s.median_size_no_singletons,
            s.max_size,
            s.num_singletons,
            s.num_clusters_ge2
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("x{i:02}")).collect()
    }

    fn part(labels: &[usize]) -> Partition {
        Partition::from_labels(&ids(labels.len()), labels).unwrap()
    }

    /// ARI from the four pair-agreement counts.
    fn pair_count_ari(a: &[usize], b: &[usize]) -> f64 {
        let (mut ss, mut sd, mut ds, mut dd) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                match (a[i] == a[j], b[i] == b[j]) {
                    (true, true) => ss += 1.0,
                    (true, false) => sd += 1.0,
                    (false, true) => ds += 1.0,
                    (false, false) => dd += 1.0,
                }
            }
        }
        let denom = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
        if denom == 0.0 {
            return if sd + ds == 0.0 { 1.0 } else { 0.0 };
        }
        2.0 * (ss * dd - sd * ds) / denom
    }

    #[test]
    fn identical_and_crossed() {
        assert_eq!(adjusted_rand_index(&part(&[1, 1, 2, 2]), &part(&[5, 5, 3, 3])).unwrap(), 1.0);
        let crossed = adjusted_rand_index(&part(&[1, 1, 2, 2]), &part(&[1, 2, 1, 2])).unwrap();
        assert!((crossed - pair_count_ari(&[1, 1, 2, 2], &[1, 2, 1, 2])).abs() < 1e-15);
        assert!((crossed + 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_cases() {
        assert_eq!(adjusted_rand_index(&part(&[1, 2, 3]), &part(&[1, 2, 3])).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&part(&[1, 1, 1]), &part(&[4, 4, 4])).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&part(&[1, 1, 1]), &part(&[1, 2, 3])).unwrap(), 0.0);
        assert_eq!(adjusted_rand_index(&part(&[1]), &part(&[2])).unwrap(), 1.0);
        let other = Partition::from_labels(&["a", "b"], &[1, 1]).unwrap();
        assert_eq!(adjusted_rand_index(&part(&[1, 1]), &other).unwrap_err(), EvalError::IdSetMismatch);
    }

    #[test]
    fn random_pairs_match_pair_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..500 {
            let n = rng.random_range(1..=12);
            let ka = rng.random_range(1..=n);
            let kb = rng.random_range(1..=n);
            let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..ka)).collect();
            let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..kb)).collect();
            let got = adjusted_rand_index(&part(&a), &part(&b)).unwrap();
            assert!((got - pair_count_ari(&a, &b)).abs() <= 1e-12);
            assert!((got - adjusted_rand_index(&part(&b), &part(&a)).unwrap()).abs() <= 1e-12);
        }
    }

    fn worked_reference() -> ReferenceSet {
        let r = Partition::from_labels(&ids(10)[..6], &[1, 1, 1, 2, 2, 2]).unwrap();
        ReferenceSet::new(r, ids(10)).unwrap()
    }

    #[test]
    fn worked_transform() {
        let (c, g) = partial_gold_transform(&part(&[1, 1, 2, 3, 3, 3, 3, 4, 4, 5]), &worked_reference()).unwrap();
        assert_eq!(c, part(&[1, 1, 2, 3, 3, 3, 3, 4, 4, 4]));
        assert_eq!(g, part(&[1, 1, 1, 2, 2, 2, 3, 3, 3, 3]));
    }

    #[test]
    fn gold_candidate_scores_one() {
        let rs = worked_reference();
        let gold = part(&[1, 1, 1, 2, 2, 2, 3, 3, 3, 3]);
        let (c, g) = partial_gold_transform(&gold, &rs).unwrap();
        assert_eq!(c, g);
        assert_eq!(partial_gold_ari(&gold, &rs).unwrap(), 1.0);
    }

    #[test]
    fn all_singleton_candidate() {
        let rs = worked_reference();
        let (c, _) = partial_gold_transform(&part(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]), &rs).unwrap();
        assert_eq!(c, part(&[1, 2, 3, 4, 5, 6, 7, 7, 7, 7]));
    }

    #[test]
    fn transform_keeps_touching_relations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rs = worked_reference();
        for _ in 0..100 {
            let labels: Vec<usize> = (0..10).map(|_| rng.random_range(0..6)).collect();
            let cand = part(&labels);
            let (c, _) = partial_gold_transform(&cand, &rs).unwrap();
            let touching: Vec<&str> = rs.reference().ids().map(|id| cand.label(id).unwrap()).collect();
            for a in rs.universe() {
                for b in rs.universe() {
                    let (la, lb) = (cand.label(a).unwrap(), cand.label(b).unwrap());
                    if touching.contains(&la) && touching.contains(&lb) {
                        assert_eq!(la == lb, c.label(a) == c.label(b));
                    }
                }
            }
        }
    }

    #[test]
    fn reference_must_sit_in_universe() {
        let r = Partition::from_labels(&["zz"], &[1]).unwrap();
        assert_eq!(
            ReferenceSet::new(r, ids(3)).unwrap_err(),
            EvalError::ReferenceOutsideUniverse("zz".into())
        );
    }

    #[test]
    fn sweep_tie_rules() {
        let rs = worked_reference();
        let gold = part(&[1, 1, 1, 2, 2, 2, 3, 3, 3, 3]);
        let bad = part(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
        // perfect at distance >= 0.045 for every support
        let runner = |_: f64, d: f64| -> Result<Partition, EvalError> { Ok(if d >= 0.045 { gold.clone() } else { bad.clone() }) };
        let r = cutpoint_sweep(&SUPPORT_GRID, &DISTANCE_GRID, &rs, runner).unwrap();
        assert_eq!((r.best.support_min, r.best.distance_max), (0.95, 0.045));
        assert_eq!(r.grid.len(), 15);
        let mut rev_s = SUPPORT_GRID;
        rev_s.reverse();
        let mut rev_d = DISTANCE_GRID;
        rev_d.reverse();
        assert_eq!(cutpoint_sweep(&rev_s, &rev_d, &rs, runner).unwrap(), r);

        let single = cutpoint_sweep(&[0.7], &[0.077], &rs, runner).unwrap();
        assert_eq!((single.best.support_min, single.best.distance_max), (0.7, 0.077));
        assert_eq!(cutpoint_sweep(&[], &[0.1], &rs, runner).unwrap_err(), EvalError::EmptyGrid);
    }

    #[test]
    fn sweep_unique_maximum() {
        let rs = worked_reference();
        let gold = part(&[1, 1, 1, 2, 2, 2, 3, 3, 3, 3]);
        let near = part(&[1, 1, 2, 3, 3, 3, 4, 4, 4, 4]);
        let runner = |s: f64, d: f64| -> Result<Partition, EvalError> {
            Ok(if s == 0.70 && d == 0.077 { gold.clone() } else { near.clone() })
        };
        let r = cutpoint_sweep(&SUPPORT_GRID, &DISTANCE_GRID, &rs, runner).unwrap();
        assert_eq!((r.best.support_min, r.best.distance_max, r.best.ari), (0.70, 0.077, 1.0));
        assert!(r.grid.iter().filter(|c| c.ari == 1.0).count() == 1);
    }

    #[test]
    fn cocluster_identical_methods() {
        let p = part(&[1, 1, 2, 2, 2, 3]);
        let m = method_cocluster_matrix(&vec![p.clone(); 6], &ids(6)).unwrap();
        assert_eq!(m.ids.len(), 5);
        assert!(!m.ids.contains(&"x06".to_string()));
        for a in 0..5 {
            for b in 0..5 {
                let same = p.label(&m.ids[a]) == p.label(&m.ids[b]);
                assert_eq!(m.graph.weight(a, b), if a != b && same { 1.0 } else { 0.0 });
            }
        }
        // seriation keeps clusters contiguous
        let labels: Vec<&str> = m.ids.iter().map(|id| p.label(id).unwrap()).collect();
        let changes = labels.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1);
    }

    #[test]
    fn cocluster_matches_manual_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let n = rng.random_range(2..=15);
            let parts: Vec<Partition> = (0..3)
                .map(|_| part(&(0..n).map(|_| rng.random_range(0..n / 2 + 1)).collect::<Vec<_>>()))
                .collect();
            let m = method_cocluster_matrix(&parts, &ids(n)).unwrap();
            for a in 0..m.ids.len() {
                for b in 0..m.ids.len() {
                    if a == b {
                        continue;
                    }
                    let count = parts.iter().filter(|p| p.label(&m.ids[a]) == p.label(&m.ids[b])).count();
                    assert_eq!(m.graph.weight(a, b), count as f64 / 3.0);
                }
            }
        }
    }

    #[test]
    fn summary_small() {
        let p = Partition::from_labels(&["a", "b", "c"], &[1, 2, 2]).unwrap();
        let s = partition_summary(&p).unwrap();
        assert_eq!(s.mean_size, 1.5);
        assert_eq!(s.mean_size_no_singletons, 2.0);
        assert_eq!(s.num_singletons, 1);
        assert_eq!(s.num_clusters_ge2, 1);
        assert_eq!(partition_summary(&Partition::new()).unwrap_err(), EvalError::EmptyPartition);
    }

    #[test]
    fn summary_matches_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.random_range(1..60);
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let s = partition_summary(&part(&labels)).unwrap();
            let mut counts: HashMap<usize, usize> = HashMap::new();
            for l in &labels {
                *counts.entry(*l).or_default() += 1;
            }
            let singles = counts.values().filter(|&&c| c == 1).count();
            assert_eq!(s.num_singletons, singles);
            assert_eq!(s.num_clusters_ge2, counts.len() - singles);
            assert_eq!(s.max_size, *counts.values().max().unwrap());
            assert!((s.mean_size - n as f64 / counts.len() as f64).abs() < 1e-12);
            if s.num_clusters_ge2 > 0 {
                assert!(s.max_size as f64 >= s.median_size_no_singletons && s.median_size_no_singletons >= 1.0);
            }
        }
    }
}
