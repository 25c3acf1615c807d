//! Weighted co-membership graphs and walktrap community detection.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use crate::distance::{DistanceKind, DistanceMatrix};
use crate::partition::{Partition, PartitionError};

#[derive(Debug, Error, PartialEq)]
pub enum CommunityError {
    #[error("graphs differ in size")]
    SizeMismatch,
    #[error("no graphs to average")]
    EmptyList,
    #[error("weight {w} at ({i}, {j}) outside [0, 1]")]
    InvalidWeight { i: usize, j: usize, w: f64 },
    #[error("weights not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// Symmetric dense weight matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    weights: Vec<f64>,
}

impl WeightedGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            weights: vec![0.0; n * n],
        }
    }

    /// From a row-major `n × n` matrix; the diagonal is ignored and zeroed.
    pub fn from_dense(n: usize, mut weights: Vec<f64>) -> Result<Self, CommunityError> {
        if weights.len() != n * n {
            return Err(CommunityError::SizeMismatch);
        }
        for i in 0..n {
            weights[i * n + i] = 0.0;
            for j in i + 1..n {
                let w = weights[i * n + j];
                if !(0.0..=1.0).contains(&w) {
                    return Err(CommunityError::InvalidWeight { i, j, w });
                }
                if w != weights[j * n + i] {
                    return Err(CommunityError::Asymmetric(i, j));
                }
            }
        }
        Ok(Self { n, weights })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) -> Result<(), CommunityError> {
        if !(0.0..=1.0).contains(&w) {
            return Err(CommunityError::InvalidWeight { i, j, w });
        }
        if i != j {
            self.weights[i * self.n + j] = w;
            self.weights[j * self.n + i] = w;
        }
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    /// Sum of weights over unordered vertex pairs.
    pub fn total_weight(&self) -> f64 {
        (0..self.n).map(|i| self.row(i)[i + 1..].iter().sum::<f64>()).sum()
    }

    /// Positive-weight neighbours of every vertex.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(j, &w)| j != i && w > 0.0)
                    .map(|(j, &w)| (j, w))
                    .collect()
            })
            .collect()
    }

    /// `i<TAB>j<TAB>weight` for every positive-weight pair with `i < j`,
    /// vertices named by `ids`.
    pub fn to_edge_tsv<S: AsRef<str>>(&self, ids: &[S]) -> String {
        let mut out = String::from("i\tj\tweight\n");
        for i in 0..self.n {
            for j in i + 1..self.n {
                let w = self.weight(i, j);
                if w > 0.0 {
                    out.push_str(&format!("{}\t{}\t{}\n", ids[i].as_ref(), ids[j].as_ref(), w));
                }
            }
        }
        out
    }

    /// Weights as an upper-triangle matrix, for the binary matrix format.
    pub fn to_matrix(&self, ids: Vec<String>) -> DistanceMatrix {
        DistanceMatrix::from_pair_fn(ids, DistanceKind::Other, |i, j| Some(self.weight(i, j)))
    }
}

/// Weight 1 between co-clustered ids, 0 otherwise.
pub fn partition_adjacency<S: AsRef<str>>(p: &Partition, id_order: &[S]) -> Result<WeightedGraph, CommunityError> {
    let labels = p.dense_labels(id_order)?;
    let n = labels.len();
    let mut g = WeightedGraph::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            if labels[i] == labels[j] {
                g.weights[i * n + j] = 1.0;
                g.weights[j * n + i] = 1.0;
            }
        }
    }
    Ok(g)
}

pub fn average_adjacency(graphs: &[WeightedGraph]) -> Result<WeightedGraph, CommunityError> {
    let first = graphs.first().ok_or(CommunityError::EmptyList)?;
    if graphs.iter().any(|g| g.n != first.n) {
        return Err(CommunityError::SizeMismatch);
    }
    let mut sum = vec![0.0; first.weights.len()];
    for g in graphs {
        for (s, w) in sum.iter_mut().zip(&g.weights) {
            *s += w;
        }
    }
    let count = graphs.len() as f64;
    for s in &mut sum {
        *s /= count;
    }
    Ok(WeightedGraph {
        n: first.n,
        weights: sum,
    })
}

/// Newman modularity `Σ_c (e_c/m − (d_c/2m)²)` of a labelling; 0 on an
/// edgeless graph.
pub fn modularity(g: &WeightedGraph, labels: &[usize]) -> f64 {
    let m = g.total_weight();
    if m == 0.0 {
        return 0.0;
    }
    let mut internal: HashMap<usize, f64> = HashMap::new();
    let mut degree: HashMap<usize, f64> = HashMap::new();
    for i in 0..g.n {
        *degree.entry(labels[i]).or_default() += g.degree(i);
        for j in i + 1..g.n {
            if labels[i] == labels[j] {
                *internal.entry(labels[i]).or_default() += g.weight(i, j);
            }
        }
    }
    degree
        .iter()
        .map(|(c, &d)| internal.get(c).copied().unwrap_or(0.0) / m - (d / (2.0 * m)).powi(2))
        .sum()
}

#[derive(Debug, Clone, Copy)]
struct Key(f64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct Community {
    size: usize,
    /// Mean walk distribution of the members after `t` steps.
    prob: Vec<f64>,
    /// Neighbouring community → total edge weight between the two.
    neighbours: BTreeMap<usize, f64>,
    internal: f64,
    degree: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalktrapResult {
    /// Dense community label per vertex, numbered by first appearance.
    pub labels: Vec<usize>,
    pub modularity: f64,
    /// Merges in the order performed, as (community, community) with
    /// merged communities numbered from `n` upwards.
    pub merges: Vec<(usize, usize)>,
}

/// Walktrap agglomeration cut at maximum modularity.
///
/// Vertex distances use `t`-step random-walk distributions scaled by the
/// inverse degree; at each step the pair of adjacent communities with the
/// smallest increase in mean squared walk distance merges. Ties go to the
/// pair with the smallest community ids. Isolated vertices stay singletons.
///
/// The walk gives every vertex a self-loop weighted by the mean weight of
/// its edges, which keeps it aperiodic on bipartite pieces such as a lone
/// edge. Modularity is computed on the graph without loops.
pub fn walktrap(g: &WeightedGraph, t: usize) -> WalktrapResult {
    let n = g.n;
    let adjacency = g.adjacency();
    let degree: Vec<f64> = (0..n).map(|i| g.degree(i)).collect();
    let m = g.total_weight();
    let self_loop: Vec<f64> = (0..n)
        .map(|i| match adjacency[i].len() {
            0 => 0.0,
            k => degree[i] / k as f64,
        })
        .collect();
    let walk_degree: Vec<f64> = (0..n).map(|i| degree[i] + self_loop[i]).collect();

    let walk: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut v = vec![0.0; n];
            if degree[i] == 0.0 {
                return v;
            }
            v[i] = 1.0;
            for _ in 0..t {
                let mut next = vec![0.0; n];
                for (j, &mass) in v.iter().enumerate() {
                    if mass == 0.0 {
                        continue;
                    }
                    let scale = mass / walk_degree[j];
                    next[j] += scale * self_loop[j];
                    for &(k, w) in &adjacency[j] {
                        next[k] += scale * w;
                    }
                }
                v = next;
            }
            v
        })
        .collect();

    let inv_degree: Vec<f64> = walk_degree.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect();
    let delta_sigma = |a: &Community, b: &Community| -> f64 {
        let r2: f64 = a
            .prob
            .iter()
            .zip(&b.prob)
            .zip(&inv_degree)
            .map(|((x, y), w)| (x - y) * (x - y) * w)
            .sum();
        (a.size * b.size) as f64 / (a.size + b.size) as f64 * r2 / n as f64
    };

    let mut communities: Vec<Option<Community>> = walk
        .into_iter()
        .enumerate()
        .map(|(i, prob)| {
            Some(Community {
                size: 1,
                prob,
                neighbours: adjacency[i].iter().copied().collect(),
                internal: 0.0,
                degree: degree[i],
            })
        })
        .collect();

    let pair = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    let initial: Vec<(Key, usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let communities = &communities;
            adjacency[i].iter().filter(move |&&(j, _)| i < j).map(move |&(j, _)| {
                let (a, b) = (communities[i].as_ref().unwrap(), communities[j].as_ref().unwrap());
                (Key(delta_sigma(a, b)), i, j)
            })
        })
        .collect();
    let mut queue: BTreeSet<(Key, usize, usize)> = initial.iter().copied().collect();
    let mut current: HashMap<(usize, usize), Key> = initial.iter().map(|&(k, a, b)| ((a, b), k)).collect();

    let term = |c: &Community| if m > 0.0 { c.internal / m - (c.degree / (2.0 * m)).powi(2) } else { 0.0 };
    let mut q: f64 = communities.iter().flatten().map(term).sum();
    let mut best_q = q;
    let mut best_step = 0;
    let mut merges = Vec::new();

    while let Some((_, a, b)) = queue.pop_first() {
        current.remove(&(a, b));
        let ca = communities[a].take().expect("live community");
        let cb = communities[b].take().expect("live community");
        let id = communities.len();
        let size = ca.size + cb.size;
        let prob: Vec<f64> = ca
            .prob
            .iter()
            .zip(&cb.prob)
            .map(|(x, y)| (ca.size as f64 * x + cb.size as f64 * y) / size as f64)
            .collect();
        let between = ca.neighbours.get(&b).copied().unwrap_or(0.0);
        let mut neighbours = ca.neighbours.clone();
        for (&k, &w) in &cb.neighbours {
            *neighbours.entry(k).or_insert(0.0) += w;
        }
        neighbours.remove(&a);
        neighbours.remove(&b);
        let merged = Community {
            size,
            prob,
            neighbours,
            internal: ca.internal + cb.internal + between,
            degree: ca.degree + cb.degree,
        };
        q += term(&merged) - term(&ca) - term(&cb);

        for (&k, &w) in &merged.neighbours {
            for old in [a, b] {
                if let Some(key) = current.remove(&pair(old, k)) {
                    let (x, y) = pair(old, k);
                    queue.remove(&(key, x, y));
                }
            }
            let other = communities[k].as_mut().expect("neighbour is live");
            other.neighbours.remove(&a);
            other.neighbours.remove(&b);
            other.neighbours.insert(id, w);
        }
        let fresh: Vec<(Key, usize)> = merged
            .neighbours
            .keys()
            .map(|&k| (Key(delta_sigma(&merged, communities[k].as_ref().unwrap())), k))
            .collect();
        for (key, k) in fresh {
            queue.insert((key, k, id));
            current.insert((k, id), key);
        }
        communities.push(Some(merged));
        merges.push((a, b));
        if q > best_q {
            best_q = q;
            best_step = merges.len();
        }
    }

    // replay the merges up to the modularity peak
    let mut owner: Vec<usize> = (0..n).collect();
    let mut members: HashMap<usize, Vec<usize>> = (0..n).map(|i| (i, vec![i])).collect();
    for (step, &(a, b)) in merges[..best_step].iter().enumerate() {
        let mut joined = members.remove(&a).expect("merged community");
        joined.extend(members.remove(&b).expect("merged community"));
        for &v in &joined {
            owner[v] = n + step;
        }
        members.insert(n + step, joined);
    }
    let mut codes: HashMap<usize, usize> = HashMap::new();
    let labels = owner
        .iter()
        .map(|&o| {
            let next = codes.len();
            *codes.entry(o).or_insert(next)
        })
        .collect();
    WalktrapResult {
        labels,
        modularity: if m > 0.0 { best_q } else { 0.0 },
        merges,
    }
}

/// Walktrap communities as a partition of `ids` (vertex order).
pub fn walktrap_communities<S: AsRef<str>>(g: &WeightedGraph, ids: &[S], t: usize) -> Result<Partition, CommunityError> {
    if ids.len() != g.len() {
        return Err(CommunityError::SizeMismatch);
    }
    let result = walktrap(g, t);
    let labels: Vec<usize> = result.labels.iter().map(|l| l + 1).collect();
    Ok(Partition::from_labels(ids, &labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    fn bridged_cliques(sizes: &[usize], bridge: f64) -> WeightedGraph {
        let n: usize = sizes.iter().sum();
        let mut g = WeightedGraph::empty(n);
        let mut start = 0;
        let mut starts = Vec::new();
        for &s in sizes {
            for i in start..start + s {
                for j in i + 1..start + s {
                    g.set_weight(i, j, 1.0).unwrap();
                }
            }
            starts.push(start);
            start += s;
        }
        for w in starts.windows(2) {
            g.set_weight(w[0], w[1], bridge).unwrap();
        }
        g
    }

    /// Best modularity over every set partition (restricted growth strings).
    fn exhaustive_modularity(g: &WeightedGraph) -> f64 {
        let n = g.len();
        let mut labels = vec![0usize; n];
        let mut best = f64::NEG_INFINITY;
        fn rec(i: usize, max: usize, labels: &mut Vec<usize>, g: &WeightedGraph, best: &mut f64) {
            if i == labels.len() {
                *best = best.max(modularity(g, labels));
                return;
            }
            for l in 0..=max + 1 {
                labels[i] = l;
                rec(i + 1, max.max(l), labels, g, best);
            }
        }
        if n == 0 {
            return 0.0;
        }
        rec(1, 0, &mut labels, g, &mut best);
        best
    }

    #[test]
    fn six_vertex_example() {
        let p = Partition::from_labels(&ids(6), &[1, 1, 1, 2, 2, 2]).unwrap();
        let g = partition_adjacency(&p, &ids(6)).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i != j && (i < 3) == (j < 3) { 1.0 } else { 0.0 };
                assert_eq!(g.weight(i, j), expect);
            }
        }
    }

    #[test]
    fn singleton_partition_is_zero() {
        let p = Partition::from_labels(&ids(5), &[1, 2, 3, 4, 5]).unwrap();
        let g = partition_adjacency(&p, &ids(5)).unwrap();
        assert_eq!(g.total_weight(), 0.0);
        let missing = partition_adjacency(&p, &["v0", "zz"]).unwrap_err();
        assert_eq!(missing, CommunityError::Partition(PartitionError::UnassignedId("zz".into())));
    }

    #[test]
    fn adjacency_matches_label_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let n = rng.random_range(1..30);
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
            let p = Partition::from_labels(&ids(n), &labels).unwrap();
            let g = partition_adjacency(&p, &ids(n)).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(g.weight(i, j) == 1.0, i != j && labels[i] == labels[j]);
                }
            }
        }
    }

    #[test]
    fn averaging() {
        let ones = bridged_cliques(&[4], 0.0);
        let zeros = WeightedGraph::empty(4);
        assert_eq!(average_adjacency(std::slice::from_ref(&ones)).unwrap(), ones);
        let avg = average_adjacency(&[ones.clone(), zeros.clone()]).unwrap();
        assert_eq!(avg.weight(0, 1), 0.5);
        assert_eq!(avg, average_adjacency(&[zeros, ones]).unwrap());
        assert_eq!(average_adjacency(&[]).unwrap_err(), CommunityError::EmptyList);
        assert_eq!(
            average_adjacency(&[WeightedGraph::empty(2), WeightedGraph::empty(3)]).unwrap_err(),
            CommunityError::SizeMismatch
        );
    }

    #[test]
    fn two_cliques_with_weak_bridge() {
        let g = bridged_cliques(&[5, 5], 0.1);
        let r = walktrap(&g, 4);
        assert_eq!(r.labels, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert!((r.modularity - exhaustive_modularity(&g)).abs() < 1e-12);
        assert!((r.modularity - modularity(&g, &r.labels)).abs() < 1e-12);
    }

    #[test]
    fn lone_edge_beside_cliques() {
        let g = bridged_cliques(&[2, 3, 3], 0.3);
        let r = walktrap(&g, 4);
        assert_eq!(r.labels, vec![0, 0, 1, 1, 1, 2, 2, 2]);
        assert!((r.modularity - exhaustive_modularity(&g)).abs() < 1e-12);
    }

    #[test]
    fn edgeless_and_clique() {
        let r = walktrap(&WeightedGraph::empty(4), 4);
        assert_eq!(r.labels, vec![0, 1, 2, 3]);
        let r = walktrap(&bridged_cliques(&[6], 0.0), 4);
        assert_eq!(r.labels, vec![0; 6]);
    }

    #[test]
    fn isolated_vertex_stays_alone() {
        let mut g = WeightedGraph::empty(7);
        for (i, j) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
            g.set_weight(i, j, 1.0).unwrap();
        }
        g.set_weight(2, 3, 0.2).unwrap();
        let r = walktrap(&g, 4);
        assert_eq!(r.labels, vec![0, 0, 0, 1, 1, 1, 2]);
    }

    #[test]
    fn permutation_equivariant() {
        let g = bridged_cliques(&[4, 3, 5], 0.3);
        let n = g.len();
        let perm: Vec<usize> = vec![5, 11, 0, 7, 2, 9, 1, 3, 10, 4, 8, 6];
        let mut h = WeightedGraph::empty(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    h.set_weight(perm[i], perm[j], g.weight(i, j)).unwrap();
                }
            }
        }
        let a = walktrap(&g, 4).labels;
        let b = walktrap(&h, 4).labels;
        for i in 0..n {
            for j in 0..n {
                assert_eq!(a[i] == a[j], b[perm[i]] == b[perm[j]]);
            }
        }
    }

    #[test]
    fn beats_trivial_partitions() {
        let g = bridged_cliques(&[4, 4, 4], 0.2);
        let r = walktrap(&g, 4);
        assert!(r.modularity >= modularity(&g, &[0; 12]));
        assert!(r.modularity >= modularity(&g, &(0..12).collect::<Vec<_>>()));
        assert_eq!(walktrap_communities(&g, &ids(12), 4).unwrap().num_clusters(), 3);
    }

    #[test]
    fn edge_tsv() {
        let g = bridged_cliques(&[2, 1], 0.5);
        assert_eq!(g.to_edge_tsv(&["a", "b", "c"]), "i\tj\tweight\na\tb\t1\na\tc\t0.5\n");
    }
}
