//! Planted-cluster simulator: trees with short-branch clusters hung from a
//! long-branch backbone, K80 sequence evolution along them, and synthetic
//! case metadata.
//!
//! Every random draw comes from a ChaCha stream selected by purpose and
//! node, so results depend only on the seed.

use std::fmt;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use thiserror::Error;

use crate::alignment::{Alignment, SequenceRecord};
use crate::io::{CaseMetadata, Stage};
use crate::partition::Partition;
use crate::phylo::{Node, NodeId, PhyloTree};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("unknown preset {0}")]
    UnknownPreset(String),
}

/// How `within_mean` sets the scale of edges inside clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WithinScale {
    /// Each within-cluster edge is Exponential with mean `within_mean`.
    PerEdge,
    /// Edge lengths are Exponential with a mean chosen per cluster so that
    /// the expected average pairwise patristic distance among its members
    /// equals `within_mean`.
    PairwiseMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub cluster_sizes: Vec<usize>,
    pub within_mean: f64,
    pub within_scale: WithinScale,
    pub between_mean: f64,
    /// Minimum backbone edge length; every backbone edge is
    /// `stem_min + Exponential(between_mean)`.
    pub stem_min: f64,
    pub seq_length: usize,
    pub kappa: f64,
    pub date_range: (NaiveDate, NaiveDate),
    pub phi_fraction: f64,
    /// Fraction of tip residues replaced by `N`.
    pub mask_fraction: f64,
    pub rng_seed: u64,
}

impl SimConfig {
    pub fn new(cluster_sizes: Vec<usize>, within_mean: f64, between_mean: f64, rng_seed: u64) -> Self {
        Self {
            cluster_sizes,
            within_mean,
            within_scale: WithinScale::PairwiseMean,
            between_mean,
            stem_min: 3.0 * within_mean,
            seq_length: 918,
            kappa: 2.0,
            date_range: (
                NaiveDate::from_ymd_opt(2009, 1, 1).expect("valid date"),
                NaiveDate::from_ymd_opt(2016, 2, 1).expect("valid date"),
            ),
            phi_fraction: 0.2,
            mask_fraction: 0.0,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.cluster_sizes.iter().any(|&s| s == 0) {
            return bad("cluster sizes must be positive".into());
        }
        if self.num_sequences() < 2 {
            return bad("need at least two sequences".into());
        }
        if !(self.within_mean > 0.0 && self.within_mean < self.between_mean) {
            return bad(format!(
                "need 0 < within_mean ({}) < between_mean ({})",
                self.within_mean, self.between_mean
            ));
        }
        if !(self.stem_min > 0.0) {
            return bad("stem_min must be positive".into());
        }
        if self.seq_length == 0 {
            return bad("seq_length must be at least 1".into());
        }
        if !(self.kappa > 0.0) {
            return bad("kappa must be positive".into());
        }
        if self.date_range.0 > self.date_range.1 {
            return bad("date range start after end".into());
        }
        if !(0.0..=1.0).contains(&self.phi_fraction) || !(0.0..=1.0).contains(&self.mask_fraction) {
            return bad("fractions must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn num_sequences(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// A few dozen sequences; quick end-to-end runs.
    Small,
    /// 20 clusters with sizes spread evenly over 5..=50.
    Acceptance,
    /// 3,707 sequences with a cluster-size profile shaped like a large
    /// surveillance cohort, including many pairs and singletons.
    PaperScale,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Small, Preset::Acceptance, Preset::PaperScale];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Small => "small",
            Preset::Acceptance => "acceptance",
            Preset::PaperScale => "paper-scale",
        }
    }

    pub fn config(self, rng_seed: u64) -> SimConfig {
        let sizes = match self {
            Preset::Small => vec![8, 6, 5, 4, 3, 2, 2, 1, 1, 1],
            Preset::Acceptance => (0..20).map(|i| 5 + (45.0 * i as f64 / 19.0).round() as usize).collect(),
            Preset::PaperScale => {
                let mut s = vec![126, 87, 83, 45, 37, 36, 30];
                s.extend(std::iter::repeat_n(10, 100));
                s.extend(std::iter::repeat_n(4, 200));
                s.extend(std::iter::repeat_n(2, 300));
                s.extend(std::iter::repeat_n(1, 863));
                s
            }
        };
        SimConfig::new(sizes, 0.01, 0.15, rng_seed)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| SimError::UnknownPreset(s.to_string()))
    }
}

// stream namespaces
const TREE_STREAM: u64 = 0;
const SITE_STREAM: u64 = 1 << 40;
const MASK_STREAM: u64 = 2 << 40;
const META_STREAM: u64 = 3 << 40;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Rooted binary topology over `leaves` leaves (indices `0..leaves`);
/// internal nodes follow.
struct Shape {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    root: usize,
}

impl Shape {
    /// Uniform over labelled rooted binary topologies: each new leaf is
    /// attached to a uniformly chosen edge, the edge above the root included.
    fn random<R: Rng>(leaves: usize, rng: &mut R) -> Shape {
        let total = 2 * leaves - 1;
        let mut parent: Vec<Option<usize>> = vec![None; total];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); total];
        let mut root = 0;
        let mut present = vec![0usize];
        for k in 1..leaves {
            let x = present[rng.random_range(0..present.len())];
            let u = leaves + k - 1;
            match parent[x] {
                Some(p) => {
                    let slot = children[p].iter().position(|&c| c == x).expect("child of parent");
                    children[p][slot] = u;
                    parent[u] = Some(p);
                }
                None => root = u,
            }
            children[u] = vec![x, k];
            parent[x] = Some(u);
            parent[k] = Some(u);
            present.push(k);
            present.push(u);
        }
        Shape { parent, children, root }
    }

    fn leaf_counts(&self) -> Vec<usize> {
        let n = self.parent.len();
        let leaves = (n + 1) / 2;
        let mut count = vec![0usize; n];
        let mut order = vec![self.root];
        let mut i = 0;
        while i < order.len() {
            order.extend(&self.children[order[i]]);
            i += 1;
        }
        for &v in order.iter().rev() {
            count[v] = if v < leaves { 1 } else { self.children[v].iter().map(|&c| count[c]).sum() };
        }
        count
    }

    /// Mean number of edges on the path between two distinct leaves.
    fn mean_path_edges(&self) -> f64 {
        let leaves = (self.parent.len() + 1) / 2;
        if leaves < 2 {
            return 0.0;
        }
        let count = self.leaf_counts();
        let pairs = (leaves * (leaves - 1) / 2) as f64;
        let crossings: usize = (0..self.parent.len())
            .filter(|&v| v != self.root)
            .map(|v| count[v] * (leaves - count[v]))
            .sum();
        crossings as f64 / pairs
    }
}

fn exp_draw<R: Rng>(rng: &mut R, mean: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e * mean
}

/// Tree with the planted clusters as clades and the planted partition.
/// All internal supports are 1.0.
pub fn simulate_tree(cfg: &SimConfig) -> Result<(PhyloTree, Partition), SimError> {
    cfg.validate()?;
    let mut rng = stream(cfg.rng_seed, TREE_STREAM);
    let n = cfg.num_sequences();
    let width = n.to_string().len();
    let mut ids: Vec<String> = (1..=n).map(|i| format!("S{i:0width$}")).collect();
    ids.shuffle(&mut rng);
    let mut next_id = ids.into_iter();

    let mut nodes: Vec<Node> = Vec::with_capacity(2 * n);
    let mut cluster_roots: Vec<NodeId> = Vec::with_capacity(cfg.cluster_sizes.len());
    let mut planted = Partition::new();

    // places a shape into the arena; returns arena ids of shape nodes
    fn place(shape: &Shape, nodes: &mut Vec<Node>, leaf_ids: &[NodeId]) -> Vec<NodeId> {
        let leaves = leaf_ids.len();
        let map: Vec<NodeId> = (0..shape.parent.len())
            .map(|v| {
                if v < leaves {
                    leaf_ids[v]
                } else {
                    nodes.push(Node::new(None));
                    nodes.len() - 1
                }
            })
            .collect();
        for (v, &id) in map.iter().enumerate() {
            if let Some(p) = shape.parent[v] {
                nodes[id].parent = Some(map[p]);
            }
            if v >= leaves {
                nodes[id].children = shape.children[v].iter().map(|&c| map[c]).collect();
            }
        }
        map
    }

    for (c, &size) in cfg.cluster_sizes.iter().enumerate() {
        let tips: Vec<NodeId> = (0..size)
            .map(|_| {
                let id = next_id.next().expect("one id per sequence");
                planted.insert(&id, (c + 1).to_string()).expect("fresh id");
                let mut node = Node::new(None);
                node.label = Some(id);
                nodes.push(node);
                nodes.len() - 1
            })
            .collect();
        let shape = Shape::random(size, &mut rng);
        let edge_mean = match cfg.within_scale {
            WithinScale::PerEdge => cfg.within_mean,
            WithinScale::PairwiseMean if size > 1 => cfg.within_mean / shape.mean_path_edges(),
            WithinScale::PairwiseMean => 0.0,
        };
        let map = place(&shape, &mut nodes, &tips);
        for (v, &id) in map.iter().enumerate() {
            if v != shape.root {
                nodes[id].branch_length = exp_draw(&mut rng, edge_mean);
            }
        }
        cluster_roots.push(map[shape.root]);
    }

    let backbone = Shape::random(cluster_roots.len(), &mut rng);
    let map = place(&backbone, &mut nodes, &cluster_roots);
    for (v, &id) in map.iter().enumerate() {
        if v != backbone.root {
            nodes[id].branch_length = cfg.stem_min + exp_draw(&mut rng, cfg.between_mean);
        }
    }
    let root = map[backbone.root];
    for node in &mut nodes {
        if !node.children.is_empty() {
            node.support = Some(1.0);
        }
    }
    let tree = PhyloTree::from_nodes(nodes, root).expect("simulated tree is well formed");
    Ok((tree, planted))
}

/// Finite-time K80 probabilities `(same, transition, each transversion)`
/// for a branch of `t` expected substitutions per site.
pub fn k80_probabilities(t: f64, kappa: f64) -> (f64, f64, f64) {
    let beta = 1.0 / (kappa + 2.0);
    let e4 = (-4.0 * beta * t).exp();
    let e2 = (-2.0 * (kappa + 1.0) * beta * t).exp();
    let same = 0.25 + 0.25 * e4 + 0.5 * e2;
    let transition = 0.25 + 0.25 * e4 - 0.5 * e2;
    let transversion = 0.25 - 0.25 * e4;
    (same, transition, transversion)
}

const BASES: [u8; 4] = *b"ACGT";

/// Evolves sequences down `tree` under K80 with unit mean rate, returning
/// the tip sequences in tip order.
pub fn simulate_alignment(tree: &PhyloTree, cfg: &SimConfig) -> Result<Alignment, SimError> {
    if cfg.seq_length == 0 || !(cfg.kappa > 0.0) || !(0.0..=1.0).contains(&cfg.mask_fraction) {
        return Err(SimError::InvalidConfig("seq_length, kappa or mask_fraction out of range".into()));
    }
    let len = cfg.seq_length;
    let mut seqs: Vec<Vec<u8>> = vec![Vec::new(); tree.len()];
    // base codes: A=0 C=1 G=2 T=3, so the transition partner is code ^ 2
    let mut root_rng = stream(cfg.rng_seed, SITE_STREAM + tree.root() as u64);
    seqs[tree.root()] = (0..len).map(|_| root_rng.random_range(0..4u8)).collect();

    // generation by generation; each node owns its stream
    let mut frontier = vec![tree.root()];
    while !frontier.is_empty() {
        let children: Vec<NodeId> = frontier.iter().flat_map(|&v| tree.children(v).iter().copied()).collect();
        let evolved: Vec<(NodeId, Vec<u8>)> = children
            .par_iter()
            .map(|&c| {
                let parent = &seqs[tree.parent(c).expect("child has parent")];
                let (same, ts, tv) = k80_probabilities(tree.branch_length(c), cfg.kappa);
                let mut rng = stream(cfg.rng_seed, SITE_STREAM + c as u64);
                let seq = parent
                    .iter()
                    .map(|&b| {
                        let u: f64 = rng.random();
                        if u < same {
                            b
                        } else if u < same + ts {
                            b ^ 2
                        } else if u < same + ts + tv {
                            b ^ 1
                        } else {
                            b ^ 3
                        }
                    })
                    .collect();
                (c, seq)
            })
            .collect();
        for (c, s) in evolved {
            seqs[c] = s;
        }
        frontier = children;
    }

    let records = tree
        .tips()
        .iter()
        .map(|&t| {
            let mut residues: Vec<u8> = seqs[t].iter().map(|&b| BASES[b as usize]).collect();
            if cfg.mask_fraction > 0.0 {
                let mut rng = stream(cfg.rng_seed, MASK_STREAM + t as u64);
                for r in residues.iter_mut() {
                    if rng.random::<f64>() < cfg.mask_fraction {
                        *r = b'N';
                    }
                }
            }
            let text = String::from_utf8(residues).expect("ASCII residues");
            SequenceRecord::new(tree.tip_label(t), &text).expect("valid residues")
        })
        .collect();
    Ok(Alignment::new(records).expect("unique tip labels, equal lengths"))
}

/// One metadata row per id of `p`, in id order: uniform collection date,
/// PHI with probability `phi_fraction` (else chronic untreated), risk group
/// MSM.
pub fn simulate_metadata(p: &Partition, cfg: &SimConfig) -> Result<Vec<CaseMetadata>, SimError> {
    let (start, end) = cfg.date_range;
    if start > end || !(0.0..=1.0).contains(&cfg.phi_fraction) {
        return Err(SimError::InvalidConfig("date range or phi_fraction out of range".into()));
    }
    let span = (end - start).num_days();
    Ok(p.ids()
        .enumerate()
        .map(|(i, id)| {
            let mut rng = stream(cfg.rng_seed, META_STREAM + i as u64);
            let offset = rng.random_range(0..=span);
            let stage = if rng.random::<f64>() < cfg.phi_fraction {
                Stage::Phi
            } else {
                Stage::ChronicUntreated
            };
            CaseMetadata {
                id: id.to_string(),
                collection_date: start + Duration::days(offset),
                stage,
                risk_group: "MSM".to_string(),
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub tree: PhyloTree,
    pub planted: Partition,
    pub alignment: Alignment,
    pub metadata: Vec<CaseMetadata>,
}

pub fn simulate(cfg: &SimConfig) -> Result<Simulation, SimError> {
    let (tree, planted) = simulate_tree(cfg)?;
    let alignment = simulate_alignment(&tree, cfg)?;
    let metadata = simulate_metadata(&planted, cfg)?;
    Ok(Simulation {
        tree,
        planted,
        alignment,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{compare_pair, k80_distance};
    use crate::phylo::{patristic_matrix, TipIndex};
    use std::collections::HashSet;

    fn clade_sets(t: &PhyloTree) -> HashSet<Vec<String>> {
        t.tips_below()
            .into_iter()
            .map(|tips| {
                let mut l: Vec<String> = tips.iter().map(|&i| t.tip_label(t.tips()[i]).to_string()).collect();
                l.sort();
                l
            })
            .collect()
    }

    #[test]
    fn single_pair_is_cherry() {
        let cfg = SimConfig::new(vec![2], 0.01, 0.15, 1);
        let (t, p) = simulate_tree(&cfg).unwrap();
        assert_eq!(t.num_tips(), 2);
        assert_eq!(t.children(t.root()).len(), 2);
        assert_eq!(p.num_clusters(), 1);
    }

    #[test]
    fn planted_clusters_are_clades() {
        for preset in Preset::ALL {
            let cfg = preset.config(11);
            let (t, p) = simulate_tree(&cfg).unwrap();
            assert_eq!(t.num_tips(), cfg.num_sequences());
            let clades = clade_sets(&t);
            for cluster in p.clusters() {
                assert!(clades.contains(&cluster));
            }
            assert!(t.internal_nodes().all(|v| t.support(v) == Some(1.0)));
        }
    }

    #[test]
    fn preset_sizes() {
        let acc = Preset::Acceptance.config(0);
        assert_eq!(acc.cluster_sizes.len(), 20);
        assert_eq!(acc.cluster_sizes[0], 5);
        assert_eq!(acc.cluster_sizes[19], 50);
        assert_eq!(Preset::PaperScale.config(0).num_sequences(), 3707);
        assert_eq!("paper-scale".parse::<Preset>().unwrap(), Preset::PaperScale);
        assert!("huge".parse::<Preset>().is_err());
    }

    #[test]
    fn per_edge_mean() {
        let mut cfg = SimConfig::new(vec![40; 130], 0.01, 0.15, 5);
        cfg.within_scale = WithinScale::PerEdge;
        let (t, p) = simulate_tree(&cfg).unwrap();
        let sets = TipIndex::of(&t).node_sets(&t).unwrap();
        let labels = t.tip_labels();
        // edges strictly inside a planted cluster: both endpoints' tips share a label
        let mut lengths = Vec::new();
        for v in 0..t.len() {
            let Some(parent) = t.parent(v) else { continue };
            let cluster_of = |w: NodeId| -> HashSet<&str> { sets[w].ones().map(|b| p.label(&labels[b]).unwrap()).collect() };
            if cluster_of(parent).len() == 1 {
                lengths.push(t.branch_length(v));
            }
        }
        assert!(lengths.len() >= 10_000);
        let mean = lengths.iter().sum::<f64>() / lengths.len() as f64;
        assert!((mean - 0.01).abs() < 0.05 * 0.01, "mean {mean}");
    }

    #[test]
    fn pairwise_mean_calibration() {
        let cfg = SimConfig::new(vec![30; 200], 0.01, 0.15, 9);
        let (t, p) = simulate_tree(&cfg).unwrap();
        let m = patristic_matrix(&t).unwrap();
        let labels = m.ids();
        let (mut sum, mut count) = (0.0, 0usize);
        for i in 0..labels.len() {
            for j in i + 1..labels.len() {
                if p.label(&labels[i]) == p.label(&labels[j]) {
                    sum += m.value(i, j);
                    count += 1;
                }
            }
        }
        let mean = sum / count as f64;
        assert!((mean - 0.01).abs() < 0.05 * 0.01, "mean {mean}");
    }

    #[test]
    fn mean_path_edges_matches_pair_walk() {
        let mut rng = stream(3, 0);
        for leaves in 2..12 {
            let s = Shape::random(leaves, &mut rng);
            let depth_path = |mut v: usize| {
                let mut path = vec![v];
                while let Some(p) = s.parent[v] {
                    path.push(p);
                    v = p;
                }
                path
            };
            let mut total = 0usize;
            for a in 0..leaves {
                for b in a + 1..leaves {
                    let pa = depth_path(a);
                    let pb = depth_path(b);
                    let common = pa.iter().filter(|x| pb.contains(x)).count();
                    total += pa.len() + pb.len() - 2 * common;
                }
            }
            let expect = total as f64 / (leaves * (leaves - 1) / 2) as f64;
            assert!((s.mean_path_edges() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn topology_is_uniform_on_three_leaves() {
        // 3 labelled rooted topologies, each with probability 1/3
        let mut rng = stream(17, 0);
        let mut counts = [0usize; 3];
        let draws = 30_000;
        for _ in 0..draws {
            let s = Shape::random(3, &mut rng);
            let cherry_out = (0..3).find(|&l| s.parent[l] == Some(s.root)).unwrap();
            counts[cherry_out] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 1.0 / 3.0).abs() < 0.015);
        }
    }

    #[test]
    fn zero_lengths_copy_root() {
        let t = crate::io::parse_newick("((a:0,b:0):0,c:0);").unwrap();
        let cfg = SimConfig::new(vec![3], 0.01, 0.15, 2);
        let a = simulate_alignment(&t, &cfg).unwrap();
        let first = a.records()[0].residues();
        assert!(a.records().iter().all(|r| r.residues() == first));
        assert!(first.iter().all(|b| b"ACGT".contains(b)));
    }

    #[test]
    fn k80_probabilities_sum_to_one() {
        for t in [0.0, 0.01, 0.1, 1.0, 10.0] {
            let (s, ts, tv) = k80_probabilities(t, 2.0);
            assert!((s + ts + 2.0 * tv - 1.0).abs() < 1e-15);
        }
        // unit rate: derivative of (1 - same) at 0 is 1
        let h = 1e-7;
        let (s, _, _) = k80_probabilities(h, 3.0);
        assert!(((1.0 - s) / h - 1.0).abs() < 1e-5);
    }

    #[test]
    fn k80_recovers_distance_and_kappa() {
        let t = crate::io::parse_newick("(a:0.05,b:0.05);").unwrap();
        let mut cfg = SimConfig::new(vec![2], 0.01, 0.15, 0);
        cfg.seq_length = 100_000;
        let a = simulate_alignment(&t, &cfg).unwrap();
        let c = compare_pair(&a.records()[0], &a.records()[1]).unwrap();
        assert!((k80_distance(&c).unwrap() - 0.10).abs() < 0.005);

        let long = crate::io::parse_newick("(a:0.25,b:0.25);").unwrap();
        let a = simulate_alignment(&long, &cfg).unwrap();
        let c = compare_pair(&a.records()[0], &a.records()[1]).unwrap();
        let l = c.compared_sites as f64;
        let (p, q) = (c.transitions as f64 / l, c.transversions as f64 / l);
        let beta_t = -0.25 * (1.0 - 2.0 * q).ln();
        let sum_t = -0.5 * (1.0 - 2.0 * p - q).ln();
        let kappa_hat = (sum_t - beta_t) / beta_t;
        assert!((kappa_hat - 2.0).abs() < 0.2, "kappa {kappa_hat}");
    }

    #[test]
    fn masking_and_determinism() {
        let mut cfg = Preset::Small.config(4);
        cfg.mask_fraction = 0.1;
        let s1 = simulate(&cfg).unwrap();
        let s2 = simulate(&cfg).unwrap();
        assert_eq!(s1.alignment, s2.alignment);
        assert_eq!(s1.tree, s2.tree);
        assert_eq!(s1.metadata, s2.metadata);
        let n_count: usize = s1.alignment.records().iter().map(|r| r.residues().iter().filter(|&&b| b == b'N').count()).sum();
        let total = s1.alignment.len() * s1.alignment.sites();
        assert!((n_count as f64 / total as f64 - 0.1).abs() < 0.01);
        cfg.mask_fraction = 0.0;
        let clean = simulate(&cfg).unwrap();
        assert!(clean.alignment.records().iter().all(|r| r.residues().iter().all(|b| b"ACGT".contains(b))));
        cfg.rng_seed = 5;
        assert_ne!(simulate(&cfg).unwrap().alignment, clean.alignment);
    }

    #[test]
    fn metadata_fractions() {
        let ids: Vec<String> = (0..10_000).map(|i| format!("x{i}")).collect();
        let p = Partition::from_labels(&ids, &vec![1; ids.len()]).unwrap();
        let mut cfg = SimConfig::new(vec![2], 0.01, 0.15, 8);
        for (f, tol) in [(0.0, 0.0), (1.0, 0.0), (0.3, 0.02)] {
            cfg.phi_fraction = f;
            let rows = simulate_metadata(&p, &cfg).unwrap();
            let phi = rows.iter().filter(|r| r.stage == Stage::Phi).count() as f64 / rows.len() as f64;
            assert!((phi - f).abs() <= tol);
            assert!(rows.iter().all(|r| r.collection_date >= cfg.date_range.0 && r.collection_date <= cfg.date_range.1));
            assert!(rows.iter().all(|r| r.risk_group == "MSM"));
        }
    }

    #[test]
    fn invalid_config() {
        let cfg = SimConfig::new(vec![1], 0.01, 0.15, 0);
        assert!(simulate_tree(&cfg).is_err());
        let cfg = SimConfig::new(vec![5], 0.2, 0.15, 0);
        assert!(simulate_tree(&cfg).is_err());
    }
}
