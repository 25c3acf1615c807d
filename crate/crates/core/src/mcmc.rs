//! Markov chain Monte Carlo over clade partitions of a fixed tree.
//!
//! A cluster is a clade whose internal edges follow their own exponential
//! branch-length regime with a small mean. The target combines the two
//! regimes with a Chinese-restaurant prior on the partition, a Poisson
//! weight on the number of clusters, uniform windows on the regime means
//! and a gamma prior on the concentration.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::alignment::Alignment;
use crate::community::{walktrap_communities, WeightedGraph};
use crate::io::partition::write_partition;
use crate::partition::Partition;
use crate::phylo::{NodeId, PhyloTree};
use crate::threshold::{threshold_cluster, ClusterCriteria, DistanceStatistic, ThresholdError};

#[derive(Debug, Error)]
pub enum McmcError {
    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),
    #[error("tree has {0} tips; the chain needs at least two")]
    TooFewTips(usize),
    #[error("clusters do not form an antichain of clades covering every tip")]
    InvalidState,
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sequence-model constants carried with the configuration but not used by
/// the branch-length target.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservedConstants {
    /// Equilibrium frequencies in the order A, T, C, G.
    pub limiting_probabilities: [f64; 4],
    pub rate_matrix: [[f64; 4]; 4],
    pub discrete_states: usize,
    pub tpm_samples: usize,
    pub discrete_gamma: f64,
}

impl Default for ReservedConstants {
    fn default() -> Self {
        Self {
            limiting_probabilities: [0.38, 0.24, 0.16, 0.21],
            rate_matrix: [
                [-0.8891, 0.0659, 0.1324, 0.6908],
                [0.1047, -0.7205, 0.5477, 0.0681],
                [0.3096, 0.8069, -1.1801, 0.0636],
                [1.2540, 0.0779, 0.0494, -1.3812],
            ],
            discrete_states: 20,
            tpm_samples: 100_000,
            discrete_gamma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub init_support_min: f64,
    pub init_distance_max: f64,
    /// Half-width of the prior windows on the regime means, relative to
    /// their initial estimates.
    pub radius: f64,
    pub concentration_shape: f64,
    pub concentration_scale: f64,
    /// Poisson rate for the number of clusters.
    pub cluster_count_rate: f64,
    pub rng_seed: u64,
    /// Lengths below this are raised to it.
    pub edge_floor: f64,
    /// Mean walk step as a fraction of the window width.
    pub mean_step: f64,
    /// Concentration walk step on the log scale.
    pub concentration_step: f64,
    pub sample_means: bool,
    pub sample_concentration: bool,
    pub reserved: ReservedConstants,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 220_000,
            burn_in: 20_000,
            thin: 200,
            init_support_min: 0.90,
            init_distance_max: 0.045,
            radius: 0.25,
            concentration_shape: 500.0,
            concentration_scale: 0.2,
            cluster_count_rate: 2368.0,
            rng_seed: 1,
            edge_floor: 1e-9,
            mean_step: 0.1,
            concentration_step: 0.1,
            sample_means: true,
            sample_concentration: true,
            reserved: ReservedConstants::default(),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), McmcError> {
        let bad = |m: &str| Err(McmcError::InvalidConfig(m.to_string()));
        if self.iterations <= self.burn_in {
            return bad("iterations must exceed burn_in");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if !(self.radius > 0.0 && self.radius < 1.0) {
            return bad("radius must lie in (0, 1)");
        }
        for (name, v) in [
            ("concentration_shape", self.concentration_shape),
            ("concentration_scale", self.concentration_scale),
            ("cluster_count_rate", self.cluster_count_rate),
            ("edge_floor", self.edge_floor),
            ("mean_step", self.mean_step),
            ("concentration_step", self.concentration_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(McmcError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn retained_count(&self) -> usize {
        self.iterations.saturating_sub(self.burn_in) / self.thin
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn around(centre: f64, radius: f64) -> Self {
        Self {
            lo: centre * (1.0 - radius),
            hi: centre * (1.0 + radius),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    /// Cluster clade roots, ascending.
    pub clusters: Vec<NodeId>,
    pub mu_within: f64,
    pub mu_between: f64,
    pub alpha: f64,
    pub within_window: Window,
    pub between_window: Window,
    /// The initial partition had no within-cluster edge, so the within
    /// mean came from the shortest tenth of the edges.
    pub within_fallback: bool,
}

impl ChainState {
    /// Checks that the clusters are disjoint clades covering every tip.
    pub fn validate(&self, tree: &PhyloTree) -> Result<(), McmcError> {
        let below = tree.tips_below();
        let mut seen = vec![false; tree.num_tips()];
        for &v in &self.clusters {
            if v >= tree.len() {
                return Err(McmcError::InvalidState);
            }
            for &t in &below[v] {
                if std::mem::replace(&mut seen[t], true) {
                    return Err(McmcError::InvalidState);
                }
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(McmcError::InvalidState)
        }
    }

    pub fn partition(&self, tree: &PhyloTree) -> Partition {
        let labels = cluster_labels(tree, &tree.tips_below(), &self.clusters);
        Partition::from_labels(&tree.tip_labels(), &labels).expect("tip labels are unique")
    }
}

/// One-based labels over tips, numbered by first appearance in tip order.
fn cluster_labels(tree: &PhyloTree, below: &[Vec<usize>], clusters: &[NodeId]) -> Vec<u32> {
    let mut owner = vec![usize::MAX; tree.num_tips()];
    for &v in clusters {
        for &t in &below[v] {
            owner[t] = v;
        }
    }
    let mut code = std::collections::HashMap::new();
    owner
        .iter()
        .map(|&v| {
            let next = code.len() as u32 + 1;
            *code.entry(v).or_insert(next)
        })
        .collect()
}

/// Maximal clades whose tips all share a label.
pub fn coerce_to_clades(tree: &PhyloTree, p: &Partition) -> Result<Vec<NodeId>, McmcError> {
    let mut pure: Vec<Option<&str>> = vec![None; tree.len()];
    for v in tree.postorder() {
        pure[v] = if tree.is_tip(v) {
            Some(p.label(tree.tip_label(v)).ok_or(McmcError::InvalidState)?)
        } else {
            let first = pure[tree.children(v)[0]];
            first.filter(|l| tree.children(v).iter().all(|&c| pure[c] == Some(l)))
        };
    }
    let mut out: Vec<NodeId> = tree
        .preorder()
        .into_iter()
        .filter(|&v| pure[v].is_some() && tree.parent(v).is_none_or(|u| pure[u].is_none()))
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Every antichain of clades covering all tips.
pub fn clade_partitions(tree: &PhyloTree) -> Vec<Vec<NodeId>> {
    let mut options: Vec<Vec<Vec<NodeId>>> = vec![Vec::new(); tree.len()];
    for v in tree.postorder() {
        let mut here = vec![vec![v]];
        if !tree.is_tip(v) {
            let mut combos: Vec<Vec<NodeId>> = vec![Vec::new()];
            for &c in tree.children(v) {
                combos = combos
                    .iter()
                    .flat_map(|prefix| {
                        options[c].iter().map(move |o| {
                            let mut x = prefix.clone();
                            x.extend_from_slice(o);
                            x
                        })
                    })
                    .collect();
            }
            here.extend(combos);
        }
        options[v] = here;
    }
    let mut all = std::mem::take(&mut options[tree.root()]);
    for p in &mut all {
        p.sort_unstable();
    }
    all
}

/// Per-node sums over the edges strictly below each node.
struct NodeTables {
    inner_edges: Vec<f64>,
    inner_len: Vec<f64>,
    lgamma_size: Vec<f64>,
    total_edges: f64,
    total_len: f64,
    tips: usize,
}

impl NodeTables {
    fn new(tree: &PhyloTree, floor: f64) -> Self {
        let n = tree.len();
        let mut inner_edges = vec![0.0; n];
        let mut inner_len = vec![0.0; n];
        let mut size = vec![0usize; n];
        for v in tree.postorder() {
            if tree.is_tip(v) {
                size[v] = 1;
            }
            for &c in tree.children(v) {
                inner_edges[v] += 1.0 + inner_edges[c];
                inner_len[v] += tree.branch_length(c).max(floor) + inner_len[c];
                size[v] += size[c];
            }
        }
        let r = tree.root();
        Self {
            total_edges: inner_edges[r],
            total_len: inner_len[r],
            lgamma_size: size.iter().map(|&s| ln_gamma(s as f64)).collect(),
            inner_edges,
            inner_len,
            tips: tree.num_tips(),
        }
    }
}

/// Partition-dependent sufficient statistics of the target.
#[derive(Debug, Clone, Copy, Default)]
struct Components {
    clusters: f64,
    within_edges: f64,
    within_len: f64,
    sum_lgamma: f64,
}

impl Components {
    fn of(tab: &NodeTables, clusters: &[NodeId]) -> Self {
        let mut c = Components::default();
        for &v in clusters {
            c.add(tab, v, 1.0);
        }
        c
    }

    fn add(&mut self, tab: &NodeTables, v: NodeId, sign: f64) {
        self.clusters += sign;
        self.within_edges += sign * tab.inner_edges[v];
        self.within_len += sign * tab.inner_len[v];
        self.sum_lgamma += sign * tab.lgamma_size[v];
    }
}

fn log_target(
    tab: &NodeTables,
    c: &Components,
    mu_w: f64,
    mu_b: f64,
    alpha: f64,
    windows: (Window, Window),
    cfg: &ChainConfig,
) -> f64 {
    if !(windows.0.contains(mu_w) && windows.1.contains(mu_b)) || alpha <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let lik = -tab.total_edges * mu_b.ln() - tab.total_len / mu_b + c.within_edges * (mu_b.ln() - mu_w.ln())
        - c.within_len * (1.0 / mu_w - 1.0 / mu_b);
    let n = tab.tips as f64;
    let k = c.clusters;
    let crp = k * alpha.ln() + ln_gamma(alpha) - ln_gamma(alpha + n) + c.sum_lgamma;
    let lambda = cfg.cluster_count_rate;
    let poisson = k * lambda.ln() - lambda - ln_gamma(k + 1.0);
    let mean_prior = -windows.0.width().ln() - windows.1.width().ln();
    let (shape, scale) = (cfg.concentration_shape, cfg.concentration_scale);
    let alpha_prior = (shape - 1.0) * alpha.ln() - alpha / scale - ln_gamma(shape) - shape * scale.ln();
    lik + crp + poisson + mean_prior + alpha_prior
}

/// Unnormalised log posterior of a state.
pub fn log_posterior(state: &ChainState, tree: &PhyloTree, cfg: &ChainConfig) -> f64 {
    let tab = NodeTables::new(tree, cfg.edge_floor);
    log_target(
        &tab,
        &Components::of(&tab, &state.clusters),
        state.mu_within,
        state.mu_between,
        state.alpha,
        (state.within_window, state.between_window),
        cfg,
    )
}

fn mean_of_extreme_decile(tree: &PhyloTree, floor: f64, largest: bool) -> f64 {
    let mut lens: Vec<f64> = (0..tree.len())
        .filter(|&v| v != tree.root())
        .map(|v| tree.branch_length(v).max(floor))
        .collect();
    lens.sort_by(f64::total_cmp);
    if largest {
        lens.reverse();
    }
    let k = lens.len().div_ceil(10).max(1);
    lens[..k].iter().sum::<f64>() / k as f64
}

/// Builds a starting state from a set of cluster clades, with prior
/// windows centred on the observed within- and between-cluster mean edge
/// lengths.
pub fn state_from_clusters(tree: &PhyloTree, mut clusters: Vec<NodeId>, cfg: &ChainConfig) -> Result<ChainState, McmcError> {
    cfg.validate()?;
    if tree.num_tips() < 2 {
        return Err(McmcError::TooFewTips(tree.num_tips()));
    }
    clusters.sort_unstable();
    let tab = NodeTables::new(tree, cfg.edge_floor);
    let c = Components::of(&tab, &clusters);
    let mut within_fallback = false;
    let m_w = if c.within_edges > 0.0 {
        c.within_len / c.within_edges
    } else {
        log::warn!("initial partition has no within-cluster edges; using the shortest decile of edges");
        within_fallback = true;
        mean_of_extreme_decile(tree, cfg.edge_floor, false)
    };
    let between_edges = tab.total_edges - c.within_edges;
    let m_b = if between_edges > 0.0 {
        (tab.total_len - c.within_len) / between_edges
    } else {
        log::warn!("initial partition has no between-cluster edges; using the longest decile of edges");
        mean_of_extreme_decile(tree, cfg.edge_floor, true)
    };
    if m_w > m_b {
        log::warn!("initial within-cluster mean {m_w} exceeds the between-cluster mean {m_b}");
    }
    let state = ChainState {
        clusters,
        mu_within: m_w,
        mu_between: m_b,
        alpha: cfg.concentration_shape * cfg.concentration_scale,
        within_window: Window::around(m_w, cfg.radius),
        between_window: Window::around(m_b, cfg.radius),
        within_fallback,
    };
    state.validate(tree)?;
    Ok(state)
}

/// Starting state from threshold clustering at the configured support and
/// maximum pairwise distance.
pub fn initialize_chain(tree: &PhyloTree, alignment: &Alignment, cfg: &ChainConfig) -> Result<ChainState, McmcError> {
    cfg.validate()?;
    let criteria = ClusterCriteria::new(cfg.init_support_min, cfg.init_distance_max, DistanceStatistic::MaxPairwiseP)?;
    let p = threshold_cluster(tree, Some(alignment), &criteria)?;
    let clusters = coerce_to_clades(tree, &p)?;
    state_from_clusters(tree, clusters, cfg)
}

/// Vector-backed set with O(1) insert, remove and uniform draw.
struct IndexSet {
    items: Vec<usize>,
    pos: Vec<usize>,
}

impl IndexSet {
    fn new(cap: usize) -> Self {
        Self {
            items: Vec::new(),
            pos: vec![usize::MAX; cap],
        }
    }

    fn contains(&self, v: usize) -> bool {
        self.pos[v] != usize::MAX
    }

    fn insert(&mut self, v: usize) {
        if !self.contains(v) {
            self.pos[v] = self.items.len();
            self.items.push(v);
        }
    }

    fn remove(&mut self, v: usize) {
        let i = self.pos[v];
        if i == usize::MAX {
            return;
        }
        let last = self.items.pop().expect("non-empty");
        if last != v {
            self.items[i] = last;
            self.pos[last] = i;
        }
        self.pos[v] = usize::MAX;
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        self.items[rng.random_range(0..self.items.len())]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    Split,
    Merge,
    WalkMean,
    WalkConcentration,
}

/// Proposal and acceptance counts per move type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MoveStats {
    pub proposed: [u64; 4],
    pub accepted: [u64; 4],
}

struct Sampler<'a> {
    tree: &'a PhyloTree,
    cfg: &'a ChainConfig,
    tab: NodeTables,
    is_cluster: Vec<bool>,
    clusters: IndexSet,
    multi: IndexSet,
    mergeable: IndexSet,
    comp: Components,
    mu_w: f64,
    mu_b: f64,
    alpha: f64,
    windows: (Window, Window),
    log_post: f64,
}

impl<'a> Sampler<'a> {
    fn new(tree: &'a PhyloTree, state: &ChainState, cfg: &'a ChainConfig) -> Self {
        let n = tree.len();
        let tab = NodeTables::new(tree, cfg.edge_floor);
        let mut s = Self {
            tree,
            cfg,
            comp: Components::of(&tab, &state.clusters),
            tab,
            is_cluster: vec![false; n],
            clusters: IndexSet::new(n),
            multi: IndexSet::new(n),
            mergeable: IndexSet::new(n),
            mu_w: state.mu_within,
            mu_b: state.mu_between,
            alpha: state.alpha,
            windows: (state.within_window, state.between_window),
            log_post: 0.0,
        };
        for &v in &state.clusters {
            s.is_cluster[v] = true;
            s.clusters.insert(v);
            if !tree.is_tip(v) {
                s.multi.insert(v);
            }
        }
        for v in tree.internal_nodes() {
            if s.is_mergeable(v) {
                s.mergeable.insert(v);
            }
        }
        s.log_post = s.target(&s.comp, s.mu_w, s.mu_b, s.alpha);
        s
    }

    fn target(&self, c: &Components, mu_w: f64, mu_b: f64, alpha: f64) -> f64 {
        log_target(&self.tab, c, mu_w, mu_b, alpha, self.windows, self.cfg)
    }

    fn is_mergeable(&self, v: NodeId) -> bool {
        !self.tree.is_tip(v) && !self.is_cluster[v] && self.tree.children(v).iter().all(|&c| self.is_cluster[c])
    }

    fn split(&mut self, v: NodeId) {
        self.is_cluster[v] = false;
        self.clusters.remove(v);
        self.multi.remove(v);
        self.comp.add(&self.tab, v, -1.0);
        for &c in self.tree.children(v) {
            self.is_cluster[c] = true;
            self.clusters.insert(c);
            if !self.tree.is_tip(c) {
                self.multi.insert(c);
            }
            self.comp.add(&self.tab, c, 1.0);
        }
        self.mergeable.insert(v);
        if let Some(p) = self.tree.parent(v) {
            self.mergeable.remove(p);
        }
    }

    fn merge(&mut self, v: NodeId) {
        for &c in self.tree.children(v) {
            self.is_cluster[c] = false;
            self.clusters.remove(c);
            self.multi.remove(c);
            self.comp.add(&self.tab, c, -1.0);
        }
        self.is_cluster[v] = true;
        self.clusters.insert(v);
        self.multi.insert(v);
        self.comp.add(&self.tab, v, 1.0);
        self.mergeable.remove(v);
        if let Some(p) = self.tree.parent(v) {
            if self.is_mergeable(p) {
                self.mergeable.insert(p);
            }
        }
    }

    fn accept(&self, rng: &mut ChaCha8Rng, log_ratio: f64) -> bool {
        log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
    }

    /// Runs one proposal; returns whether it was accepted.
    fn step(&mut self, mv: Move, rng: &mut ChaCha8Rng) -> bool {
        match mv {
            Move::Split | Move::Merge => {
                let (forward, undo_split) = match mv {
                    Move::Split => (&self.multi, true),
                    _ => (&self.mergeable, false),
                };
                if forward.len() == 0 {
                    return false;
                }
                let forward_count = forward.len() as f64;
                let v = forward.draw(rng);
                if undo_split {
                    self.split(v);
                } else {
                    self.merge(v);
                }
                let reverse_count = if undo_split { self.mergeable.len() } else { self.multi.len() } as f64;
                let proposed = self.target(&self.comp, self.mu_w, self.mu_b, self.alpha);
                let log_ratio = proposed - self.log_post + forward_count.ln() - reverse_count.ln();
                if self.accept(rng, log_ratio) {
                    self.log_post = proposed;
                    true
                } else {
                    if undo_split {
                        self.merge(v);
                    } else {
                        self.split(v);
                    }
                    false
                }
            }
            Move::WalkMean => {
                let within = rng.random::<bool>();
                let window = if within { self.windows.0 } else { self.windows.1 };
                let h = self.cfg.mean_step * window.width();
                let delta = rng.random_range(-1.0..1.0) * h;
                let (mut mu_w, mut mu_b) = (self.mu_w, self.mu_b);
                if within {
                    mu_w += delta;
                } else {
                    mu_b += delta;
                }
                if !window.contains(if within { mu_w } else { mu_b }) || mu_w > mu_b {
                    return false;
                }
                let proposed = self.target(&self.comp, mu_w, mu_b, self.alpha);
                if self.accept(rng, proposed - self.log_post) {
                    (self.mu_w, self.mu_b, self.log_post) = (mu_w, mu_b, proposed);
                    true
                } else {
                    false
                }
            }
            Move::WalkConcentration => {
                let step = rng.random_range(-1.0..1.0) * self.cfg.concentration_step;
                let alpha = self.alpha * step.exp();
                let proposed = self.target(&self.comp, self.mu_w, self.mu_b, alpha);
                if self.accept(rng, proposed - self.log_post + step) {
                    (self.alpha, self.log_post) = (alpha, proposed);
                    true
                } else {
                    false
                }
            }
        }
    }

    fn state(&self, within_fallback: bool) -> ChainState {
        let mut clusters = self.clusters.items.clone();
        clusters.sort_unstable();
        ChainState {
            clusters,
            mu_within: self.mu_w,
            mu_between: self.mu_b,
            alpha: self.alpha,
            within_window: self.windows.0,
            between_window: self.windows.1,
            within_fallback,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    /// Tip labels in tree order; rows of `cocluster` and `retained`.
    pub ids: Vec<String>,
    pub map_partition: Partition,
    pub map_state: ChainState,
    pub map_log_posterior: f64,
    /// Co-clustering frequencies; the stored diagonal is zero.
    pub cocluster: WeightedGraph,
    /// (iteration, log posterior) at each retained sample.
    pub trace: Vec<(usize, f64)>,
    /// One-based label vectors over `ids`, one per retained sample.
    pub retained: Vec<Vec<u32>>,
    pub moves: MoveStats,
}

impl ChainSummary {
    pub fn retained_count(&self) -> usize {
        self.retained.len()
    }

    /// Co-clustering frequency with the unit diagonal.
    pub fn cocluster_frequency(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else {
            self.cocluster.weight(i, j)
        }
    }

    pub fn retained_partition(&self, k: usize) -> Partition {
        Partition::from_labels(&self.ids, &self.retained[k]).expect("tip labels are unique")
    }

    pub fn retained_samples(&self) -> Vec<Partition> {
        (0..self.retained.len()).map(|k| self.retained_partition(k)).collect()
    }

    /// Writes `map_partition.csv`, `cocluster.pcdm` with its `cocluster.ids`
    /// sidecar, `trace.tsv` and `samples.txt` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), McmcError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("map_partition.csv"), write_partition(&self.map_partition))?;
        let matrix = self.cocluster.to_matrix(self.ids.clone());
        fs::write(dir.join("cocluster.pcdm"), matrix.to_binary())?;
        fs::write(dir.join("cocluster.ids"), self.ids.join("\n") + "\n")?;
        let mut trace = String::from("iteration\tlog_posterior\n");
        for (i, lp) in &self.trace {
            trace.push_str(&format!("{i}\t{lp}\n"));
        }
        fs::write(dir.join("trace.tsv"), trace)?;
        let mut samples = String::new();
        for s in &self.retained {
            let line: Vec<String> = s.iter().map(u32::to_string).collect();
            samples.push_str(&line.join(" "));
            samples.push('\n');
        }
        fs::write(dir.join("samples.txt"), samples)?;
        Ok(())
    }
}

/// Runs the chain from a given state.
pub fn run_chain_from(tree: &PhyloTree, start: &ChainState, cfg: &ChainConfig) -> Result<ChainSummary, McmcError> {
    cfg.validate()?;
    start.validate(tree)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut sampler = Sampler::new(tree, start, cfg);
    let mut moves = vec![Move::Split, Move::Merge];
    if cfg.sample_means {
        moves.push(Move::WalkMean);
    }
    if cfg.sample_concentration {
        moves.push(Move::WalkConcentration);
    }
    let below = tree.tips_below();
    let n = tree.num_tips();
    let mut pair_counts = vec![0u32; n * (n - 1) / 2];
    let tri = |i: usize, j: usize| i * (2 * n - i - 1) / 2 + (j - i - 1);
    let mut stats = MoveStats::default();
    let mut trace = Vec::with_capacity(cfg.retained_count());
    let mut retained = Vec::with_capacity(cfg.retained_count());
    let mut best: Option<(f64, ChainState)> = None;

    for it in 1..=cfg.iterations {
        let mv = moves[rng.random_range(0..moves.len())];
        stats.proposed[mv as usize] += 1;
        if sampler.step(mv, &mut rng) {
            stats.accepted[mv as usize] += 1;
        }
        if it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0 {
            for &v in &sampler.clusters.items {
                let mut tips = below[v].clone();
                tips.sort_unstable();
                for a in 0..tips.len() {
                    for b in a + 1..tips.len() {
                        pair_counts[tri(tips[a], tips[b])] += 1;
                    }
                }
            }
            retained.push(cluster_labels(tree, &below, &sampler.clusters.items));
            trace.push((it, sampler.log_post));
            if best.as_ref().is_none_or(|(lp, _)| sampler.log_post > *lp) {
                best = Some((sampler.log_post, sampler.state(start.within_fallback)));
            }
        }
    }

    let (map_log_posterior, map_state) = best.expect("at least one retained sample");
    let m = retained.len() as f64;
    let mut cocluster = WeightedGraph::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            let c = pair_counts[tri(i, j)];
            if c > 0 {
                cocluster.set_weight(i, j, c as f64 / m).expect("frequency in [0, 1]");
            }
        }
    }
    Ok(ChainSummary {
        ids: tree.tip_labels(),
        map_partition: map_state.partition(tree),
        map_state,
        map_log_posterior,
        cocluster,
        trace,
        retained,
        moves: stats,
    })
}

/// Initialises from threshold clustering and runs the chain.
pub fn run_chain(tree: &PhyloTree, alignment: &Alignment, cfg: &ChainConfig) -> Result<ChainSummary, McmcError> {
    let start = initialize_chain(tree, alignment, cfg)?;
    run_chain_from(tree, &start, cfg)
}

/// Walktrap communities on the co-clustering graph.
pub fn linkage_estimate(summary: &ChainSummary, walk_length: usize) -> Partition {
    walktrap_communities(&summary.cocluster, &summary.ids, walk_length).expect("ids match the graph")
}
