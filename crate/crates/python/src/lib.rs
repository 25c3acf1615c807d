//! Python bindings: sequence and tree I/O, distance matrices, the clustering
//! methods, partition comparison, the partition sampler and the simulator.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use phyloclust_core::community::{walktrap_communities, WeightedGraph};
use phyloclust_core::distance::{build_distance_matrix, SaturationPolicy, SequenceDistance};
use phyloclust_core::evaluation::{self, ReferenceSet};
use phyloclust_core::gap::{self, GapConfig};
use phyloclust_core::growth::{self, GrowthWindow};
use phyloclust_core::io::{parse_fasta, parse_metadata, parse_newick, write_fasta, write_metadata, write_newick};
use phyloclust_core::mcmc::{self, ChainConfig};
use phyloclust_core::simulate::Preset;
use phyloclust_core::threshold::{self, ClusterCriteria, DistanceStatistic};
use phyloclust_core::{phylo, DistanceKind};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Alignment", module = "phyloclust", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyAlignment(phyloclust_core::Alignment);

#[pymethods]
impl PyAlignment {
    #[staticmethod]
    fn from_fasta(text: &str) -> PyResult<Self> {
        parse_fasta(text).map(Self).map_err(value_err)
    }

    fn to_fasta(&self) -> String {
        write_fasta(&self.0)
    }

    fn ids(&self) -> Vec<String> {
        self.0.ids()
    }

    #[getter]
    fn sites(&self) -> usize {
        self.0.sites()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Alignment({} sequences, {} sites)", self.0.len(), self.0.sites())
    }
}

#[pyclass(name = "Tree", module = "phyloclust", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTree(phyloclust_core::PhyloTree);

#[pymethods]
impl PyTree {
    #[staticmethod]
    fn from_newick(text: &str) -> PyResult<Self> {
        parse_newick(text).map(Self).map_err(value_err)
    }

    fn to_newick(&self) -> String {
        write_newick(&self.0)
    }

    fn tip_labels(&self) -> Vec<String> {
        self.0.tip_labels()
    }

    #[getter]
    fn num_tips(&self) -> usize {
        self.0.num_tips()
    }

    /// Reroots on the outgroup and removes it.
    fn root_at_outgroup(&self, outgroup: Vec<String>) -> PyResult<Self> {
        phylo::root_at_outgroup(&self.0, &outgroup).map(Self).map_err(value_err)
    }

    /// Copy whose internal supports are clade frequencies in `sample`.
    fn annotate_support(&self, sample: Vec<PyRef<'_, PyTree>>) -> PyResult<Self> {
        let trees: Vec<phyloclust_core::PhyloTree> = sample.iter().map(|t| t.0.clone()).collect();
        phylo::annotate_support(&self.0, &trees).map(Self).map_err(value_err)
    }

    fn patristic_matrix(&self) -> PyResult<PyDistanceMatrix> {
        phylo::patristic_matrix(&self.0).map(PyDistanceMatrix).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Tree({} tips)", self.0.num_tips())
    }
}

#[pyclass(name = "DistanceMatrix", module = "phyloclust", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDistanceMatrix(phyloclust_core::DistanceMatrix);

#[pymethods]
impl PyDistanceMatrix {
    /// Pairwise distances of an alignment. `kind` is "p" or "k80"; with
    /// `cap`, undefined distances are replaced by it.
    #[staticmethod]
    #[pyo3(signature = (alignment, kind = "p", cap = None))]
    fn from_alignment(py: Python<'_>, alignment: &PyAlignment, kind: &str, cap: Option<f64>) -> PyResult<Self> {
        let distance = match kind.to_ascii_lowercase().as_str() {
            "p" | "p-distance" => SequenceDistance::PDistance,
            "k80" => SequenceDistance::K80,
            other => return Err(value_err(format!("unknown distance kind {other}"))),
        };
        let policy = cap.map_or(SaturationPolicy::Undefined, SaturationPolicy::Cap);
        let aln = &alignment.0;
        py.detach(|| build_distance_matrix(aln, distance, policy))
            .map(Self)
            .map_err(value_err)
    }

    #[staticmethod]
    fn from_phylip(text: &str) -> PyResult<Self> {
        phyloclust_core::DistanceMatrix::from_phylip(text, DistanceKind::Other)
            .map(Self)
            .map_err(value_err)
    }

    #[staticmethod]
    #[pyo3(signature = (data, ids = None))]
    fn from_binary(data: &[u8], ids: Option<Vec<String>>) -> PyResult<Self> {
        phyloclust_core::DistanceMatrix::from_binary(data, ids, DistanceKind::Other)
            .map(Self)
            .map_err(value_err)
    }

    fn to_phylip(&self) -> String {
        self.0.to_phylip()
    }

    fn to_binary<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.to_binary())
    }

    fn ids(&self) -> Vec<String> {
        self.0.ids().to_vec()
    }

    #[getter]
    fn kind(&self) -> String {
        self.0.kind().to_string()
    }

    /// Distance between rows `i` and `j`, or None when undefined.
    fn get(&self, i: usize, j: usize) -> PyResult<Option<f64>> {
        if i >= self.0.len() || j >= self.0.len() {
            return Err(pyo3::exceptions::PyIndexError::new_err("row out of range"));
        }
        Ok(self.0.get(i, j))
    }

    /// Dense rows with None for undefined pairs.
    fn to_list(&self) -> Vec<Vec<Option<f64>>> {
        let n = self.0.len();
        (0..n).map(|i| (0..n).map(|j| self.0.get(i, j)).collect()).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("DistanceMatrix({} x {}, {})", self.0.len(), self.0.len(), self.0.kind())
    }
}

#[pyclass(name = "Partition", module = "phyloclust", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPartition(phyloclust_core::Partition);

#[pymethods]
impl PyPartition {
    #[new]
    fn new(labels: BTreeMap<String, String>) -> PyResult<Self> {
        let mut p = phyloclust_core::Partition::new();
        for (id, label) in labels {
            p.insert(&id, label).map_err(value_err)?;
        }
        Ok(Self(p))
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        phyloclust_core::io::parse_partition(text).map(Self).map_err(value_err)
    }

    fn to_csv(&self) -> String {
        phyloclust_core::io::write_partition(&self.0)
    }

    fn labels(&self) -> BTreeMap<String, String> {
        self.0.iter().map(|(i, l)| (i.to_string(), l.to_string())).collect()
    }

    fn label(&self, id: &str) -> Option<String> {
        self.0.label(id).map(str::to_string)
    }

    fn clusters(&self) -> Vec<Vec<String>> {
        self.0.clusters()
    }

    #[getter]
    fn num_clusters(&self) -> usize {
        self.0.num_clusters()
    }

    /// Relabelled 1, 2, ... by first appearance in id order.
    fn canonical(&self) -> Self {
        Self(self.0.canonical())
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0.canonical() == other.0.canonical()
    }

    fn __repr__(&self) -> String {
        format!("Partition({} ids, {} clusters)", self.0.len(), self.0.num_clusters())
    }
}

fn parse_statistic(s: &str) -> PyResult<DistanceStatistic> {
    match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
        "maxp" | "maxpairwisep" => Ok(DistanceStatistic::MaxPairwiseP),
        "medianpatristic" => Ok(DistanceStatistic::MedianPatristic),
        "maxpatristic" => Ok(DistanceStatistic::MaxPatristic),
        _ => Err(value_err(format!("unknown statistic {s}"))),
    }
}

/// Top-down clade acceptance by support and a within-clade distance
/// statistic ("maxp", "medianpatristic" or "maxpatristic"). "maxp" needs
/// the alignment.
#[pyfunction]
#[pyo3(signature = (tree, support_min, distance_max, statistic = "maxpatristic", alignment = None))]
fn threshold_cluster(
    py: Python<'_>,
    tree: &PyTree,
    support_min: f64,
    distance_max: f64,
    statistic: &str,
    alignment: Option<&PyAlignment>,
) -> PyResult<PyPartition> {
    let criteria = ClusterCriteria::new(support_min, distance_max, parse_statistic(statistic)?).map_err(value_err)?;
    let (t, a) = (&tree.0, alignment.map(|a| &a.0));
    py.detach(|| threshold::threshold_cluster(t, a, &criteria))
        .map(PyPartition)
        .map_err(value_err)
}

#[pyfunction]
fn percentile_cutoff(tree: &PyTree, percentile: f64) -> PyResult<f64> {
    threshold::percentile_cutoff(&tree.0, percentile).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (matrix, quantile = 0.90))]
fn gap_cluster(py: Python<'_>, matrix: &PyDistanceMatrix, quantile: f64) -> PyResult<PyPartition> {
    let cfg = GapConfig::new(quantile).map_err(value_err)?;
    let m = &matrix.0;
    py.detach(|| gap::gap_cluster(m, &cfg)).map(PyPartition).map_err(value_err)
}

#[pyfunction]
fn majority_consensus(sample: Vec<PyRef<'_, PyTree>>) -> PyResult<PyTree> {
    let trees: Vec<phyloclust_core::PhyloTree> = sample.iter().map(|t| t.0.clone()).collect();
    phylo::majority_consensus(&trees).map(PyTree).map_err(value_err)
}

#[pyfunction]
fn adjusted_rand_index(a: &PyPartition, b: &PyPartition) -> PyResult<f64> {
    evaluation::adjusted_rand_index(&a.0, &b.0).map_err(value_err)
}

/// ARI against a reference that covers only part of `universe`.
#[pyfunction]
fn partial_gold_ari(candidate: &PyPartition, reference: &PyPartition, universe: Vec<String>) -> PyResult<f64> {
    let rs = ReferenceSet::new(reference.0.clone(), universe).map_err(value_err)?;
    evaluation::partial_gold_ari(&candidate.0, &rs).map_err(value_err)
}

/// Walktrap communities of a symmetric weight matrix with entries in [0, 1].
#[pyfunction]
#[pyo3(signature = (weights, ids, walk_length = 4))]
fn walktrap(weights: Vec<Vec<f64>>, ids: Vec<String>, walk_length: usize) -> PyResult<PyPartition> {
    let n = weights.len();
    if weights.iter().any(|r| r.len() != n) {
        return Err(value_err("weights must be square"));
    }
    let g = WeightedGraph::from_dense(n, weights.concat()).map_err(value_err)?;
    walktrap_communities(&g, &ids, walk_length).map(PyPartition).map_err(value_err)
}

#[pyclass(name = "ChainSummary", module = "phyloclust", frozen)]
struct PyChainSummary(mcmc::ChainSummary);

#[pymethods]
impl PyChainSummary {
    #[getter]
    fn map_partition(&self) -> PyPartition {
        PyPartition(self.0.map_partition.clone())
    }

    #[getter]
    fn map_log_posterior(&self) -> f64 {
        self.0.map_log_posterior
    }

    #[getter]
    fn retained_count(&self) -> usize {
        self.0.retained_count()
    }

    /// (iteration, log posterior) per retained sample.
    #[getter]
    fn trace(&self) -> Vec<(usize, f64)> {
        self.0.trace.clone()
    }

    fn ids(&self) -> Vec<String> {
        self.0.ids.clone()
    }

    fn cocluster_frequency(&self, i: usize, j: usize) -> PyResult<f64> {
        let n = self.0.ids.len();
        if i >= n || j >= n {
            return Err(pyo3::exceptions::PyIndexError::new_err("row out of range"));
        }
        Ok(self.0.cocluster_frequency(i, j))
    }

    fn retained_partition(&self, k: usize) -> PyResult<PyPartition> {
        if k >= self.0.retained_count() {
            return Err(pyo3::exceptions::PyIndexError::new_err("sample out of range"));
        }
        Ok(PyPartition(self.0.retained_partition(k)))
    }

    #[pyo3(signature = (walk_length = 4))]
    fn linkage_estimate(&self, walk_length: usize) -> PyPartition {
        PyPartition(mcmc::linkage_estimate(&self.0, walk_length))
    }

    /// Accepted over proposed for split, merge, mean walk and concentration walk.
    fn acceptance_rates(&self) -> Vec<Option<f64>> {
        let m = &self.0.moves;
        (0..4)
            .map(|k| (m.proposed[k] > 0).then(|| m.accepted[k] as f64 / m.proposed[k] as f64))
            .collect()
    }
}

/// Runs the partition sampler from its threshold-clustering start. Unset
/// arguments keep the library defaults.
#[pyfunction]
#[pyo3(signature = (tree, alignment, seed = 1, iterations = None, burn_in = None, thin = None, cluster_count_rate = None))]
fn run_chain(
    py: Python<'_>,
    tree: &PyTree,
    alignment: &PyAlignment,
    seed: u64,
    iterations: Option<usize>,
    burn_in: Option<usize>,
    thin: Option<usize>,
    cluster_count_rate: Option<f64>,
) -> PyResult<PyChainSummary> {
    let d = ChainConfig::default();
    let cfg = ChainConfig {
        rng_seed: seed,
        iterations: iterations.unwrap_or(d.iterations),
        burn_in: burn_in.unwrap_or(d.burn_in),
        thin: thin.unwrap_or(d.thin),
        cluster_count_rate: cluster_count_rate.unwrap_or(d.cluster_count_rate),
        ..d
    };
    let (t, a) = (&tree.0, &alignment.0);
    py.detach(|| mcmc::run_chain(t, a, &cfg))
        .map(PyChainSummary)
        .map_err(value_err)
}

#[pyclass(name = "Simulation", module = "phyloclust", frozen)]
struct PySimulation(phyloclust_core::simulate::Simulation);

#[pymethods]
impl PySimulation {
    #[getter]
    fn tree(&self) -> PyTree {
        PyTree(self.0.tree.clone())
    }

    #[getter]
    fn alignment(&self) -> PyAlignment {
        PyAlignment(self.0.alignment.clone())
    }

    #[getter]
    fn planted(&self) -> PyPartition {
        PyPartition(self.0.planted.clone())
    }

    /// Case metadata as CSV text.
    fn metadata_csv(&self) -> String {
        write_metadata(&self.0.metadata)
    }
}

/// Simulates a preset ("small", "acceptance" or "paper-scale").
#[pyfunction]
#[pyo3(signature = (preset = "small", seed = 0))]
fn simulate(py: Python<'_>, preset: &str, seed: u64) -> PyResult<PySimulation> {
    let p = Preset::ALL
        .into_iter()
        .find(|p| p.name() == preset)
        .ok_or_else(|| value_err(format!("unknown preset {preset}")))?;
    let cfg = p.config(seed);
    py.detach(|| phyloclust_core::simulate::simulate(&cfg))
        .map(PySimulation)
        .map_err(value_err)
}

/// Growth rows for the largest clusters as dicts. Dates are ISO strings.
#[pyfunction]
#[pyo3(signature = (partition, metadata_csv, window_start = "2012-01-01", phi_start = "2012-07-01", window_end = "2016-02-01", top_k = 30))]
fn growth_report<'py>(
    py: Python<'py>,
    partition: &PyPartition,
    metadata_csv: &str,
    window_start: &str,
    phi_start: &str,
    window_end: &str,
    top_k: usize,
) -> PyResult<Vec<Bound<'py, pyo3::types::PyDict>>> {
    use pyo3::types::PyDictMethods;
    let date = |s: &str| s.parse().map_err(value_err);
    let w = GrowthWindow::new(date(window_start)?, date(phi_start)?, date(window_end)?).map_err(value_err)?;
    let meta = parse_metadata(metadata_csv).map_err(value_err)?;
    let rows = growth::growth_report(&partition.0, &meta, &w, top_k).map_err(value_err)?;
    rows.iter()
        .map(|r| {
            let d = pyo3::types::PyDict::new(py);
            d.set_item("cluster", &r.cluster_label)?;
            d.set_item("total_size", r.total_size)?;
            d.set_item("min_size_before", r.min_size_before)?;
            d.set_item("recent_phi_count", r.recent_phi_count)?;
            d.set_item("other_count", r.other_count)?;
            d.set_item("dates", r.date_label())?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn phyloclust(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAlignment>()?;
    m.add_class::<PyTree>()?;
    m.add_class::<PyDistanceMatrix>()?;
    m.add_class::<PyPartition>()?;
    m.add_class::<PyChainSummary>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(threshold_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(percentile_cutoff, m)?)?;
    m.add_function(wrap_pyfunction!(gap_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(majority_consensus, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_rand_index, m)?)?;
    m.add_function(wrap_pyfunction!(partial_gold_ari, m)?)?;
    m.add_function(wrap_pyfunction!(walktrap, m)?)?;
    m.add_function(wrap_pyfunction!(run_chain, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(growth_report, m)?)?;
    m.add("SUPPORT_GRID", evaluation::SUPPORT_GRID.to_vec())?;
    m.add("DISTANCE_GRID", evaluation::DISTANCE_GRID.to_vec())?;
    Ok(())
}
