use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use phyloclust::community::{average_adjacency, walktrap_communities};
use phyloclust::distance::{build_distance_matrix, SaturationPolicy, SequenceDistance, BINARY_MAGIC};
use phyloclust::evaluation::{
    adjusted_rand_index, cutpoint_sweep, method_cocluster_matrix, partial_gold_ari, partition_summary, summary_tsv,
    ReferenceSet,
};
use phyloclust::gap::{gap_cluster, GapConfig};
use phyloclust::growth::{emit_growth_svg, growth_report, growth_tsv, phi_breakdown, GrowthWindow};
use phyloclust::io::{
    parse_fasta, parse_metadata, parse_newick, parse_partition, write_fasta, write_metadata, write_newick,
    write_partition,
};
use phyloclust::mcmc::{run_chain, ChainConfig};
use phyloclust::phylo::{annotate_support, majority_consensus, root_at_outgroup};
use phyloclust::simulate::{simulate, Preset};
use phyloclust::threshold::{percentile_cutoff, ClusterCriteria, DistanceStatistic, ThresholdClusterer};
use phyloclust::{Alignment, DistanceKind, DistanceMatrix, Partition, PhyloTree};

use crate::manifest::RunContext;
use crate::{
    usage_error, AriArgs, ClusterArgs, Command, CompareArgs, ConsensusArgs, DistArgs, GrowthArgs, LinkageArgs,
    MatrixFormat, Measure, Method, PresetArg, SimulateArgs, SupportArgs, SweepArgs,
};

/// Flag combinations clap cannot express; failures exit with status 2.
pub fn validate(cmd: &Command) {
    match cmd {
        Command::Cluster(a) => {
            if a.method == Method::Gap {
                if a.align.is_none() && a.matrix.is_none() {
                    usage_error("--method gap needs --align or --matrix");
                }
            } else {
                if a.tree.is_none() {
                    usage_error("threshold methods need --tree");
                }
                if a.support_min.is_none() {
                    usage_error("threshold methods need --support-min");
                }
                if a.distance_max.is_none() && a.percentile.is_none() {
                    usage_error("threshold methods need --distance-max or --percentile");
                }
                if a.method == Method::MaxP && a.align.is_none() && a.matrix.is_none() {
                    usage_error("--method maxp needs --align or --matrix");
                }
            }
        }
        Command::Sweep(a) => {
            if a.method == Method::Gap {
                usage_error("sweep applies to threshold methods only");
            }
            if a.method == Method::MaxP && a.align.is_none() && a.matrix.is_none() {
                usage_error("--method maxp needs --align or --matrix");
            }
        }
        Command::Compare(a) => {
            for p in &a.partitions {
                if !p.contains('=') {
                    usage_error(format!("--partition {p} is not NAME=PATH"));
                }
            }
        }
        Command::Linkage(a) if a.chains == 0 => usage_error("--chains must be at least 1"),
        _ => {}
    }
}

pub fn run(cmd: &Command, ctx: &mut RunContext) -> Result<()> {
    match cmd {
        Command::Dist(a) => dist(a, ctx),
        Command::Cluster(a) => cluster(a, ctx),
        Command::Support(a) => support(a, ctx),
        Command::Consensus(a) => consensus(a, ctx),
        Command::Sweep(a) => sweep(a, ctx),
        Command::Ari(a) => ari(a, ctx),
        Command::Compare(a) => compare(a, ctx),
        Command::Linkage(a) => linkage(a, ctx),
        Command::Growth(a) => growth(a, ctx),
        Command::Simulate(a) => simulate_cmd(a, ctx),
    }
}

fn sequence_distance(m: Measure) -> SequenceDistance {
    match m {
        Measure::P => SequenceDistance::PDistance,
        Measure::K80 => SequenceDistance::K80,
    }
}

fn load_alignment(ctx: &mut RunContext, path: &Path) -> Result<Alignment> {
    let text = ctx.read_text(path)?;
    parse_fasta(&text).with_context(|| format!("in {}", path.display()))
}

fn load_tree(ctx: &mut RunContext, path: &Path, outgroup: &[String]) -> Result<PhyloTree> {
    let text = ctx.read_text(path)?;
    let tree = parse_newick(&text).with_context(|| format!("in {}", path.display()))?;
    if outgroup.is_empty() {
        Ok(tree)
    } else {
        Ok(root_at_outgroup(&tree, outgroup)?)
    }
}

/// Every `;`-terminated tree in the file.
fn load_tree_set(ctx: &mut RunContext, path: &Path) -> Result<Vec<PhyloTree>> {
    let text = ctx.read_text(path)?;
    let trees = text
        .split_inclusive(';')
        .filter(|chunk| chunk.contains(';'))
        .enumerate()
        .map(|(i, chunk)| parse_newick(chunk).with_context(|| format!("tree {} of {}", i + 1, path.display())))
        .collect::<Result<Vec<_>>>()?;
    if trees.is_empty() {
        bail!("{} holds no trees", path.display());
    }
    Ok(trees)
}

fn load_partition(ctx: &mut RunContext, path: &Path) -> Result<Partition> {
    let text = ctx.read_text(path)?;
    parse_partition(&text).with_context(|| format!("in {}", path.display()))
}

/// Binary matrices take their ids from a sibling `.ids` file when present.
fn load_matrix(ctx: &mut RunContext, path: &Path) -> Result<DistanceMatrix> {
    let bytes = ctx.read(path)?;
    let m = if bytes.starts_with(BINARY_MAGIC) {
        let sidecar = path.with_extension("ids");
        let ids = if sidecar.exists() {
            Some(read_id_list(ctx, &sidecar)?)
        } else {
            log::warn!("no {} beside binary matrix; rows are numbered", sidecar.display());
            None
        };
        DistanceMatrix::from_binary(&bytes, ids, DistanceKind::Other)
    } else {
        let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
        DistanceMatrix::from_phylip(&text, DistanceKind::Other)
    };
    m.with_context(|| format!("in {}", path.display()))
}

fn read_id_list(ctx: &mut RunContext, path: &Path) -> Result<Vec<String>> {
    Ok(ctx
        .read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn dist(a: &DistArgs, ctx: &mut RunContext) -> Result<()> {
    let aln = load_alignment(ctx, &a.align)?;
    let policy = a.cap.map_or(SaturationPolicy::Undefined, SaturationPolicy::Cap);
    let m = build_distance_matrix(&aln, sequence_distance(a.distance_kind), policy)?;
    match a.format {
        MatrixFormat::Phylip => ctx.write(&a.out, m.to_phylip())?,
        MatrixFormat::Binary => {
            ctx.write(&a.out, m.to_binary())?;
            ctx.write(&a.out.with_extension("ids"), m.ids().join("\n") + "\n")?;
        }
    }
    println!("{} sequences, {} sites", aln.len(), aln.sites());
    Ok(())
}

fn statistic(m: Method) -> DistanceStatistic {
    match m {
        Method::MaxP => DistanceStatistic::MaxPairwiseP,
        Method::MedianPatristic => DistanceStatistic::MedianPatristic,
        Method::MaxPatristic => DistanceStatistic::MaxPatristic,
        Method::Gap => unreachable!("gap has no clade statistic"),
    }
}

fn threshold_clusterer<'t>(
    ctx: &mut RunContext,
    tree: &'t PhyloTree,
    method: Method,
    align: Option<&Path>,
    matrix: Option<&Path>,
) -> Result<ThresholdClusterer<'t>> {
    let stat = statistic(method);
    if stat == DistanceStatistic::MaxPairwiseP {
        if let Some(path) = matrix {
            let m = load_matrix(ctx, path)?;
            return Ok(ThresholdClusterer::with_distances(tree, &m)?);
        }
    }
    let aln = match (stat, align) {
        (DistanceStatistic::MaxPairwiseP, Some(path)) => Some(load_alignment(ctx, path)?),
        _ => None,
    };
    Ok(ThresholdClusterer::new(tree, stat, aln.as_ref())?)
}

fn cluster(a: &ClusterArgs, ctx: &mut RunContext) -> Result<()> {
    let partition = if a.method == Method::Gap {
        let cfg = GapConfig::new(a.gap_quantile)?;
        let m = match (&a.matrix, &a.align) {
            (Some(path), _) => load_matrix(ctx, path)?,
            (None, Some(path)) => {
                let aln = load_alignment(ctx, path)?;
                let kind = sequence_distance(a.distance_kind.unwrap_or(Measure::K80));
                build_distance_matrix(&aln, kind, SaturationPolicy::Cap(a.cap.unwrap_or(1.0)))?
            }
            (None, None) => unreachable!("checked by validate"),
        };
        gap_cluster(&m, &cfg)?
    } else {
        let tree_path = a.tree.as_deref().expect("checked by validate");
        let tree = load_tree(ctx, tree_path, &a.outgroup)?;
        let distance_max = match (a.distance_max, a.percentile) {
            (Some(d), _) => d,
            (None, Some(p)) => {
                let d = percentile_cutoff(&tree, p)?;
                println!("percentile {p} of patristic distances: {d}");
                d
            }
            (None, None) => unreachable!("checked by validate"),
        };
        let criteria = ClusterCriteria::new(
            a.support_min.expect("checked by validate"),
            distance_max,
            statistic(a.method),
        )?;
        let clusterer = threshold_clusterer(ctx, &tree, a.method, a.align.as_deref(), a.matrix.as_deref())?;
        clusterer.cluster_with(&criteria)?
    };
    ctx.write(&a.out, write_partition(&partition))?;
    let multi = partition.cluster_sizes().values().filter(|&&s| s > 1).count();
    println!("{} sequences, {} clusters, {multi} with two or more members", partition.len(), partition.num_clusters());
    Ok(())
}

fn support(a: &SupportArgs, ctx: &mut RunContext) -> Result<()> {
    let reference = load_tree(ctx, &a.tree, &[])?;
    let sample = load_tree_set(ctx, &a.sample)?;
    let annotated = annotate_support(&reference, &sample)?;
    ctx.write(&a.out, write_newick(&annotated) + "\n")?;
    println!("{} trees in sample", sample.len());
    Ok(())
}

fn consensus(a: &ConsensusArgs, ctx: &mut RunContext) -> Result<()> {
    let sample = load_tree_set(ctx, &a.sample)?;
    let tree = majority_consensus(&sample)?;
    ctx.write(&a.out, write_newick(&tree) + "\n")?;
    println!("{} trees in sample", sample.len());
    Ok(())
}

fn sweep(a: &SweepArgs, ctx: &mut RunContext) -> Result<()> {
    let tree = load_tree(ctx, &a.tree, &a.outgroup)?;
    let reference = load_partition(ctx, &a.reference)?;
    let universe = match &a.universe {
        Some(path) => read_id_list(ctx, path)?,
        None => tree.tip_labels(),
    };
    let rs = ReferenceSet::new(reference, universe)?;
    let clusterer = threshold_clusterer(ctx, &tree, a.method, a.align.as_deref(), a.matrix.as_deref())?;
    let result = cutpoint_sweep(&a.support_grid, &a.distance_grid, &rs, |s, d| {
        clusterer.cluster(s, d).map_err(anyhow::Error::from)
    })?;
    ctx.write(&a.out, result.to_tsv())?;
    let b = result.best;
    println!("best: support_min {} distance_max {} ARI {:.6}", b.support_min, b.distance_max, b.ari);
    Ok(())
}

fn ari(a: &AriArgs, ctx: &mut RunContext) -> Result<()> {
    let candidate = load_partition(ctx, &a.candidate)?;
    let planted = load_partition(ctx, &a.planted)?;
    let value = if a.partial {
        let universe: Vec<String> = candidate.ids().map(str::to_string).collect();
        partial_gold_ari(&candidate, &ReferenceSet::new(planted, universe)?)?
    } else {
        adjusted_rand_index(&candidate, &planted)?
    };
    let tsv = format!(
        "candidate\tplanted\tari\n{}\t{}\t{value:.6}\n",
        a.candidate.display(),
        a.planted.display()
    );
    ctx.write(&a.out, tsv)?;
    println!("{value:.6}");
    Ok(())
}

fn compare(a: &CompareArgs, ctx: &mut RunContext) -> Result<()> {
    let mut names = Vec::new();
    let mut partitions = Vec::new();
    for entry in &a.partitions {
        let (name, path) = entry.split_once('=').expect("checked by validate");
        names.push(name.to_string());
        partitions.push(load_partition(ctx, Path::new(path))?);
    }
    let ids: Vec<String> = partitions[0].ids().map(str::to_string).collect();
    let matrix = method_cocluster_matrix(&partitions, &ids)?;
    let mut summaries = BTreeMap::new();
    for (name, p) in names.iter().zip(&partitions) {
        summaries.insert(name.clone(), partition_summary(p)?);
    }
    let dense = matrix.graph.to_matrix(matrix.ids.clone());
    ctx.write(&a.out_dir.join("cocluster.pcdm"), dense.to_binary())?;
    ctx.write(&a.out_dir.join("cocluster.ids"), matrix.row_order())?;
    ctx.write(&a.out_dir.join("summary.tsv"), summary_tsv(&summaries))?;
    println!("{} sequences clustered by at least one method", matrix.ids.len());
    Ok(())
}

fn linkage(a: &LinkageArgs, ctx: &mut RunContext) -> Result<()> {
    let tree = load_tree(ctx, &a.tree, &[])?;
    let aln = load_alignment(ctx, &a.align)?;
    let defaults = ChainConfig::default();
    let base = ChainConfig {
        iterations: a.iterations.unwrap_or(defaults.iterations),
        burn_in: a.burn_in.unwrap_or(defaults.burn_in),
        thin: a.thin.unwrap_or(defaults.thin),
        init_support_min: a.init_support_min.unwrap_or(defaults.init_support_min),
        init_distance_max: a.init_distance_max.unwrap_or(defaults.init_distance_max),
        cluster_count_rate: a.cluster_count_rate.unwrap_or(defaults.cluster_count_rate),
        sample_means: !a.fixed_means,
        sample_concentration: !a.fixed_concentration,
        ..defaults
    };
    let seeds: Vec<u64> = (0..a.chains).map(|k| a.seed + k).collect();
    ctx.seeds = seeds.clone();
    let summaries = seeds
        .par_iter()
        .map(|&seed| run_chain(&tree, &aln, &ChainConfig { rng_seed: seed, ..base.clone() }))
        .collect::<Result<Vec<_>, _>>()?;

    for (k, s) in summaries.iter().enumerate() {
        let dir = a.out_dir.join(format!("chain_{}", k + 1));
        ctx.check_output(&dir)?;
        s.write_dir(&dir)?;
        ctx.record_output(&dir);
        println!(
            "chain {} (seed {}): {} samples, MAP log posterior {:.4}, {} MAP clusters",
            k + 1,
            seeds[k],
            s.retained_count(),
            s.map_log_posterior,
            s.map_partition.num_clusters()
        );
    }
    let graphs: Vec<_> = summaries.iter().map(|s| s.cocluster.clone()).collect();
    let pooled = average_adjacency(&graphs)?;
    let estimate = walktrap_communities(&pooled, &summaries[0].ids, a.walk_length)?;
    ctx.write(&a.out_dir.join("linkage.csv"), write_partition(&estimate))?;
    println!("linkage estimate: {} clusters", estimate.num_clusters());
    Ok(())
}

fn growth(a: &GrowthArgs, ctx: &mut RunContext) -> Result<()> {
    let partition = load_partition(ctx, &a.partition)?;
    let text = ctx.read_text(&a.metadata)?;
    let meta = parse_metadata(&text).with_context(|| format!("in {}", a.metadata.display()))?;
    let window = GrowthWindow::new(a.window_start, a.phi_start, a.window_end)?;
    let rows = growth_report(&partition, &meta, &window, a.top_k)?;
    let b = phi_breakdown(&partition, &meta, &window)?;
    ctx.write(&a.out, growth_tsv(&rows))?;
    let svg = a.svg.clone().unwrap_or_else(|| a.out.with_extension("svg"));
    ctx.write(&svg, emit_growth_svg(&rows))?;
    println!(
        "recent PHI: {} total, {} singletons, {} in pairs, {} in clusters of five or more, {} in clusters of three or four",
        b.total_recent_phi, b.singleton_count, b.pair_count, b.ge5_count, b.other_count
    );
    Ok(())
}

fn simulate_cmd(a: &SimulateArgs, ctx: &mut RunContext) -> Result<()> {
    let preset = match a.preset {
        PresetArg::Small => Preset::Small,
        PresetArg::Acceptance => Preset::Acceptance,
        PresetArg::PaperScale => Preset::PaperScale,
    };
    let mut cfg = preset.config(a.seed);
    if let Some(f) = a.mask_fraction {
        cfg.mask_fraction = f;
    }
    ctx.seeds = vec![a.seed];
    let sim = simulate(&cfg)?;
    ctx.write(&a.out_dir.join("tree.nwk"), write_newick(&sim.tree) + "\n")?;
    ctx.write(&a.out_dir.join("alignment.fasta"), write_fasta(&sim.alignment))?;
    ctx.write(&a.out_dir.join("metadata.csv"), write_metadata(&sim.metadata))?;
    ctx.write(&a.out_dir.join("planted.csv"), write_partition(&sim.planted))?;
    println!(
        "{} sequences, {} sites, {} planted clusters",
        sim.alignment.len(),
        sim.alignment.sites(),
        sim.planted.num_clusters()
    );
    Ok(())
}
