//! Replicate-resampling bootstrap of the full EM fit, percentile
//! confidence intervals per graph-matrix entry, and the significance rule
//! that turns intervals into directed network edges.
//!
//! Every bootstrap sample refits the model on `n_R` replicates drawn with
//! replacement, re-initializing deterministically from the resampled
//! data. Because the hidden coordinates are only identified up to signed
//! permutation, each sample's hidden block is aligned to the reference
//! fit before intervals are formed; without that step intervals on the
//! `A`, `F`, and `Z` entries would be meaningless.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::align::{align_loadings, apply_alignment};
use crate::datamodel::{assemble_graph_matrix, Block, ExpressionDataset, GenomicGraphMatrix};
use crate::em::{fit, FitConfig};
use crate::error::{Error, Result};
use crate::simulate::derive_seed;

/// Largest tolerated fraction of failed sample fits.
const MAX_FAILURE_FRACTION: f64 = 0.2;

/// Bootstrap distribution of the genomic graph matrix.
#[derive(Debug, Clone)]
pub struct BootstrapDistribution {
    /// Point estimate fit on the original data.
    pub reference: GenomicGraphMatrix,
    /// Aligned graph matrices of the successful sample fits, in sample order.
    pub samples: Vec<DMatrix<f64>>,
    /// Per-sample RNG seeds, for all requested samples.
    pub seeds: Vec<u64>,
    /// Indices of samples whose fit failed (excluded from `samples`).
    pub failed: Vec<usize>,
    /// Gene names carried from the dataset, for edge labeling.
    pub gene_names: Vec<String>,
}

impl BootstrapDistribution {
    pub fn p(&self) -> usize {
        self.reference.p()
    }

    pub fn k(&self) -> usize {
        self.reference.k()
    }
}

/// Decision record for one entry of the graph matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDecision {
    /// Row of the entry: the influenced node.
    pub row: usize,
    /// Column of the entry: the influencing node.
    pub col: usize,
    pub block: Block,
    pub source: String,
    pub target: String,
    /// Reference (point) estimate of the entry.
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    /// True iff the interval excludes zero.
    pub significant: bool,
}

/// Directed network over gene and regulator nodes.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    pub nodes: Vec<NetworkNode>,
    pub edges: Vec<NetworkEdge>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkNode {
    pub name: String,
    pub is_regulator: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkEdge {
    pub source: String,
    pub target: String,
    pub block: Block,
    /// Reference estimate; positive is activation, negative repression.
    pub weight: f64,
}

/// Node label for index `idx` of the graph matrix.
pub fn node_label(idx: usize, gene_names: &[String]) -> String {
    if idx < gene_names.len() {
        gene_names[idx].clone()
    } else {
        format!("TF{}", idx - gene_names.len() + 1)
    }
}

/// Draws `n_R` replicate indices uniformly with replacement and assembles
/// the resampled dataset. Deterministic per seed.
pub fn resample(dataset: &ExpressionDataset, seed: u64) -> ExpressionDataset {
    let n = dataset.n_reps();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    dataset
        .select_replicates(&indices)
        .expect("resample preserves dataset validity")
}

/// Reference fit plus `n_b` bootstrap refits with hidden labels aligned
/// to the reference. Individual sample failures are recorded and
/// excluded; more than 20% failures is an error.
pub fn bootstrap_fit(
    dataset: &ExpressionDataset,
    k: usize,
    n_b: usize,
    config: &FitConfig,
) -> Result<BootstrapDistribution> {
    if n_b < 2 {
        return Err(Error::InvalidDims("bootstrap needs N_b >= 2".into()));
    }
    dataset.dims_with_k(k)?;

    let reference_fit = fit(dataset, k, config)?;
    let reference = assemble_graph_matrix(&reference_fit.params);
    let (_, z_ref, _, _) = reference.blocks();

    let seeds: Vec<u64> = (0..n_b)
        .map(|b| derive_seed(config.seed, 0xb007 + b as u64))
        .collect();

    let outcomes: Vec<(usize, Result<DMatrix<f64>>)> = seeds
        .par_iter()
        .enumerate()
        .map(|(b, &sample_seed)| {
            let ds = resample(dataset, sample_seed);
            let sample = fit(&ds, k, &FitConfig { seed: sample_seed, ..*config }).map(|result| {
                let g = assemble_graph_matrix(&result.params);
                let (_, z_sample, _, _) = g.blocks();
                let alignment = align_loadings(&z_ref, &z_sample);
                apply_alignment(&g, &alignment).matrix().clone()
            });
            (b, sample)
        })
        .collect();

    let mut samples = Vec::with_capacity(n_b);
    let mut failed = Vec::new();
    for (b, outcome) in outcomes {
        match outcome {
            Ok(g) => samples.push(g),
            Err(_) => failed.push(b),
        }
    }
    if failed.len() as f64 > MAX_FAILURE_FRACTION * n_b as f64 {
        return Err(Error::Numerical(format!(
            "{} of {} bootstrap fits failed",
            failed.len(),
            n_b
        )));
    }

    Ok(BootstrapDistribution {
        reference,
        samples,
        seeds,
        failed,
        gene_names: dataset.gene_names().to_vec(),
    })
}

/// Linear interpolation of order statistics at probability `q`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n >= 1);
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Percentile confidence interval at the given level for every entry of
/// the graph matrix, in row-major order. An entry is significant when its
/// interval excludes zero.
pub fn confidence_intervals(dist: &BootstrapDistribution, level: f64) -> Result<Vec<EdgeDecision>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidDims("confidence level must lie in (0, 1)".into()));
    }
    if dist.samples.len() < 2 {
        return Err(Error::InvalidDims(
            "confidence intervals need at least 2 successful samples".into(),
        ));
    }
    let n = dist.reference.size();
    let q_lo = (1.0 - level) / 2.0;
    let q_hi = 1.0 - q_lo;

    let mut decisions = Vec::with_capacity(n * n);
    let mut values = vec![0.0; dist.samples.len()];
    for i in 0..n {
        for j in 0..n {
            for (s, g) in dist.samples.iter().enumerate() {
                values[s] = g[(i, j)];
            }
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite sample values"));
            let lower = percentile(&values, q_lo);
            let upper = percentile(&values, q_hi);
            decisions.push(EdgeDecision {
                row: i,
                col: j,
                block: dist.reference.block_of(i, j),
                source: node_label(j, &dist.gene_names),
                target: node_label(i, &dist.gene_names),
                estimate: dist.reference.matrix()[(i, j)],
                lower,
                upper,
                significant: lower > 0.0 || upper < 0.0,
            });
        }
    }
    Ok(decisions)
}

/// Directed graph of the significant decisions: nodes are the `p` genes
/// plus `k` regulator nodes, and each significant entry `(i, j)`
/// contributes an edge from column node `j` to row node `i`.
pub fn significant_network(decisions: &[EdgeDecision], gene_names: &[String]) -> Result<NetworkGraph> {
    let p = gene_names.len();
    let n_sq = decisions.len();
    let n = (n_sq as f64).sqrt().round() as usize;
    if n * n != n_sq || n < p {
        return Err(Error::InvalidDims(format!(
            "expected decisions for a full square matrix covering {p} genes, got {n_sq}"
        )));
    }
    let k = n - p;
    for name in gene_names {
        if name.starts_with("TF") && name[2..].parse::<usize>().is_ok() {
            return Err(Error::Data(format!(
                "gene name '{name}' collides with regulator node labels"
            )));
        }
    }

    let nodes = (0..n)
        .map(|idx| NetworkNode {
            name: node_label(idx, gene_names),
            is_regulator: idx >= p,
        })
        .collect();
    let edges = decisions
        .iter()
        .filter(|d| d.significant)
        .map(|d| NetworkEdge {
            source: d.source.clone(),
            target: d.target.clone(),
            block: d.block,
            weight: d.estimate,
        })
        .collect();
    let _ = k;
    Ok(NetworkGraph { nodes, edges })
}

/// Nodes sorted by out-degree, descending, ties broken alphabetically.
pub fn out_degree_ranking(graph: &NetworkGraph) -> Vec<(String, usize)> {
    let mut degrees: Vec<(String, usize)> = graph
        .nodes
        .iter()
        .map(|node| {
            let d = graph.edges.iter().filter(|e| e.source == node.name).count();
            (node.name.clone(), d)
        })
        .collect();
    degrees.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    degrees
}
