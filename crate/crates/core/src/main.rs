//! Batch CLI for the network-inference pipeline: simulation, fitting,
//! model selection, bootstrap edge calls, network export, and recovery
//! scoring.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical error.
//! Failures print one machine-readable line to stderr:
//! `error\t<category>\t<message>`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use grnssm::error::{Error, Result};
use grnssm::io;
use grnssm::simulate::{BlockFilter, GroundTruth, GroundTruthConfig};
use grnssm::{Block, FitConfig, NetworkEdge, NetworkGraph, NetworkNode};

#[derive(Parser)]
#[command(
    name = "grnssm",
    version,
    about = "Gene regulatory network inference via a linear-Gaussian state-space model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct FitOpts {
    /// Maximum EM iterations.
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Relative log-likelihood convergence tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Master seed governing all randomness of the command.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl FitOpts {
    fn config(&self) -> FitConfig {
        FitConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from sparse random ground truth.
    Simulate {
        /// Number of genes.
        #[arg(long)]
        p: usize,
        /// Hidden-state dimension of the generating model.
        #[arg(long)]
        k: usize,
        /// Time points per replicate.
        #[arg(long, default_value_t = 10)]
        t: usize,
        /// Number of replicates.
        #[arg(long)]
        nr: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Probability that an off-diagonal interaction is nonzero.
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        /// Smallest nonzero interaction magnitude.
        #[arg(long, default_value_t = 0.3)]
        mag_lo: f64,
        /// Largest nonzero interaction magnitude.
        #[arg(long, default_value_t = 0.8)]
        mag_hi: f64,
        /// Diagonal value of the F and B blocks.
        #[arg(long, default_value_t = 0.5)]
        diag: f64,
        /// Spectral-radius cap on the lag-1 dynamics.
        #[arg(long, default_value_t = 0.95)]
        spectral_cap: f64,
        /// Observation noise variance of the generating model.
        #[arg(long, default_value_t = 0.1)]
        sigma2_xi: f64,
        /// Output directory for dataset.csv and truth.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the model at a fixed hidden dimension and write parameters.
    Fit {
        /// Long-format dataset CSV.
        #[arg(long)]
        input: PathBuf,
        /// Hidden-state dimension.
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        fit: FitOpts,
        /// Output parameter JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep hidden dimensions and select the AICc minimizer.
    SelectK {
        #[arg(long)]
        input: PathBuf,
        /// Inclusive candidate range, e.g. 0..4.
        #[arg(long)]
        k_range: String,
        #[command(flatten)]
        fit: FitOpts,
        /// Output selection report TSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Bootstrap the fit and write per-entry confidence intervals.
    Bootstrap {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        /// Number of bootstrap samples.
        #[arg(long, default_value_t = 200)]
        nb: usize,
        /// Confidence level of the percentile intervals.
        #[arg(long, default_value_t = 0.99)]
        level: f64,
        #[command(flatten)]
        fit: FitOpts,
        /// Output edge TSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render significant edges from an edge TSV as a DOT digraph.
    ExportNetwork {
        /// Edge TSV produced by `bootstrap`.
        #[arg(long)]
        edges: PathBuf,
        /// Output DOT file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score recovered edges against ground-truth parameters.
    Eval {
        /// Ground-truth parameter JSON (from `simulate`).
        #[arg(long)]
        truth: PathBuf,
        /// Edge TSV produced by `bootstrap`.
        #[arg(long)]
        edges: PathBuf,
        /// Restrict scoring to one block: all, B, Z, A, or F.
        #[arg(long, default_value = "all")]
        block: String,
        /// Output metrics TSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_k_range(s: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = s.split("..").collect();
    let parse = |x: &str| -> Result<usize> {
        x.trim()
            .parse()
            .map_err(|_| Error::Data(format!("bad k value '{x}' in range '{s}'")))
    };
    match parts.as_slice() {
        [single] => Ok(vec![parse(single)?]),
        [lo, hi] => {
            let (lo, hi) = (parse(lo)?, parse(hi)?);
            if lo > hi {
                return Err(Error::Data(format!("empty range '{s}'")));
            }
            Ok((lo..=hi).collect())
        }
        _ => Err(Error::Data(format!("bad range '{s}', expected LO..HI"))),
    }
}

/// Rebuilds the full node set and significant edge list from an edge TSV.
/// Block semantics identify regulator nodes; the rows of the full matrix
/// enumerate every node as a source, fixing a deterministic order.
fn network_from_edge_rows(rows: &[io::EdgeTsvRow]) -> Result<NetworkGraph> {
    let mut order: Vec<String> = Vec::new();
    let mut kind: BTreeMap<String, bool> = BTreeMap::new();
    let mut note = |name: &str, is_regulator: bool| -> Result<()> {
        match kind.get(name) {
            None => {
                order.push(name.to_string());
                kind.insert(name.to_string(), is_regulator);
                Ok(())
            }
            Some(&prev) if prev == is_regulator => Ok(()),
            Some(_) => Err(Error::Data(format!(
                "node '{name}' is used as both gene and regulator"
            ))),
        }
    };
    for row in rows {
        let (src_reg, tgt_reg) = match row.block {
            Block::B => (false, false),
            Block::Z => (true, false),
            Block::A => (false, true),
            Block::F => (true, true),
        };
        note(&row.source, src_reg)?;
        note(&row.target, tgt_reg)?;
    }
    let nodes = order
        .iter()
        .map(|name| NetworkNode {
            name: name.clone(),
            is_regulator: kind[name],
        })
        .collect();
    let edges = rows
        .iter()
        .filter(|r| r.significant)
        .map(|r| NetworkEdge {
            source: r.source.clone(),
            target: r.target.clone(),
            block: r.block,
            weight: r.estimate,
        })
        .collect();
    Ok(NetworkGraph { nodes, edges })
}

/// Reconstructs the inferred significance mask from an edge TSV against
/// the node order implied by the truth's gene names.
fn mask_from_edge_rows(
    rows: &[io::EdgeTsvRow],
    gene_names: &[String],
    k: usize,
) -> Result<DMatrix<bool>> {
    let p = gene_names.len();
    let n = p + k;
    if rows.len() != n * n {
        return Err(Error::Data(format!(
            "edge file has {} rows, expected {} for p = {p}, k = {k}",
            rows.len(),
            n * n
        )));
    }
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, name) in gene_names.iter().enumerate() {
        index.insert(name.clone(), i);
    }
    for j in 0..k {
        index.insert(format!("TF{}", j + 1), p + j);
    }

    let mut mask = DMatrix::from_element(n, n, false);
    let mut seen = DMatrix::from_element(n, n, false);
    for row in rows {
        let i = *index
            .get(row.target.as_str())
            .ok_or_else(|| Error::Data(format!("unknown target node '{}'", row.target)))?;
        let j = *index
            .get(row.source.as_str())
            .ok_or_else(|| Error::Data(format!("unknown source node '{}'", row.source)))?;
        if seen[(i, j)] {
            return Err(Error::Data(format!(
                "duplicate edge row for {} -> {}",
                row.source, row.target
            )));
        }
        seen[(i, j)] = true;
        mask[(i, j)] = row.significant;
    }
    Ok(mask)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            p,
            k,
            t,
            nr,
            seed,
            density,
            mag_lo,
            mag_hi,
            diag,
            spectral_cap,
            sigma2_xi,
            out,
        } => {
            let config = GroundTruthConfig {
                density,
                magnitude: (mag_lo, mag_hi),
                diagonal: diag,
                spectral_cap,
                sigma2_xi,
                q0_scale: 1.0,
            };
            let truth = grnssm::random_ground_truth(p, k, &config, seed)?;
            let (dataset, truth) = grnssm::generate(&truth.params, t, nr, seed)?;
            std::fs::create_dir_all(&out)?;
            io::write_csv(&dataset, &out.join("dataset.csv"))?;
            io::write_params_json(
                &truth.params,
                dataset.gene_names(),
                None,
                &out.join("truth.json"),
            )?;
            println!(
                "wrote {} and {}",
                out.join("dataset.csv").display(),
                out.join("truth.json").display()
            );
            Ok(())
        }
        Command::Fit { input, k, fit, out } => {
            let dataset = io::read_csv(&input)?;
            let result = grnssm::fit(&dataset, k, &fit.config())?;
            io::write_params_json(
                &result.params,
                dataset.gene_names(),
                Some(io::FitSummaryDoc {
                    loglik: result.loglik(),
                    iterations: result.iterations,
                    converged: result.converged,
                }),
                &out,
            )?;
            println!(
                "k={k} loglik={} iterations={} converged={}",
                io::fmt_sig10(result.loglik()),
                result.iterations,
                result.converged
            );
            Ok(())
        }
        Command::SelectK {
            input,
            k_range,
            fit,
            out,
        } => {
            let dataset = io::read_csv(&input)?;
            let candidates = parse_k_range(&k_range)?;
            let report = grnssm::select_k(&dataset, &candidates, &fit.config())?;
            io::write_selection_tsv(&report, &out)?;
            println!("chosen_k={}", report.chosen_k);
            Ok(())
        }
        Command::Bootstrap {
            input,
            k,
            nb,
            level,
            fit,
            out,
        } => {
            let dataset = io::read_csv(&input)?;
            let dist = grnssm::bootstrap_fit(&dataset, k, nb, &fit.config())?;
            let decisions = grnssm::confidence_intervals(&dist, level)?;
            io::write_edges_tsv(&decisions, &out)?;
            let significant = decisions.iter().filter(|d| d.significant).count();
            println!(
                "samples={} failed={} significant={significant}",
                dist.samples.len(),
                dist.failed.len()
            );
            Ok(())
        }
        Command::ExportNetwork { edges, out } => {
            let rows = io::read_edges_tsv(&edges)?;
            let graph = network_from_edge_rows(&rows)?;
            io::write_dot(&graph, &out)?;
            println!("nodes={} edges={}", graph.nodes.len(), graph.edges.len());
            Ok(())
        }
        Command::Eval {
            truth,
            edges,
            block,
            out,
        } => {
            let (params, gene_names, _) = io::read_params_json(&truth)?;
            let rows = io::read_edges_tsv(&edges)?;
            let mask = mask_from_edge_rows(&rows, &gene_names, params.k())?;
            let truth = GroundTruth::from_params(params);
            let filter = BlockFilter::parse(&block)?;
            let metrics = grnssm::recovery_metrics(&truth, &mask, filter)?;
            match out {
                Some(path) => io::write_metrics_tsv(&metrics, &path)?,
                None => io::write_metrics_to(&metrics, &mut std::io::stdout())?,
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            eprintln!("error\tusage\t{}", e.kind());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error\t{}\t{e}", e.category());
            match e.category() {
                "numerical" => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
