//! File formats: long-format CSV datasets, JSON parameter documents, TSV
//! reports, and DOT network exports.
//!
//! Numeric output is deterministic. Dataset CSV values use Rust's
//! shortest-round-trip float formatting so export followed by ingest
//! reproduces the dataset exactly; all other outputs (JSON, TSV) use a
//! fixed 10-significant-digit scientific format.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bootstrap::EdgeDecision;
use crate::datamodel::{Block, ExpressionDataset, ModelParams, SIGMA2_ETA};
use crate::error::{Error, Result};
use crate::selection::SelectionReport;
use crate::simulate::RecoveryMetrics;
use crate::NetworkGraph;

/// Fixed 10-significant-digit scientific formatting for report files.
pub fn fmt_sig10(x: f64) -> String {
    format!("{x:.9e}")
}

// ---------------------------------------------------------------------------
// Long-format CSV datasets
// ---------------------------------------------------------------------------

/// Reads a long-format CSV with header `gene,replicate,time,value`.
///
/// Genes are ordered by first appearance; replicate and time labels are
/// arbitrary integers mapped to indices in ascending order. The file must
/// contain every `(gene, time, replicate)` cell exactly once.
pub fn read_csv(path: &Path) -> Result<ExpressionDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let expected = ["gene", "replicate", "time", "value"];
    let names: Vec<&str> = headers.iter().collect();
    if names != expected {
        return Err(Error::Data(format!(
            "expected header 'gene,replicate,time,value', got '{}'",
            names.join(",")
        )));
    }

    let mut gene_order: Vec<String> = Vec::new();
    let mut gene_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut cells: BTreeMap<(usize, i64, i64), f64> = BTreeMap::new();
    let mut time_labels: Vec<i64> = Vec::new();
    let mut rep_labels: Vec<i64> = Vec::new();

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2; // header is line 1
        if record.len() != 4 {
            return Err(Error::Data(format!("line {line}: expected 4 fields")));
        }
        let gene = record[0].to_string();
        let replicate: i64 = record[1]
            .parse()
            .map_err(|_| Error::Data(format!("line {line}: replicate '{}' is not an integer", &record[1])))?;
        let time: i64 = record[2]
            .parse()
            .map_err(|_| Error::Data(format!("line {line}: time '{}' is not an integer", &record[2])))?;
        let value: f64 = record[3]
            .parse()
            .map_err(|_| Error::Data(format!("line {line}: value '{}' is not numeric", &record[3])))?;
        if !value.is_finite() {
            return Err(Error::Data(format!("line {line}: value must be finite")));
        }

        let g = *gene_index.entry(gene.clone()).or_insert_with(|| {
            gene_order.push(gene);
            gene_order.len() - 1
        });
        if cells.insert((g, time, replicate), value).is_some() {
            return Err(Error::Data(format!(
                "duplicate cell gene={} time={time} replicate={replicate}",
                gene_order[g]
            )));
        }
        if !time_labels.contains(&time) {
            time_labels.push(time);
        }
        if !rep_labels.contains(&replicate) {
            rep_labels.push(replicate);
        }
    }

    if gene_order.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    time_labels.sort_unstable();
    rep_labels.sort_unstable();

    let p = gene_order.len();
    let t_len = time_labels.len();
    let n_reps = rep_labels.len();
    let mut replicates = vec![DMatrix::<f64>::zeros(p, t_len); n_reps];
    for (g, gene) in gene_order.iter().enumerate() {
        for (ti, &time) in time_labels.iter().enumerate() {
            for (ri, &rep) in rep_labels.iter().enumerate() {
                match cells.get(&(g, time, rep)) {
                    Some(&v) => replicates[ri][(g, ti)] = v,
                    None => {
                        return Err(Error::Data(format!(
                            "missing cell gene={gene} time={time} replicate={rep}"
                        )))
                    }
                }
            }
        }
    }

    ExpressionDataset::new(gene_order, replicates)
}

/// Writes the long-format CSV with 1-based replicate and time labels.
pub fn write_csv(dataset: &ExpressionDataset, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "gene,replicate,time,value")?;
    for (g, gene) in dataset.gene_names().iter().enumerate() {
        for r in 0..dataset.n_reps() {
            for t in 0..dataset.t_len() {
                writeln!(w, "{gene},{},{},{}", r + 1, t + 1, dataset.value(g, t, r))?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Parameter JSON documents
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct DimsDoc {
    p: usize,
    k: usize,
}

/// Summary of the fit that produced a parameter document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummaryDoc {
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamsDoc {
    dims: DimsDoc,
    gene_names: Vec<String>,
    /// Row-major k*k.
    f: Vec<f64>,
    /// Row-major k*p.
    a: Vec<f64>,
    /// Row-major p*k.
    z: Vec<f64>,
    /// Row-major p*p.
    b: Vec<f64>,
    sigma2_xi: f64,
    sigma2_eta: f64,
    q0_diag: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitSummaryDoc>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

fn from_row_major(v: &[f64], rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::Data(format!(
            "matrix {what}: expected {} entries, got {}",
            rows * cols,
            v.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, v))
}

/// JSON formatter that emits every float with 10 significant digits.
struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.9e}")
    }
}

/// Writes model parameters (with optional fit summary) as a JSON document
/// with named row-major matrix blocks and a dims header.
pub fn write_params_json(
    params: &ModelParams,
    gene_names: &[String],
    fit: Option<FitSummaryDoc>,
    path: &Path,
) -> Result<()> {
    if gene_names.len() != params.p() {
        return Err(Error::InvalidDims(format!(
            "{} gene names for p = {}",
            gene_names.len(),
            params.p()
        )));
    }
    let doc = ParamsDoc {
        dims: DimsDoc {
            p: params.p(),
            k: params.k(),
        },
        gene_names: gene_names.to_vec(),
        f: row_major(params.f()),
        a: row_major(params.a()),
        z: row_major(params.z()),
        b: row_major(params.b()),
        sigma2_xi: params.sigma2_xi(),
        sigma2_eta: params.sigma2_eta(),
        q0_diag: params.q0_diag().iter().copied().collect(),
        fit,
    };
    let file = std::fs::File::create(path)?;
    let mut ser = serde_json::Serializer::with_formatter(std::io::BufWriter::new(file), SigDigitFormatter);
    doc.serialize(&mut ser)?;
    Ok(())
}

/// Reads a parameter document, returning the parameters and gene names.
pub fn read_params_json(path: &Path) -> Result<(ModelParams, Vec<String>, Option<FitSummaryDoc>)> {
    let file = std::fs::File::open(path)?;
    let doc: ParamsDoc = serde_json::from_reader(std::io::BufReader::new(file))?;
    let (p, k) = (doc.dims.p, doc.dims.k);
    if doc.gene_names.len() != p {
        return Err(Error::Data(format!(
            "{} gene names for p = {p}",
            doc.gene_names.len()
        )));
    }
    if (doc.sigma2_eta - SIGMA2_ETA).abs() > 1e-12 {
        return Err(Error::Data(format!(
            "sigma2_eta must be {SIGMA2_ETA} (identifiability constraint), got {}",
            doc.sigma2_eta
        )));
    }
    let params = ModelParams::new(
        from_row_major(&doc.f, k, k, "F")?,
        from_row_major(&doc.a, k, p, "A")?,
        from_row_major(&doc.z, p, k, "Z")?,
        from_row_major(&doc.b, p, p, "B")?,
        doc.sigma2_xi,
        DVector::from_vec(doc.q0_diag),
    )?;
    Ok((params, doc.gene_names, doc.fit))
}

// ---------------------------------------------------------------------------
// TSV reports
// ---------------------------------------------------------------------------

/// Writes edge decisions as TSV:
/// `source target block estimate lower upper significant`.
pub fn write_edges_tsv(decisions: &[EdgeDecision], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "source\ttarget\tblock\testimate\tlower\tupper\tsignificant")?;
    for d in decisions {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            d.source,
            d.target,
            d.block,
            fmt_sig10(d.estimate),
            fmt_sig10(d.lower),
            fmt_sig10(d.upper),
            d.significant
        )?;
    }
    Ok(())
}

/// Reads an edge TSV produced by [`write_edges_tsv`].
pub fn read_edges_tsv(path: &Path) -> Result<Vec<EdgeTsvRow>> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines();
    let header = lines.next().ok_or_else(|| Error::Data("empty edge file".into()))?;
    if header != "source\ttarget\tblock\testimate\tlower\tupper\tsignificant" {
        return Err(Error::Data(format!("unexpected edge header '{header}'")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(Error::Data(format!("edge line {}: expected 7 fields", i + 2)));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Data(format!("edge line {}: bad {what} '{s}'", i + 2)))
        };
        rows.push(EdgeTsvRow {
            source: fields[0].to_string(),
            target: fields[1].to_string(),
            block: Block::parse(fields[2])?,
            estimate: parse_f(fields[3], "estimate")?,
            lower: parse_f(fields[4], "lower")?,
            upper: parse_f(fields[5], "upper")?,
            significant: match fields[6] {
                "true" => true,
                "false" => false,
                other => {
                    return Err(Error::Data(format!(
                        "edge line {}: bad significant flag '{other}'",
                        i + 2
                    )))
                }
            },
        });
    }
    Ok(rows)
}

/// One parsed row of an edge TSV.
#[derive(Debug, Clone)]
pub struct EdgeTsvRow {
    pub source: String,
    pub target: String,
    pub block: Block,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub significant: bool,
}

/// Writes the selection sweep as TSV:
/// `k loglik param_count aicc converged chosen`.
pub fn write_selection_tsv(report: &SelectionReport, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "k\tloglik\tparam_count\taicc\tconverged\tchosen")?;
    for e in &report.entries {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            e.k,
            fmt_sig10(e.loglik),
            e.param_count,
            fmt_sig10(e.aicc),
            e.converged,
            e.k == report.chosen_k
        )?;
    }
    Ok(())
}

/// Writes recovery metrics as a two-line TSV.
pub fn write_metrics_tsv(metrics: &RecoveryMetrics, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_metrics_to(metrics, &mut w)
}

pub fn write_metrics_to<W: Write>(metrics: &RecoveryMetrics, w: &mut W) -> Result<()> {
    writeln!(w, "tp\tfp\ttn\tfn\ttpr\tfpr\tf1")?;
    writeln!(
        w,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}",
        metrics.true_positives,
        metrics.false_positives,
        metrics.true_negatives,
        metrics.false_negatives,
        fmt_sig10(metrics.tpr),
        fmt_sig10(metrics.fpr),
        fmt_sig10(metrics.f1)
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// DOT export
// ---------------------------------------------------------------------------

fn dot_escape(name: &str) -> String {
    name.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Writes the network as a DOT digraph. Gene nodes are filled circles,
/// regulator nodes empty circles; solid edges are activations (positive
/// estimate), dashed edges repressions.
pub fn write_dot(graph: &NetworkGraph, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "digraph grn {{")?;
    writeln!(w, "  node [shape=circle];")?;
    for node in &graph.nodes {
        if node.is_regulator {
            writeln!(w, "  \"{}\";", dot_escape(&node.name))?;
        } else {
            writeln!(
                w,
                "  \"{}\" [style=filled, fillcolor=lightgray];",
                dot_escape(&node.name)
            )?;
        }
    }
    for edge in &graph.edges {
        let style = if edge.weight >= 0.0 { "solid" } else { "dashed" };
        writeln!(
            w,
            "  \"{}\" -> \"{}\" [style={style}];",
            dot_escape(&edge.source),
            dot_escape(&edge.target)
        )?;
    }
    writeln!(w, "}}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("grnssm-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(format!("{}-{name}", std::process::id()))
    }

    #[test]
    fn csv_round_trip_exact() {
        let ds = ExpressionDataset::new(
            vec!["gA".into(), "gB".into()],
            vec![
                DMatrix::from_row_slice(2, 3, &[0.1, -2.5e-7, 3.0, 1.0 / 3.0, 5.5, -0.0625]),
                DMatrix::from_row_slice(2, 3, &[9.25, 0.0, -1.75, 2.0_f64.sqrt(), -8.125, 4.5]),
            ],
        )
        .unwrap();
        let path = tmp("roundtrip.csv");
        write_csv(&ds, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn csv_small_grid() {
        let path = tmp("small.csv");
        std::fs::write(
            &path,
            "gene,replicate,time,value\ng1,1,1,0.5\ng1,1,2,0.6\ng2,1,1,-0.5\ng2,1,2,-0.6\n",
        )
        .unwrap();
        let ds = read_csv(&path).unwrap();
        assert_eq!((ds.p(), ds.t_len(), ds.n_reps()), (2, 2, 1));
        assert_eq!(ds.gene_names(), &["g1".to_string(), "g2".to_string()]);
        assert_eq!(ds.value(1, 1, 0), -0.6);
    }

    #[test]
    fn csv_missing_cell_names_triple() {
        let path = tmp("missing.csv");
        std::fs::write(
            &path,
            "gene,replicate,time,value\ng1,1,1,0.5\ng1,1,2,0.6\ng2,1,1,-0.5\n",
        )
        .unwrap();
        match read_csv(&path) {
            Err(Error::Data(msg)) => {
                assert!(msg.contains("missing cell gene=g2 time=2 replicate=1"), "{msg}")
            }
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn csv_duplicate_cell_rejected() {
        let path = tmp("dup.csv");
        std::fs::write(
            &path,
            "gene,replicate,time,value\ng1,1,1,0.5\ng1,1,1,0.6\n",
        )
        .unwrap();
        match read_csv(&path) {
            Err(Error::Data(msg)) => assert!(msg.contains("duplicate cell"), "{msg}"),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn csv_non_numeric_rejected() {
        let path = tmp("nonnum.csv");
        std::fs::write(&path, "gene,replicate,time,value\ng1,1,1,abc\n").unwrap();
        match read_csv(&path) {
            Err(Error::Data(msg)) => assert!(msg.contains("not numeric"), "{msg}"),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn params_json_round_trip() {
        let params = ModelParams::new(
            DMatrix::from_row_slice(1, 1, &[0.5]),
            DMatrix::from_row_slice(1, 2, &[0.25, -0.125]),
            DMatrix::from_row_slice(2, 1, &[1.0, -0.5]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.125, 0.5]),
            0.25,
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let names = vec!["x".to_string(), "y".to_string()];
        let path = tmp("params.json");
        write_params_json(
            &params,
            &names,
            Some(FitSummaryDoc {
                loglik: -12.5,
                iterations: 3,
                converged: true,
            }),
            &path,
        )
        .unwrap();
        let (back, back_names, fit) = read_params_json(&path).unwrap();
        assert_eq!(back, params);
        assert_eq!(back_names, names);
        let fit = fit.unwrap();
        assert_eq!(fit.iterations, 3);
        assert!(fit.converged);
    }

    #[test]
    fn edges_tsv_round_trip() {
        let decisions = vec![EdgeDecision {
            row: 0,
            col: 1,
            block: Block::B,
            source: "g2".into(),
            target: "g1".into(),
            estimate: 0.5,
            lower: 0.25,
            upper: 0.75,
            significant: true,
        }];
        let path = tmp("edges.tsv");
        write_edges_tsv(&decisions, &path).unwrap();
        let rows = read_edges_tsv(&path).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].source, "g2");
        assert_eq!(rows[0].block, Block::B);
        assert!(rows[0].significant);
        assert_eq!(rows[0].estimate, 0.5);
    }

    #[test]
    fn sig10_format_is_fixed_width_precision() {
        assert_eq!(fmt_sig10(0.0), "0.000000000e0");
        assert_eq!(fmt_sig10(-1.0 / 3.0), "-3.333333333e-1");
        assert_eq!(fmt_sig10(1e-12), "1.000000000e-12");
    }

    #[test]
    fn dot_marks_regulators_and_repressions() {
        let graph = NetworkGraph {
            nodes: vec![
                crate::NetworkNode { name: "g1".into(), is_regulator: false },
                crate::NetworkNode { name: "TF1".into(), is_regulator: true },
            ],
            edges: vec![
                crate::NetworkEdge {
                    source: "TF1".into(),
                    target: "g1".into(),
                    block: Block::Z,
                    weight: 0.8,
                },
                crate::NetworkEdge {
                    source: "g1".into(),
                    target: "g1".into(),
                    block: Block::B,
                    weight: -0.2,
                },
            ],
        };
        let path = tmp("net.dot");
        write_dot(&graph, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"g1\" [style=filled"));
        assert!(text.contains("  \"TF1\";"));
        assert!(text.contains("\"TF1\" -> \"g1\" [style=solid];"));
        assert!(text.contains("\"g1\" -> \"g1\" [style=dashed];"));
    }
}
