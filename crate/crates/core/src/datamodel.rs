//! Core data types and dimension bookkeeping.
//!
//! The model couples a k-dimensional hidden regulator state to p observed
//! genes:
//!
//! ```text
//! theta[t] = F theta[t-1] + A y[t-1] + eta[t]      eta ~ N(0, I_k)
//! y[t]     = Z theta[t]   + B y[t-1] + xi[t]       xi  ~ N(0, sigma2_xi I_p)
//! ```
//!
//! with `theta[0] ~ N(0, Q0)` and the convention `y[0] = 0`. The four
//! interaction blocks assemble into the `(p+k) x (p+k)` genomic graph
//! matrix `G = [[B, Z], [A, F]]` whose entry `(i, j)` reads "column j
//! influences row i".

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// State noise variance, pinned to 1 so the hidden-state scale is identified.
pub const SIGMA2_ETA: f64 = 1.0;

/// Lower bound on the observation noise variance; keeps the filter
/// well-posed on noiseless synthetic data.
pub const SIGMA2_XI_FLOOR: f64 = 1e-12;

/// Problem dimensions: `p` genes observed at `T` time points over `n_R`
/// replicates, with a `k`-dimensional hidden state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    p: usize,
    k: usize,
    t_len: usize,
    n_reps: usize,
}

impl Dims {
    /// Validates counts and the feasibility bound
    /// `p*T*n_R > p^2 + 2kp + k^2` (strictly more observations than
    /// estimated parameters).
    pub fn new(p: usize, k: usize, t_len: usize, n_reps: usize) -> Result<Self> {
        if p < 1 {
            return Err(Error::InvalidDims("p must be >= 1".into()));
        }
        if t_len < 2 {
            return Err(Error::InvalidDims("T must be >= 2".into()));
        }
        if n_reps < 1 {
            return Err(Error::InvalidDims("n_R must be >= 1".into()));
        }
        let dims = Dims { p, k, t_len, n_reps };
        if !dims.is_feasible() {
            return Err(Error::Infeasible(format!(
                "p*T*n_R = {} must exceed the parameter count {} (p={p}, k={k})",
                dims.n_obs(),
                param_count(p, k),
            )));
        }
        Ok(dims)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn n_reps(&self) -> usize {
        self.n_reps
    }

    /// Total scalar observations `N = p * T * n_R`.
    pub fn n_obs(&self) -> u64 {
        self.p as u64 * self.t_len as u64 * self.n_reps as u64
    }

    fn is_feasible(&self) -> bool {
        // Equivalent to param_count < N; both sides exact in u128.
        let n = self.p as u128 * self.t_len as u128 * self.n_reps as u128;
        let pk = self.p as u128 + self.k as u128;
        pk * pk < n
    }
}

/// Number of free interaction parameters `P = p^2 + 2kp + k^2 = (p+k)^2`,
/// i.e. every entry of the genomic graph matrix.
pub fn param_count(p: usize, k: usize) -> u64 {
    let pk = p as u64 + k as u64;
    pk * pk
}

/// Largest hidden dimension `k` satisfying the strict feasibility bound
/// `0 <= k < -p + sqrt(p*T*n_R)`, or an error when even `k = 0` fails.
pub fn max_hidden_k(p: usize, t_len: usize, n_reps: usize) -> Result<usize> {
    if p < 1 || t_len < 1 || n_reps < 1 {
        return Err(Error::InvalidDims("p, T, n_R must all be >= 1".into()));
    }
    let n = p as u128 * t_len as u128 * n_reps as u128;
    // Largest s with s^2 < N, found without floating point.
    let s = isqrt(n.saturating_sub(1));
    let s = s as i128 - p as i128;
    if s < 0 {
        Err(Error::Infeasible(format!(
            "no hidden dimension is feasible for p={p}, T={t_len}, n_R={n_reps}"
        )))
    } else {
        Ok(s as usize)
    }
}

fn isqrt(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    // Float seed can be off by one in either direction.
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

/// Replicated time-course expression data: `p` named genes observed at
/// `T` time points in each of `n_R` replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionDataset {
    gene_names: Vec<String>,
    /// One `p x T` matrix per replicate; column `t` holds `y[t+1]`.
    replicates: Vec<DMatrix<f64>>,
}

impl ExpressionDataset {
    pub fn new(gene_names: Vec<String>, replicates: Vec<DMatrix<f64>>) -> Result<Self> {
        let p = gene_names.len();
        if p == 0 {
            return Err(Error::InvalidDims("at least one gene required".into()));
        }
        if replicates.is_empty() {
            return Err(Error::InvalidDims("at least one replicate required".into()));
        }
        let t_len = replicates[0].ncols();
        if t_len < 2 {
            return Err(Error::InvalidDims("T must be >= 2".into()));
        }
        for (r, rep) in replicates.iter().enumerate() {
            if rep.nrows() != p || rep.ncols() != t_len {
                return Err(Error::InvalidDims(format!(
                    "replicate {} has shape {}x{}, expected {}x{}",
                    r + 1,
                    rep.nrows(),
                    rep.ncols(),
                    p,
                    t_len
                )));
            }
            if rep.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "replicate {} contains a non-finite value",
                    r + 1
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for name in &gene_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Data(format!("duplicate gene name '{name}'")));
            }
        }
        Ok(ExpressionDataset {
            gene_names,
            replicates,
        })
    }

    pub fn p(&self) -> usize {
        self.gene_names.len()
    }

    pub fn t_len(&self) -> usize {
        self.replicates[0].ncols()
    }

    pub fn n_reps(&self) -> usize {
        self.replicates.len()
    }

    pub fn gene_names(&self) -> &[String] {
        &self.gene_names
    }

    pub fn replicate(&self, r: usize) -> &DMatrix<f64> {
        &self.replicates[r]
    }

    pub fn replicates(&self) -> &[DMatrix<f64>] {
        &self.replicates
    }

    /// Value for `gene` (0-based) at `time` (0-based) in `replicate` (0-based).
    pub fn value(&self, gene: usize, time: usize, replicate: usize) -> f64 {
        self.replicates[replicate][(gene, time)]
    }

    /// Dimensions with the given hidden-state size, checking feasibility.
    pub fn dims_with_k(&self, k: usize) -> Result<Dims> {
        Dims::new(self.p(), k, self.t_len(), self.n_reps())
    }

    /// New dataset holding the given replicate indices (with repetition).
    pub fn select_replicates(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidDims("at least one replicate required".into()));
        }
        let replicates = indices
            .iter()
            .map(|&r| self.replicates[r].clone())
            .collect();
        Ok(ExpressionDataset {
            gene_names: self.gene_names.clone(),
            replicates,
        })
    }
}

/// Model interaction parameters and noise configuration.
///
/// `F` (k×k) is the hidden-state transition, `A` (k×p) the lag-1 gene-to-
/// state feedback, `Z` (p×k) the instantaneous state-to-gene loading,
/// `B` (p×p) the lag-1 gene-to-gene interaction. The state noise variance
/// is fixed at [`SIGMA2_ETA`] and the initial-state law is
/// `N(0, diag(q0_diag))`; only `sigma2_xi` among the variances is free.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    f: DMatrix<f64>,
    a: DMatrix<f64>,
    z: DMatrix<f64>,
    b: DMatrix<f64>,
    sigma2_xi: f64,
    q0_diag: DVector<f64>,
}

impl ModelParams {
    pub fn new(
        f: DMatrix<f64>,
        a: DMatrix<f64>,
        z: DMatrix<f64>,
        b: DMatrix<f64>,
        sigma2_xi: f64,
        q0_diag: DVector<f64>,
    ) -> Result<Self> {
        let p = b.nrows();
        let k = f.nrows();
        if b.ncols() != p || p == 0 {
            return Err(Error::InvalidDims("B must be square p x p with p >= 1".into()));
        }
        if f.ncols() != k {
            return Err(Error::InvalidDims("F must be square k x k".into()));
        }
        if a.nrows() != k || a.ncols() != p {
            return Err(Error::InvalidDims("A must be k x p".into()));
        }
        if z.nrows() != p || z.ncols() != k {
            return Err(Error::InvalidDims("Z must be p x k".into()));
        }
        if q0_diag.len() != k {
            return Err(Error::InvalidDims("Q0 diagonal must have length k".into()));
        }
        if !(sigma2_xi.is_finite() && sigma2_xi > 0.0) {
            return Err(Error::InvalidDims("sigma2_xi must be finite and > 0".into()));
        }
        if q0_diag.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidDims("Q0 diagonal entries must be finite and > 0".into()));
        }
        for (name, m) in [("F", &f), ("A", &a), ("Z", &z), ("B", &b)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("matrix {name} contains a non-finite value")));
            }
        }
        Ok(ModelParams {
            f,
            a,
            z,
            b,
            sigma2_xi,
            q0_diag,
        })
    }

    /// All-zero interaction blocks with unit noise and `Q0 = I`.
    pub fn zeros(p: usize, k: usize) -> Result<Self> {
        ModelParams::new(
            DMatrix::zeros(k, k),
            DMatrix::zeros(k, p),
            DMatrix::zeros(p, k),
            DMatrix::zeros(p, p),
            1.0,
            DVector::from_element(k, 1.0),
        )
    }

    pub fn p(&self) -> usize {
        self.b.nrows()
    }

    pub fn k(&self) -> usize {
        self.f.nrows()
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn sigma2_xi(&self) -> f64 {
        self.sigma2_xi
    }

    pub fn sigma2_eta(&self) -> f64 {
        SIGMA2_ETA
    }

    pub fn q0_diag(&self) -> &DVector<f64> {
        &self.q0_diag
    }

    pub fn q0_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.q0_diag)
    }

    /// Initial state mean, fixed at the origin.
    pub fn a0(&self) -> DVector<f64> {
        DVector::zeros(self.k())
    }
}

/// Which block of the genomic graph matrix an entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    /// Gene -> gene, lag 1.
    B,
    /// Hidden regulator -> gene, instantaneous.
    Z,
    /// Gene -> hidden regulator, lag 1.
    A,
    /// Hidden regulator -> hidden regulator, lag 1.
    F,
}

impl Block {
    pub fn label(&self) -> &'static str {
        match self {
            Block::B => "B",
            Block::Z => "Z",
            Block::A => "A",
            Block::F => "F",
        }
    }

    pub fn parse(s: &str) -> Result<Block> {
        match s {
            "B" | "b" => Ok(Block::B),
            "Z" | "z" => Ok(Block::Z),
            "A" | "a" => Ok(Block::A),
            "F" | "f" => Ok(Block::F),
            other => Err(Error::Data(format!("unknown block '{other}'"))),
        }
    }
}

impl std::fmt::Display for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// The `(p+k) x (p+k)` genomic graph matrix `G = [[B, Z], [A, F]]`.
///
/// Rows/columns `0..p` index genes, `p..p+k` index hidden regulators.
#[derive(Debug, Clone, PartialEq)]
pub struct GenomicGraphMatrix {
    g: DMatrix<f64>,
    p: usize,
    k: usize,
}

impl GenomicGraphMatrix {
    pub fn from_params(params: &ModelParams) -> Self {
        let (p, k) = (params.p(), params.k());
        let mut g = DMatrix::zeros(p + k, p + k);
        g.view_mut((0, 0), (p, p)).copy_from(params.b());
        g.view_mut((0, p), (p, k)).copy_from(params.z());
        g.view_mut((p, 0), (k, p)).copy_from(params.a());
        g.view_mut((p, p), (k, k)).copy_from(params.f());
        GenomicGraphMatrix { g, p, k }
    }

    /// Wraps an already-assembled matrix; shape must be `(p+k) x (p+k)`.
    pub fn from_matrix(g: DMatrix<f64>, p: usize, k: usize) -> Result<Self> {
        if g.nrows() != p + k || g.ncols() != p + k {
            return Err(Error::InvalidDims(format!(
                "graph matrix must be {0}x{0}, got {1}x{2}",
                p + k,
                g.nrows(),
                g.ncols()
            )));
        }
        Ok(GenomicGraphMatrix { g, p, k })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn size(&self) -> usize {
        self.p + self.k
    }

    /// Recovers the four blocks as `(B, Z, A, F)`.
    pub fn blocks(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let (p, k) = (self.p, self.k);
        (
            self.g.view((0, 0), (p, p)).into_owned(),
            self.g.view((0, p), (p, k)).into_owned(),
            self.g.view((p, 0), (k, p)).into_owned(),
            self.g.view((p, p), (k, k)).into_owned(),
        )
    }

    /// Block containing entry `(row, col)`.
    pub fn block_of(&self, row: usize, col: usize) -> Block {
        match (row < self.p, col < self.p) {
            (true, true) => Block::B,
            (true, false) => Block::Z,
            (false, true) => Block::A,
            (false, false) => Block::F,
        }
    }

    /// Boolean mask of structurally nonzero entries.
    pub fn nonzero_mask(&self) -> DMatrix<bool> {
        self.g.map(|v| v != 0.0)
    }
}

/// Assembles the genomic graph matrix from model parameters.
pub fn assemble_graph_matrix(params: &ModelParams) -> GenomicGraphMatrix {
    GenomicGraphMatrix::from_params(params)
}
