//! Hidden-state label alignment across independent fits.
//!
//! The hidden block of the model is only identified up to signed
//! permutation of the state coordinates, so parameters from separate EM
//! runs cannot be compared entrywise until their state labels agree.
//! Alignment picks the column permutation and signs of the loading matrix
//! `Z` that maximize total absolute correlation with a reference loading,
//! solved exactly as an assignment problem.

use nalgebra::DMatrix;

use crate::datamodel::GenomicGraphMatrix;

/// Signed permutation taking a sample's hidden coordinates onto the
/// reference's: aligned coordinate `i` is `signs[i]` times the sample
/// coordinate `perm[i]`.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub perm: Vec<usize>,
    pub signs: Vec<f64>,
}

impl Alignment {
    pub fn identity(k: usize) -> Self {
        Alignment {
            perm: (0..k).collect(),
            signs: vec![1.0; k],
        }
    }
}

fn column_correlation(a: &DMatrix<f64>, ca: usize, b: &DMatrix<f64>, cb: usize) -> (f64, f64) {
    let n = a.nrows() as f64;
    let mean_a = a.column(ca).sum() / n;
    let mean_b = b.column(cb).sum() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    let mut dot = 0.0;
    for i in 0..a.nrows() {
        let da = a[(i, ca)] - mean_a;
        let db = b[(i, cb)] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
        dot += a[(i, ca)] * b[(i, cb)];
    }
    let corr = if var_a > 0.0 && var_b > 0.0 {
        cov / (var_a.sqrt() * var_b.sqrt())
    } else {
        0.0
    };
    // Fallback orientation for degenerate (constant) columns.
    let sign = if corr != 0.0 {
        corr.signum()
    } else if dot != 0.0 {
        dot.signum()
    } else {
        1.0
    };
    (corr, sign)
}

/// Minimum-cost assignment on a square cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Returns the column assigned to each row.
pub(crate) fn hungarian_min(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment requires a square cost matrix");
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; p[j] is the row matched to column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    row_to_col
}

/// Alignment of `sample_z`'s columns onto `reference_z`'s by maximizing
/// the total absolute column correlation.
pub fn align_loadings(reference_z: &DMatrix<f64>, sample_z: &DMatrix<f64>) -> Alignment {
    let k = reference_z.ncols();
    assert_eq!(k, sample_z.ncols());
    if k == 0 {
        return Alignment::identity(0);
    }
    let mut corr = DMatrix::zeros(k, k);
    let mut sign = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let (c, s) = column_correlation(reference_z, i, sample_z, j);
            corr[(i, j)] = c;
            sign[(i, j)] = s;
        }
    }
    let cost = corr.map(|c| -c.abs());
    let perm = hungarian_min(&cost);
    let signs = (0..k).map(|i| sign[(i, perm[i])]).collect();
    Alignment { perm, signs }
}

/// Applies a signed permutation of the hidden coordinates to a graph
/// matrix: `B` is untouched, `Z` columns, `A` rows, and both axes of `F`
/// are relabeled.
pub fn apply_alignment(g: &GenomicGraphMatrix, alignment: &Alignment) -> GenomicGraphMatrix {
    let (p, k) = (g.p(), g.k());
    assert_eq!(alignment.perm.len(), k);
    let (b, z, a, f) = g.blocks();
    let mut out = DMatrix::zeros(p + k, p + k);
    out.view_mut((0, 0), (p, p)).copy_from(&b);
    for i in 0..k {
        let (pi, si) = (alignment.perm[i], alignment.signs[i]);
        for r in 0..p {
            out[(r, p + i)] = si * z[(r, pi)];
        }
        for c in 0..p {
            out[(p + i, c)] = si * a[(pi, c)];
        }
        for j in 0..k {
            let (pj, sj) = (alignment.perm[j], alignment.signs[j]);
            out[(p + i, p + j)] = si * sj * f[(pi, pj)];
        }
    }
    GenomicGraphMatrix::from_matrix(out, p, k).expect("shape preserved")
}
