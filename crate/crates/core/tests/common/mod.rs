//! Shared test oracles, independent of the library's recursive
//! implementations.
//!
//! `JointGaussianOracle` builds the explicit joint normal distribution of
//! `(theta_0, ..., theta_T, y_1, ..., y_T)` by propagating the model's
//! linear map from the primitive noise vector, then answers filtering,
//! smoothing, and likelihood queries by direct Gaussian conditioning on
//! the stacked observation vector. Everything here is dense brute force.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use grnssm::{ExpressionDataset, ModelParams, SufficientStats};

/// Mixed absolute/relative closeness check at tolerance `tol`.
pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    let scale = 1.0 + a.abs().max(b.abs());
    assert!(
        (a - b).abs() <= tol * scale,
        "{what}: {a} vs {b} (diff {}, allowed {})",
        (a - b).abs(),
        tol * scale
    );
}

pub fn assert_mat_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64, what: &str) {
    assert_eq!(a.shape(), b.shape(), "{what}: shape mismatch");
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            assert_close(a[(i, j)], b[(i, j)], tol, &format!("{what}[{i},{j}]"));
        }
    }
}

pub fn assert_vec_close(a: &DVector<f64>, b: &DVector<f64>, tol: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length mismatch");
    for i in 0..a.len() {
        assert_close(a[i], b[i], tol, &format!("{what}[{i}]"));
    }
}

/// Smoothed moments as computed by the oracle.
pub struct OracleSmoothed {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    /// `Cov(theta_t, theta_{t-1} | y)`, index t-1, first entry couples t=1 to t=0.
    pub lag_one: Vec<DMatrix<f64>>,
    pub mean0: DVector<f64>,
    pub cov0: DMatrix<f64>,
}

pub struct JointGaussianOracle {
    p: usize,
    k: usize,
    t_len: usize,
    /// Covariance of the stacked vector `[theta_0..theta_T, y_1..y_T]`.
    cov: DMatrix<f64>,
}

impl JointGaussianOracle {
    pub fn new(params: &ModelParams, t_len: usize) -> Self {
        let p = params.p();
        let k = params.k();
        let m = k + t_len * k + t_len * p; // theta_0, all eta, all xi

        // Coefficient rows of each variable w.r.t. the primitive noise
        // vector w = [theta_0, eta_1..eta_T, xi_1..xi_T].
        let mut l_theta: Vec<DMatrix<f64>> = Vec::with_capacity(t_len + 1);
        let mut l_y: Vec<DMatrix<f64>> = Vec::with_capacity(t_len + 1);

        let mut l0 = DMatrix::zeros(k, m);
        for i in 0..k {
            l0[(i, i)] = 1.0;
        }
        l_theta.push(l0);
        l_y.push(DMatrix::zeros(p, m)); // y_0 = 0

        for t in 1..=t_len {
            let mut lt = params.f() * &l_theta[t - 1] + params.a() * &l_y[t - 1];
            let eta_off = k + (t - 1) * k;
            for i in 0..k {
                lt[(i, eta_off + i)] += 1.0;
            }
            let mut ly = params.z() * &lt + params.b() * &l_y[t - 1];
            let xi_off = k + t_len * k + (t - 1) * p;
            for i in 0..p {
                ly[(i, xi_off + i)] += 1.0;
            }
            l_theta.push(lt);
            l_y.push(ly);
        }

        // Stack [theta_0..theta_T, y_1..y_T] and form L D L'.
        let total = k * (t_len + 1) + p * t_len;
        let mut l = DMatrix::zeros(total, m);
        for (t, lt) in l_theta.iter().enumerate() {
            l.view_mut((t * k, 0), (k, m)).copy_from(lt);
        }
        for t in 1..=t_len {
            l.view_mut((k * (t_len + 1) + (t - 1) * p, 0), (p, m))
                .copy_from(&l_y[t]);
        }

        let mut d = DVector::zeros(m);
        for i in 0..k {
            d[i] = params.q0_diag()[i];
        }
        for i in 0..t_len * k {
            d[k + i] = params.sigma2_eta();
        }
        for i in 0..t_len * p {
            d[k + t_len * k + i] = params.sigma2_xi();
        }

        let ld = &l * DMatrix::from_diagonal(&d);
        let cov = &ld * l.transpose();
        JointGaussianOracle { p, k, t_len, cov }
    }

    fn theta_indices(&self, t: usize) -> Vec<usize> {
        (t * self.k..(t + 1) * self.k).collect()
    }

    fn y_indices(&self, t: usize) -> Vec<usize> {
        let base = self.k * (self.t_len + 1) + (t - 1) * self.p;
        (base..base + self.p).collect()
    }

    fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.cov[(rows[i], cols[j])])
    }

    fn stack_y(&self, replicate: &DMatrix<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(self.p * self.t_len);
        for t in 0..self.t_len {
            for i in 0..self.p {
                v[t * self.p + i] = replicate[(i, t)];
            }
        }
        v
    }

    /// Log-density of the stacked observations under their exact joint
    /// normal law.
    pub fn marginal_loglik(&self, replicate: &DMatrix<f64>) -> f64 {
        let idx: Vec<usize> = (1..=self.t_len).flat_map(|t| self.y_indices(t)).collect();
        let sigma = self.submatrix(&idx, &idx);
        let y = self.stack_y(replicate);
        let n = y.len() as f64;
        let chol = sigma.cholesky().expect("observation covariance must be SPD");
        let ln_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let quad = y.dot(&chol.solve(&y));
        -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + ln_det + quad)
    }

    /// Conditional mean and covariance of the variables at `target`
    /// indices given the observations at `given` indices.
    fn condition(
        &self,
        target: &[usize],
        given: &[usize],
        given_values: &DVector<f64>,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let s_tt = self.submatrix(target, target);
        let s_tg = self.submatrix(target, given);
        let s_gg = self.submatrix(given, given);
        let chol = s_gg.cholesky().expect("conditioning covariance must be SPD");
        let w = chol.solve(&s_tg.transpose()); // s_gg^{-1} s_gt
        let mean = w.transpose() * given_values;
        let cov = &s_tt - s_tg * w;
        (mean, cov)
    }

    /// Filtered moments `E[theta_t | y_{1:t}]`, `Var[theta_t | y_{1:t}]`
    /// for t = 1..T.
    pub fn filtered(&self, replicate: &DMatrix<f64>) -> (Vec<DVector<f64>>, Vec<DMatrix<f64>>) {
        let y = self.stack_y(replicate);
        let mut means = Vec::new();
        let mut covs = Vec::new();
        for t in 1..=self.t_len {
            let target = self.theta_indices(t);
            let given: Vec<usize> = (1..=t).flat_map(|s| self.y_indices(s)).collect();
            let values = DVector::from_fn(t * self.p, |i, _| y[i]);
            let (m, v) = self.condition(&target, &given, &values);
            means.push(m);
            covs.push(v);
        }
        (means, covs)
    }

    /// Smoothed moments of all states given the full observation record,
    /// including lag-one cross covariances and the initial state.
    pub fn smoothed(&self, replicate: &DMatrix<f64>) -> OracleSmoothed {
        let y = self.stack_y(replicate);
        let given: Vec<usize> = (1..=self.t_len).flat_map(|s| self.y_indices(s)).collect();
        let target: Vec<usize> = (0..=self.t_len).flat_map(|t| self.theta_indices(t)).collect();
        let (mean_all, cov_all) = self.condition(&target, &given, &y);

        let k = self.k;
        let block_mean = |t: usize| DVector::from_fn(k, |i, _| mean_all[t * k + i]);
        let block_cov = |t1: usize, t2: usize| {
            DMatrix::from_fn(k, k, |i, j| cov_all[(t1 * k + i, t2 * k + j)])
        };

        let mut means = Vec::new();
        let mut covs = Vec::new();
        let mut lag_one = Vec::new();
        for t in 1..=self.t_len {
            means.push(block_mean(t));
            covs.push(block_cov(t, t));
            lag_one.push(block_cov(t, t - 1));
        }
        OracleSmoothed {
            means,
            covs,
            lag_one,
            mean0: block_mean(0),
            cov0: block_cov(0, 0),
        }
    }

    /// Sufficient statistics for one replicate accumulated directly from
    /// the oracle's smoothed moments.
    pub fn sufficient_stats(&self, replicate: &DMatrix<f64>) -> SufficientStats {
        let sm = self.smoothed(replicate);
        let mut s = SufficientStats::zeros(self.p, self.k);
        let mut y_prev = DVector::<f64>::zeros(self.p);
        for t in 0..self.t_len {
            let y_t = replicate.column(t).into_owned();
            let m_t = &sm.means[t];
            let v_t = &sm.covs[t];
            let (m_prev, v_prev) = if t == 0 {
                (&sm.mean0, &sm.cov0)
            } else {
                (&sm.means[t - 1], &sm.covs[t - 1])
            };
            s.s_tt += v_t + m_t * m_t.transpose();
            s.s_t += m_t;
            s.s_yt += &y_t * m_t.transpose();
            s.s_t_ylag += m_t * y_prev.transpose();
            s.s_y_ylag += &y_t * y_prev.transpose();
            s.s_ylag_ylag += &y_prev * y_prev.transpose();
            s.s_yy += &y_t * y_t.transpose();
            s.s_t_tlag += &sm.lag_one[t] + m_t * m_prev.transpose();
            s.s_tlag_tlag += v_prev + m_prev * m_prev.transpose();
            s.s_tlag_ylag += m_prev * y_prev.transpose();
            s.count += 1;
            y_prev = y_t;
        }
        s
    }
}

/// Random model parameters with entries bounded away from instability,
/// suitable for short-horizon exactness checks.
pub fn random_params(p: usize, k: usize, rng: &mut StdRng) -> ModelParams {
    let mut entry = |scale: f64| rng.random_range(-scale..scale);
    let f = DMatrix::from_fn(k, k, |_, _| entry(0.8));
    let a = DMatrix::from_fn(k, p, |_, _| entry(0.5));
    let z = DMatrix::from_fn(p, k, |_, _| entry(1.0));
    let b = DMatrix::from_fn(p, p, |_, _| entry(0.6));
    let sigma2_xi = rng.random_range(0.1..2.0);
    let q0 = DVector::from_fn(k, |_, _| rng.random_range(0.5..2.0));
    ModelParams::new(f, a, z, b, sigma2_xi, q0).unwrap()
}

/// Random replicate matrix with entries in [-1, 1].
pub fn random_replicate(p: usize, t_len: usize, rng: &mut StdRng) -> DMatrix<f64> {
    DMatrix::from_fn(p, t_len, |_, _| rng.random_range(-1.0..1.0))
}

pub fn seeded_rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Dataset wrapper around a list of replicate matrices.
pub fn dataset_from_replicates(replicates: Vec<DMatrix<f64>>) -> ExpressionDataset {
    let p = replicates[0].nrows();
    let names = (0..p).map(|i| format!("g{}", i + 1)).collect();
    ExpressionDataset::new(names, replicates).unwrap()
}

/// Direct pooled VAR(1) least squares `B = (sum y_t y_{t-1}') (sum
/// y_{t-1} y_{t-1}')^{-1}` over observed pairs, the k = 0 oracle.
pub fn var1_least_squares(dataset: &ExpressionDataset) -> DMatrix<f64> {
    let p = dataset.p();
    let mut syx = DMatrix::<f64>::zeros(p, p);
    let mut sxx = DMatrix::<f64>::zeros(p, p);
    for rep in dataset.replicates() {
        for t in 1..rep.ncols() {
            let y_t = rep.column(t);
            let y_prev = rep.column(t - 1);
            syx += y_t * y_prev.transpose();
            sxx += y_prev * y_prev.transpose();
        }
    }
    syx * sxx.try_inverse().expect("lag Gram must be invertible")
}

/// Sequential projection-form M-step: eliminate the companion coefficient
/// first via the Schur complement, then back-substitute. An independent
/// algebraic route to the same normal-equation solution as the block solve.
pub struct ProjectionMstep {
    pub z: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

pub fn mstep_projection_oracle(stats: &SufficientStats) -> ProjectionMstep {
    let inv = |m: &DMatrix<f64>| m.clone().try_inverse().expect("oracle inverse");

    // Observation pair: B from the theta-projected system, then Z.
    let s_tt_inv = inv(&stats.s_tt);
    let ylag_t = stats.s_t_ylag.transpose(); // sum y_{t-1} E[theta_t]'
    let b_lhs = &stats.s_ylag_ylag - &ylag_t * &s_tt_inv * &stats.s_t_ylag;
    let b_rhs = &stats.s_y_ylag - &stats.s_yt * &s_tt_inv * &stats.s_t_ylag;
    let b = &b_rhs * inv(&b_lhs);
    let z = (&stats.s_yt - &b * &ylag_t) * &s_tt_inv;

    // State pair: A from the lagged-theta-projected system, then F.
    let s_ll_inv = inv(&stats.s_tlag_tlag);
    let ylag_tlag = stats.s_tlag_ylag.transpose(); // sum y_{t-1} E[theta_{t-1}]'
    let a_lhs = &stats.s_ylag_ylag - &ylag_tlag * &s_ll_inv * &stats.s_tlag_ylag;
    let a_rhs = &stats.s_t_ylag - &stats.s_t_tlag * &s_ll_inv * &stats.s_tlag_ylag;
    let a = &a_rhs * inv(&a_lhs);
    let f = (&stats.s_t_tlag - &a * &ylag_tlag) * &s_ll_inv;

    ProjectionMstep { z, b, f, a }
}
