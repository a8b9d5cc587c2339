//! Maximum-likelihood estimation of the interaction parameters by EM:
//! a Kalman-smoothing E-step accumulates expected cross-products, and a
//! closed-form M-step solves the block normal equations for the
//! observation pair `(Z, B)` and the state pair `(F, A)`.
//!
//! The E-step uses full second moments `E[theta theta'] = V + m m'` and
//! lag-one covariances, so each M-step is the exact maximizer of the
//! expected complete-data log-likelihood and the marginal log-likelihood
//! is non-decreasing across iterations.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::datamodel::{Dims, ExpressionDataset, ModelParams, SIGMA2_XI_FLOOR};
use crate::error::{Error, Result};
use crate::kalman;

/// Slack allowed on the EM monotonicity check; a larger decrease in the
/// marginal log-likelihood indicates an M-step bug and is reported as an
/// internal numerical error.
pub const MONOTONICITY_SLACK: f64 = 1e-8;

/// Expected cross-products accumulated over replicates and time.
///
/// All sums run over t = 1..T within each replicate, with `y_0 = 0` and
/// the lagged state at t = 1 being the smoothed `theta_0`.
#[derive(Debug, Clone)]
pub struct SufficientStats {
    /// `sum E[theta_t theta_t']` (k x k).
    pub s_tt: DMatrix<f64>,
    /// `sum E[theta_t]` (k).
    pub s_t: DVector<f64>,
    /// `sum y_t E[theta_t]'` (p x k).
    pub s_yt: DMatrix<f64>,
    /// `sum E[theta_t] y_{t-1}'` (k x p).
    pub s_t_ylag: DMatrix<f64>,
    /// `sum y_t y_{t-1}'` (p x p).
    pub s_y_ylag: DMatrix<f64>,
    /// `sum y_{t-1} y_{t-1}'` (p x p).
    pub s_ylag_ylag: DMatrix<f64>,
    /// `sum y_t y_t'` (p x p).
    pub s_yy: DMatrix<f64>,
    /// `sum E[theta_t theta_{t-1}']` (k x k).
    pub s_t_tlag: DMatrix<f64>,
    /// `sum E[theta_{t-1} theta_{t-1}']` (k x k).
    pub s_tlag_tlag: DMatrix<f64>,
    /// `sum E[theta_{t-1}] y_{t-1}'` (k x p).
    pub s_tlag_ylag: DMatrix<f64>,
    /// Total number of observation terms (T * n_R).
    pub count: usize,
}

impl SufficientStats {
    pub fn zeros(p: usize, k: usize) -> Self {
        SufficientStats {
            s_tt: DMatrix::zeros(k, k),
            s_t: DVector::zeros(k),
            s_yt: DMatrix::zeros(p, k),
            s_t_ylag: DMatrix::zeros(k, p),
            s_y_ylag: DMatrix::zeros(p, p),
            s_ylag_ylag: DMatrix::zeros(p, p),
            s_yy: DMatrix::zeros(p, p),
            s_t_tlag: DMatrix::zeros(k, k),
            s_tlag_tlag: DMatrix::zeros(k, k),
            s_tlag_ylag: DMatrix::zeros(k, p),
            count: 0,
        }
    }

    pub fn p(&self) -> usize {
        self.s_yy.nrows()
    }

    pub fn k(&self) -> usize {
        self.s_tt.nrows()
    }

    /// Gram matrix of the stacked observation-equation regressor
    /// `[theta_t; y_{t-1}]`.
    fn obs_gram(&self) -> DMatrix<f64> {
        let (p, k) = (self.p(), self.k());
        let mut g = DMatrix::zeros(k + p, k + p);
        g.view_mut((0, 0), (k, k)).copy_from(&self.s_tt);
        g.view_mut((0, k), (k, p)).copy_from(&self.s_t_ylag);
        g.view_mut((k, 0), (p, k)).copy_from(&self.s_t_ylag.transpose());
        g.view_mut((k, k), (p, p)).copy_from(&self.s_ylag_ylag);
        g
    }

    /// Cross moments `sum E[y_t [theta_t; y_{t-1}]']`.
    fn obs_cross(&self) -> DMatrix<f64> {
        let (p, k) = (self.p(), self.k());
        let mut c = DMatrix::zeros(p, k + p);
        c.view_mut((0, 0), (p, k)).copy_from(&self.s_yt);
        c.view_mut((0, k), (p, p)).copy_from(&self.s_y_ylag);
        c
    }

    /// Gram matrix of the stacked state-equation regressor
    /// `[theta_{t-1}; y_{t-1}]`.
    fn state_gram(&self) -> DMatrix<f64> {
        let (p, k) = (self.p(), self.k());
        let mut g = DMatrix::zeros(k + p, k + p);
        g.view_mut((0, 0), (k, k)).copy_from(&self.s_tlag_tlag);
        g.view_mut((0, k), (k, p)).copy_from(&self.s_tlag_ylag);
        g.view_mut((k, 0), (p, k)).copy_from(&self.s_tlag_ylag.transpose());
        g.view_mut((k, k), (p, p)).copy_from(&self.s_ylag_ylag);
        g
    }

    /// Cross moments `sum E[theta_t [theta_{t-1}; y_{t-1}]']`.
    fn state_cross(&self) -> DMatrix<f64> {
        let (p, k) = (self.p(), self.k());
        let mut c = DMatrix::zeros(k, k + p);
        c.view_mut((0, 0), (k, k)).copy_from(&self.s_t_tlag);
        c.view_mut((0, k), (k, p)).copy_from(&self.s_t_ylag);
        c
    }
}

/// One EM run: final parameters, per-iteration marginal log-likelihoods,
/// and whether the relative-change stopping rule fired.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParams,
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace never empty")
    }
}

/// EM configuration. `seed` feeds the orchestration layers (bootstrap,
/// selection); the fit itself is deterministic in the data.
#[derive(Debug, Clone, Copy)]
pub struct FitConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iter: 500,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// Starting parameters: `F = I`, `Z` the rectangular identity, `A = 0`,
/// `B` diagonal from gene-wise lag-1 least squares pooled over replicates,
/// and `sigma2_xi` the mean residual variance of that regression.
pub fn init(dataset: &ExpressionDataset, k: usize) -> Result<ModelParams> {
    let dims = dataset.dims_with_k(k)?;
    let p = dims.p();
    let t_len = dims.t_len();
    if t_len < 2 {
        return Err(Error::Data("lag regression needs at least 2 time points".into()));
    }

    // Per-gene regression of y_t on y_{t-1} over observed pairs (t >= 2).
    let mut b_diag = DVector::<f64>::zeros(p);
    let mut rss = 0.0;
    let mut n_pairs = 0usize;
    for g in 0..p {
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        for rep in dataset.replicates() {
            for t in 1..t_len {
                sxy += rep[(g, t)] * rep[(g, t - 1)];
                sxx += rep[(g, t - 1)] * rep[(g, t - 1)];
            }
        }
        b_diag[g] = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    }
    for g in 0..p {
        for rep in dataset.replicates() {
            for t in 1..t_len {
                let r = rep[(g, t)] - b_diag[g] * rep[(g, t - 1)];
                rss += r * r;
                n_pairs += 1;
            }
        }
    }
    let sigma2_xi = (rss / n_pairs as f64).max(SIGMA2_XI_FLOOR);

    let mut z = DMatrix::zeros(p, k);
    for i in 0..p.min(k) {
        z[(i, i)] = 1.0;
    }
    ModelParams::new(
        DMatrix::identity(k, k),
        DMatrix::zeros(k, p),
        z,
        DMatrix::from_diagonal(&b_diag),
        sigma2_xi,
        DVector::from_element(k, 1.0),
    )
}

/// Replicates stacked side by side: `y[t]` is `p x n_R` with column `r`
/// holding replicate r's observation at time t+1. The mean recursions are
/// linear in the data, so all replicates advance together through dense
/// matrix products.
pub(crate) struct BatchedData {
    y: Vec<DMatrix<f64>>,
    p: usize,
    t_len: usize,
    n_reps: usize,
}

impl BatchedData {
    pub(crate) fn new(dataset: &ExpressionDataset) -> Self {
        let (p, t_len, n_reps) = (dataset.p(), dataset.t_len(), dataset.n_reps());
        let y = (0..t_len)
            .map(|t| {
                DMatrix::from_fn(p, n_reps, |i, r| dataset.replicate(r)[(i, t)])
            })
            .collect();
        BatchedData { y, p, t_len, n_reps }
    }
}

const LN_2PI: f64 = 1.8378770664093453;

fn estep_batched(params: &ModelParams, data: &BatchedData) -> Result<(SufficientStats, f64)> {
    let p = data.p;
    let k = params.k();
    let t_len = data.t_len;
    let n_r = data.n_reps;

    let cov = kalman::covariance_pass(params, t_len)?;
    let smo = kalman::smoother_cov_pass(params, &cov)?;

    // Forward mean recursion over all replicates at once.
    let zeros_y = DMatrix::<f64>::zeros(p, n_r);
    let mut x_filt = DMatrix::<f64>::zeros(k, n_r);
    let mut preds: Vec<DMatrix<f64>> = Vec::with_capacity(t_len);
    let mut filts: Vec<DMatrix<f64>> = Vec::with_capacity(t_len);
    let mut quad_sum = 0.0;
    for t in 0..t_len {
        let y_lag = if t == 0 { &zeros_y } else { &data.y[t - 1] };
        let x_pred = params.f() * &x_filt + params.a() * y_lag;
        let innov = &data.y[t] - params.z() * &x_pred - params.b() * y_lag;
        let s_inv_innov = cov.innovation_chols[t].solve(&innov);
        quad_sum += innov.component_mul(&s_inv_innov).sum();
        x_filt = &x_pred + &cov.gains[t] * &innov;
        preds.push(x_pred);
        filts.push(x_filt.clone());
    }
    let loglik = -0.5
        * (n_r as f64 * (t_len as f64 * p as f64 * LN_2PI + cov.ln_det_total) + quad_sum);
    if !loglik.is_finite() {
        return Err(Error::Numerical("E-step log-likelihood is not finite".into()));
    }

    // Backward mean recursion.
    let mut means = filts.clone();
    for t in (0..t_len - 1).rev() {
        let dm = &means[t + 1] - &preds[t + 1];
        means[t] = &filts[t] + &smo.gains[t + 1] * dm;
    }
    let mean0 = &smo.gains[0] * (&means[0] - &preds[0]);

    // Mean-dependent cross products, one set of dense products per step.
    let mut stats = SufficientStats::zeros(p, k);
    let ones = DVector::<f64>::from_element(n_r, 1.0);
    for t in 0..t_len {
        let y_t = &data.y[t];
        let y_lag = if t == 0 { &zeros_y } else { &data.y[t - 1] };
        let m_t = &means[t];
        let m_prev = if t == 0 { &mean0 } else { &means[t - 1] };

        stats.s_tt += m_t * m_t.transpose();
        stats.s_t += m_t * &ones;
        stats.s_yt += y_t * m_t.transpose();
        stats.s_t_ylag += m_t * y_lag.transpose();
        stats.s_y_ylag += y_t * y_lag.transpose();
        stats.s_ylag_ylag += y_lag * y_lag.transpose();
        stats.s_yy += y_t * y_t.transpose();
        stats.s_t_tlag += m_t * m_prev.transpose();
        stats.s_tlag_tlag += m_prev * m_prev.transpose();
        stats.s_tlag_ylag += m_prev * y_lag.transpose();
        stats.count += n_r;
    }

    // Shared covariance contributions, identical for every replicate.
    let mut sum_v = DMatrix::<f64>::zeros(k, k);
    let mut sum_lag = DMatrix::<f64>::zeros(k, k);
    let mut sum_v_prev = smo.cov0.clone();
    for t in 0..t_len {
        sum_v += &smo.covs[t];
        sum_lag += &smo.lag_one[t];
        if t + 1 < t_len {
            sum_v_prev += &smo.covs[t];
        }
    }
    let scale = n_r as f64;
    stats.s_tt += sum_v * scale;
    stats.s_t_tlag += sum_lag * scale;
    stats.s_tlag_tlag += sum_v_prev * scale;

    Ok((stats, loglik))
}

/// E-step: runs the smoother over every replicate and accumulates the
/// sufficient statistics, returning them with the marginal log-likelihood
/// at the current parameters.
pub fn estep(params: &ModelParams, dataset: &ExpressionDataset) -> Result<(SufficientStats, f64)> {
    if params.p() != dataset.p() {
        return Err(Error::InvalidDims(format!(
            "params have p = {}, dataset has p = {}",
            params.p(),
            dataset.p()
        )));
    }
    estep_batched(params, &BatchedData::new(dataset))
}

fn solve_normal_equations(gram: &DMatrix<f64>, cross: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if gram.nrows() == 0 {
        return Ok(DMatrix::zeros(cross.nrows(), 0));
    }
    let chol = Cholesky::new(gram.clone()).ok_or_else(|| {
        Error::Numerical(format!(
            "singular block Gram matrix in the {what} normal equations (collinear states or data)"
        ))
    })?;
    Ok(chol.solve(&cross.transpose()).transpose())
}

/// Expected residual sum of squares `sum E||y_t - C x_t||^2` for a
/// coefficient matrix `C` against regressor second moments.
fn expected_rss(total_sq: f64, coeff: &DMatrix<f64>, cross: &DMatrix<f64>, gram: &DMatrix<f64>) -> f64 {
    total_sq - 2.0 * (coeff * cross.transpose()).trace() + (coeff * gram * coeff.transpose()).trace()
}

/// M-step: exact maximizer of the expected complete-data log-likelihood.
///
/// Solves `[Z B] * Gram_obs = [S_yt S_y_ylag]` for the observation pair and
/// the analogous system for `[F A]`, then updates `sigma2_xi` as the
/// expected observation residual sum of squares over `p * count`. Returns
/// parameters with `Q0 = I` (fixed, never re-estimated).
pub fn mstep(stats: &SufficientStats, dims: &Dims) -> Result<ModelParams> {
    let p = dims.p();
    let k = dims.k();
    if stats.p() != p || stats.k() != k {
        return Err(Error::InvalidDims("stats shape does not match dims".into()));
    }

    let obs_gram = stats.obs_gram();
    let obs_cross = stats.obs_cross();
    let zb = solve_normal_equations(&obs_gram, &obs_cross, "observation")?;
    let z = zb.view((0, 0), (p, k)).into_owned();
    let b = zb.view((0, k), (p, p)).into_owned();

    let state_gram = stats.state_gram();
    let state_cross = stats.state_cross();
    let fa = solve_normal_equations(&state_gram, &state_cross, "state")?;
    let f = fa.view((0, 0), (k, k)).into_owned();
    let a = fa.view((0, k), (k, p)).into_owned();

    let rss = expected_rss(stats.s_yy.trace(), &zb, &obs_cross, &obs_gram);
    let sigma2_xi = (rss / (p * stats.count) as f64).max(SIGMA2_XI_FLOOR);

    ModelParams::new(f, a, z, b, sigma2_xi, DVector::from_element(k, 1.0))
}

/// Expected complete-data log-likelihood `Q(phi | phi*)` of candidate
/// parameters against statistics accumulated at `phi*`, up to additive
/// constants that do not involve the interaction matrices or `sigma2_xi`.
pub fn expected_complete_loglik(stats: &SufficientStats, params: &ModelParams) -> f64 {
    let p = params.p() as f64;
    let n = stats.count as f64;

    let (pp, kk) = (stats.p(), stats.k());
    let mut zb = DMatrix::zeros(pp, kk + pp);
    zb.view_mut((0, 0), (pp, kk)).copy_from(params.z());
    zb.view_mut((0, kk), (pp, pp)).copy_from(params.b());
    let rss_obs = expected_rss(stats.s_yy.trace(), &zb, &stats.obs_cross(), &stats.obs_gram());

    let mut fa = DMatrix::zeros(kk, kk + pp);
    fa.view_mut((0, 0), (kk, kk)).copy_from(params.f());
    fa.view_mut((0, kk), (kk, pp)).copy_from(params.a());
    let rss_state = expected_rss(stats.s_tt.trace(), &fa, &stats.state_cross(), &stats.state_gram());

    -0.5 * (rss_obs / params.sigma2_xi() + p * n * params.sigma2_xi().ln())
        - 0.5 * rss_state / params.sigma2_eta()
}

/// Full EM run: init, then alternate E and M steps until the relative
/// log-likelihood change drops below `tol` or `max_iter` is reached.
pub fn fit(dataset: &ExpressionDataset, k: usize, config: &FitConfig) -> Result<FitResult> {
    if config.max_iter < 1 {
        return Err(Error::InvalidDims("max_iter must be >= 1".into()));
    }
    if !(config.tol > 0.0) {
        return Err(Error::InvalidDims("tol must be > 0".into()));
    }
    let dims = dataset.dims_with_k(k)?;

    let mut params = init(dataset, k)?;
    let data = BatchedData::new(dataset);
    let mut trace = Vec::new();
    let mut converged = false;

    for _ in 0..config.max_iter {
        let (stats, loglik) = estep_batched(&params, &data)?;
        if let Some(&prev) = trace.last() {
            if loglik < prev - MONOTONICITY_SLACK {
                return Err(Error::Numerical(format!(
                    "EM log-likelihood decreased from {prev} to {loglik}; this indicates an M-step defect"
                )));
            }
            trace.push(loglik);
            if (loglik - prev).abs() < config.tol * (1.0 + loglik.abs()) {
                converged = true;
                break;
            }
        } else {
            trace.push(loglik);
        }
        params = mstep(&stats, &dims)?;
    }

    Ok(FitResult {
        iterations: trace.len(),
        params,
        loglik_trace: trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dataset_from_rows(rows: Vec<Vec<f64>>, p: usize) -> ExpressionDataset {
        let t_len = rows[0].len() / p;
        let replicates = rows
            .into_iter()
            .map(|r| DMatrix::from_row_slice(p, t_len, &r))
            .collect();
        let names = (0..p).map(|i| format!("g{}", i + 1)).collect();
        ExpressionDataset::new(names, replicates).unwrap()
    }

    #[test]
    fn init_recovers_exact_recurrence() {
        // y_t = 0.9 y_{t-1}, noiseless, p = 1.
        let mut vals = vec![1.0];
        for _ in 1..8 {
            vals.push(vals.last().unwrap() * 0.9);
        }
        let ds = dataset_from_rows(vec![vals], 1);
        let params = init(&ds, 0).unwrap();
        assert_abs_diff_eq!(params.b()[(0, 0)], 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(params.sigma2_xi(), SIGMA2_XI_FLOOR, epsilon = 1e-15);
    }

    #[test]
    fn init_rectangular_identity_loading() {
        let row = vec![1.0, 0.5, 0.25, 0.2, 0.6, 0.1, 0.9, 0.3, 0.7, 0.8, 0.4, 0.05];
        let shifted: Vec<f64> = row.iter().map(|v| v + 0.1).collect();
        let scaled: Vec<f64> = row.iter().map(|v| v * 0.7).collect();
        let ds = dataset_from_rows(vec![row, shifted, scaled], 3);
        let params = init(&ds, 2).unwrap();
        assert_eq!(params.z().nrows(), 3);
        assert_eq!(params.z().ncols(), 2);
        for i in 0..3 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(params.z()[(i, j)], expected);
            }
        }
        assert_eq!(params.f(), &DMatrix::identity(2, 2));
        assert!(params.a().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_matches_scalar_normal_equations() {
        let rows = vec![
            vec![0.31, -0.42, 0.97, 0.11, -0.73, 0.25],
            vec![-0.15, 0.62, -0.88, 0.44, 0.09, -0.31],
        ];
        let ds = dataset_from_rows(rows.clone(), 1);
        let params = init(&ds, 0).unwrap();
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        for r in &rows {
            for t in 1..r.len() {
                sxy += r[t] * r[t - 1];
                sxx += r[t - 1] * r[t - 1];
            }
        }
        assert_abs_diff_eq!(params.b()[(0, 0)], sxy / sxx, epsilon = 1e-12);
    }

    #[test]
    fn estep_zero_data_zero_state_stats() {
        let ds = dataset_from_rows(vec![vec![0.0; 6], vec![0.0; 6]], 1);
        let params = init(&ds, 1).unwrap();
        // A = 0 from init; zero data and zero prior mean drive nothing.
        let (stats, _) = estep(&params, &ds).unwrap();
        assert!(stats.s_t.iter().all(|&v| v.abs() < 1e-14));
        assert!(stats.s_yt.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn estep_additive_over_identical_replicates() {
        let row = vec![0.4, -0.2, 0.8, 0.1, -0.5, 0.9];
        let one = dataset_from_rows(vec![row.clone()], 2);
        let two = dataset_from_rows(vec![row.clone(), row], 2);
        let params = init(&two, 1).unwrap();
        let (s1, l1) = estep(&params, &one).unwrap();
        let (s2, l2) = estep(&params, &two).unwrap();
        assert_abs_diff_eq!(l2, 2.0 * l1, epsilon = 1e-10);
        assert_abs_diff_eq!(s2.s_tt[(0, 0)], 2.0 * s1.s_tt[(0, 0)], epsilon = 1e-10);
        assert_abs_diff_eq!(s2.s_yy[(0, 0)], 2.0 * s1.s_yy[(0, 0)], epsilon = 1e-10);
        assert_eq!(s2.count, 2 * s1.count);
    }

    #[test]
    fn mstep_orthogonal_states_decouple() {
        // S_tt = I, S_yt = 0, S_t_ylag = 0: Z = 0 and B is a pure lag
        // regression.
        let (p, k) = (2, 2);
        let mut stats = SufficientStats::zeros(p, k);
        stats.s_tt = DMatrix::identity(k, k);
        stats.s_tlag_tlag = DMatrix::identity(k, k);
        stats.s_t_tlag = DMatrix::zeros(k, k);
        stats.s_ylag_ylag = DMatrix::from_row_slice(p, p, &[2.0, 0.3, 0.3, 1.5]);
        stats.s_y_ylag = DMatrix::from_row_slice(p, p, &[1.0, 0.2, -0.4, 0.9]);
        stats.s_yy = DMatrix::from_row_slice(p, p, &[3.0, 0.1, 0.1, 2.0]);
        stats.count = 10;
        let dims = Dims::new(p, k, 10, 10).unwrap();
        let params = mstep(&stats, &dims).unwrap();
        assert!(params.z().iter().all(|&v| v.abs() < 1e-12));
        let b_expected = &stats.s_y_ylag
            * stats
                .s_ylag_ylag
                .clone()
                .try_inverse()
                .unwrap();
        assert_abs_diff_eq!(params.b()[(0, 0)], b_expected[(0, 0)], epsilon = 1e-12);
        assert_abs_diff_eq!(params.b()[(1, 0)], b_expected[(1, 0)], epsilon = 1e-12);
    }

    #[test]
    fn mstep_recovers_generating_coefficients_from_exact_states() {
        // Build stats from exactly known states and noiseless observations.
        let (p, k) = (2, 1);
        let z0 = DMatrix::from_row_slice(p, k, &[0.7, -0.4]);
        let b0 = DMatrix::from_row_slice(p, p, &[0.5, 0.1, -0.2, 0.3]);
        let f0 = DMatrix::from_row_slice(k, k, &[0.6]);
        let a0 = DMatrix::from_row_slice(k, p, &[0.2, -0.1]);

        let mut stats = SufficientStats::zeros(p, k);
        let mut theta_prev = DVector::from_element(k, 0.5);
        let mut y_prev = DVector::<f64>::zeros(p);
        let mut lcg = 99u64;
        let mut noise = || {
            lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (lcg >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..40 {
            let eta = DVector::from_fn(k, |_, _| noise());
            let theta = &f0 * &theta_prev + &a0 * &y_prev + eta;
            let y = &z0 * &theta + &b0 * &y_prev;
            stats.s_tt += &theta * theta.transpose();
            stats.s_t += &theta;
            stats.s_yt += &y * theta.transpose();
            stats.s_t_ylag += &theta * y_prev.transpose();
            stats.s_y_ylag += &y * y_prev.transpose();
            stats.s_ylag_ylag += &y_prev * y_prev.transpose();
            stats.s_yy += &y * y.transpose();
            stats.s_t_tlag += &theta * theta_prev.transpose();
            stats.s_tlag_tlag += &theta_prev * theta_prev.transpose();
            stats.s_tlag_ylag += &theta_prev * y_prev.transpose();
            stats.count += 1;
            theta_prev = theta;
            y_prev = y;
        }
        let dims = Dims::new(p, k, 40, 1).unwrap();
        let params = mstep(&stats, &dims).unwrap();
        for i in 0..p {
            for j in 0..k {
                assert_abs_diff_eq!(params.z()[(i, j)], z0[(i, j)], epsilon = 1e-8);
            }
            for j in 0..p {
                assert_abs_diff_eq!(params.b()[(i, j)], b0[(i, j)], epsilon = 1e-8);
            }
        }
        assert_abs_diff_eq!(params.sigma2_xi(), SIGMA2_XI_FLOOR, epsilon = 1e-15);
    }

    #[test]
    fn fit_trace_monotone_and_converges() {
        let rows = vec![
            vec![0.2, 0.5, -0.1, 0.8, 0.3, -0.4, 0.6, 0.1],
            vec![-0.3, 0.4, 0.7, -0.2, 0.5, 0.0, -0.6, 0.2],
            vec![0.1, -0.5, 0.3, 0.6, -0.7, 0.4, 0.2, -0.1],
        ];
        let ds = dataset_from_rows(rows, 2);
        let result = fit(&ds, 1, &FitConfig::default()).unwrap();
        for w in result.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - MONOTONICITY_SLACK);
        }
        assert!(result.converged);
        assert_eq!(result.iterations, result.loglik_trace.len());
    }

    #[test]
    fn singular_gram_is_reported() {
        let (p, k) = (1, 1);
        let stats = SufficientStats::zeros(p, k); // all-zero Gram
        let dims = Dims::new(p, k, 10, 10).unwrap();
        match mstep(&stats, &dims) {
            Err(Error::Numerical(msg)) => assert!(msg.contains("Gram")),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }
}
