//! Exact Gaussian filtering and fixed-interval smoothing for the
//! input-feedback model, treating the lagged observation as a known
//! exogenous input to both the state and observation equations.
//!
//! The forward pass accumulates the marginal log-likelihood via the
//! prediction error decomposition; the backward pass produces the smoothed
//! means, covariances, and lag-one covariances the E-step consumes.
//!
//! Covariances, innovation factorizations, and gains do not depend on the
//! observed values, so for replicated data they are computed once per
//! parameter set and shared across replicates; only the mean recursions
//! run per replicate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::datamodel::{ExpressionDataset, ModelParams};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453;

/// Forward-pass output for a single replicate.
#[derive(Debug, Clone)]
pub struct FilterResult {
    /// Predicted state means `E[theta_t | y_{1:t-1}]`, t = 1..T.
    pub predicted_means: Vec<DVector<f64>>,
    /// Predicted state covariances, t = 1..T.
    pub predicted_covs: Vec<DMatrix<f64>>,
    /// Filtered state means `E[theta_t | y_{1:t}]`, t = 1..T.
    pub filtered_means: Vec<DVector<f64>>,
    /// Filtered state covariances, t = 1..T.
    pub filtered_covs: Vec<DMatrix<f64>>,
    /// One-step-ahead observation residuals, t = 1..T.
    pub innovations: Vec<DVector<f64>>,
    /// Innovation covariances, t = 1..T.
    pub innovation_covs: Vec<DMatrix<f64>>,
    /// Accumulated marginal log-density of the replicate.
    pub loglik: f64,
}

/// Smoothed posterior moments for a single replicate.
///
/// Index `t-1` of `means`/`covs` holds the moment of `theta_t` for
/// t = 1..T; the initial state's moments are kept separately. `lag_one[t-1]`
/// is `Cov(theta_t, theta_{t-1} | y_{1:T})`, so the first entry couples
/// `theta_1` to `theta_0`.
#[derive(Debug, Clone)]
pub struct SmoothedMoments {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    pub lag_one: Vec<DMatrix<f64>>,
    pub mean0: DVector<f64>,
    pub cov0: DMatrix<f64>,
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let mt = m.transpose();
    *m += mt;
    *m *= 0.5;
}

fn spd_cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone())
        .ok_or_else(|| Error::Numerical(format!("{what} is not positive definite")))
}

fn ln_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum()
}

/// Data-independent forward quantities shared by all replicates.
pub(crate) struct CovariancePass {
    pub predicted_covs: Vec<DMatrix<f64>>,
    pub filtered_covs: Vec<DMatrix<f64>>,
    pub innovation_covs: Vec<DMatrix<f64>>,
    /// Cholesky factors of the innovation covariances.
    pub innovation_chols: Vec<Cholesky<f64, Dyn>>,
    /// Kalman gains `K_t = P_pred Z' S^{-1}` (k x p).
    pub gains: Vec<DMatrix<f64>>,
    /// `sum_t ln det S_t`.
    pub ln_det_total: f64,
}

pub(crate) fn covariance_pass(params: &ModelParams, t_len: usize) -> Result<CovariancePass> {
    let p = params.p();
    let k = params.k();
    let q = DMatrix::<f64>::identity(k, k) * params.sigma2_eta();
    let r = DMatrix::<f64>::identity(p, p) * params.sigma2_xi();

    let mut pass = CovariancePass {
        predicted_covs: Vec::with_capacity(t_len),
        filtered_covs: Vec::with_capacity(t_len),
        innovation_covs: Vec::with_capacity(t_len),
        innovation_chols: Vec::with_capacity(t_len),
        gains: Vec::with_capacity(t_len),
        ln_det_total: 0.0,
    };

    let mut p_filt = params.q0_matrix();
    for _ in 0..t_len {
        let mut p_pred = params.f() * &p_filt * params.f().transpose() + &q;
        symmetrize(&mut p_pred);

        let mut s = params.z() * &p_pred * params.z().transpose() + &r;
        symmetrize(&mut s);
        let chol = spd_cholesky(&s, "innovation covariance")?;
        pass.ln_det_total += ln_det(&chol);

        // Gain K = P_pred Z' S^{-1}, computed as (S^{-1} Z P_pred)'.
        let zp = params.z() * &p_pred; // p x k
        let gain = chol.solve(&zp).transpose(); // k x p

        // Joseph form keeps the updated covariance symmetric PSD.
        let i_kz = DMatrix::<f64>::identity(k, k) - &gain * params.z();
        let mut p_upd = &i_kz * &p_pred * i_kz.transpose() + &gain * &r * gain.transpose();
        symmetrize(&mut p_upd);
        p_filt = p_upd.clone();

        pass.predicted_covs.push(p_pred);
        pass.filtered_covs.push(p_upd);
        pass.innovation_covs.push(s);
        pass.innovation_chols.push(chol);
        pass.gains.push(gain);
    }
    Ok(pass)
}

/// Data-dependent forward quantities for one replicate.
pub(crate) struct MeanPass {
    pub predicted_means: Vec<DVector<f64>>,
    pub filtered_means: Vec<DVector<f64>>,
    pub innovations: Vec<DVector<f64>>,
    pub loglik: f64,
}

pub(crate) fn mean_pass(
    params: &ModelParams,
    cov: &CovariancePass,
    replicate: &DMatrix<f64>,
) -> Result<MeanPass> {
    let p = params.p();
    let t_len = replicate.ncols();

    let mut x_filt = params.a0();
    let mut y_prev = DVector::<f64>::zeros(p);
    let mut quad_total = 0.0;

    let mut out = MeanPass {
        predicted_means: Vec::with_capacity(t_len),
        filtered_means: Vec::with_capacity(t_len),
        innovations: Vec::with_capacity(t_len),
        loglik: 0.0,
    };

    for t in 0..t_len {
        let y_t = replicate.column(t).into_owned();
        let x_pred = params.f() * &x_filt + params.a() * &y_prev;
        let innov = &y_t - params.z() * &x_pred - params.b() * &y_prev;
        quad_total += innov.dot(&cov.innovation_chols[t].solve(&innov));
        x_filt = &x_pred + &cov.gains[t] * &innov;

        out.predicted_means.push(x_pred);
        out.filtered_means.push(x_filt.clone());
        out.innovations.push(innov);
        y_prev = y_t;
    }

    out.loglik = -0.5 * (t_len as f64 * p as f64 * LN_2PI + cov.ln_det_total + quad_total);
    if !out.loglik.is_finite() {
        return Err(Error::Numerical("filter log-likelihood is not finite".into()));
    }
    Ok(out)
}

/// Data-independent backward quantities shared by all replicates:
/// smoother gains, smoothed covariances, and lag-one covariances.
pub(crate) struct SmootherCovPass {
    /// `J_t = P_{t|t} F' P_{t+1|t}^{-1}` for t = 0..T-1 (`J_0` uses Q0).
    pub gains: Vec<DMatrix<f64>>,
    /// Smoothed covariances `V_t`, t = 1..T.
    pub covs: Vec<DMatrix<f64>>,
    /// `Cov(theta_t, theta_{t-1} | y) = V_t J_{t-1}'`, index t-1.
    pub lag_one: Vec<DMatrix<f64>>,
    pub cov0: DMatrix<f64>,
}

pub(crate) fn smoother_cov_pass(params: &ModelParams, cov: &CovariancePass) -> Result<SmootherCovPass> {
    let t_len = cov.filtered_covs.len();

    let gain_into = |p_filt: &DMatrix<f64>, p_pred_next: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let chol = spd_cholesky(p_pred_next, "predicted covariance")?;
        let pf = p_filt * params.f().transpose();
        Ok(chol.solve(&pf.transpose()).transpose())
    };

    let q0 = params.q0_matrix();
    let mut gains = Vec::with_capacity(t_len);
    gains.push(gain_into(&q0, &cov.predicted_covs[0])?);
    for t in 1..t_len {
        gains.push(gain_into(&cov.filtered_covs[t - 1], &cov.predicted_covs[t])?);
    }

    let mut covs = cov.filtered_covs.clone();
    for t in (0..t_len - 1).rev() {
        let j = &gains[t + 1];
        let dp = &covs[t + 1] - &cov.predicted_covs[t + 1];
        let mut v = &cov.filtered_covs[t] + j * dp * j.transpose();
        symmetrize(&mut v);
        covs[t] = v;
    }
    let dp0 = &covs[0] - &cov.predicted_covs[0];
    let mut cov0 = &q0 + &gains[0] * dp0 * gains[0].transpose();
    symmetrize(&mut cov0);

    let mut lag_one = Vec::with_capacity(t_len);
    for t in 0..t_len {
        lag_one.push(&covs[t] * gains[t].transpose());
    }

    Ok(SmootherCovPass {
        gains,
        covs,
        lag_one,
        cov0,
    })
}

/// Backward mean recursion for one replicate against shared gains:
/// returns smoothed means for t = 1..T plus the smoothed mean of theta_0.
pub(crate) fn smoothed_means(
    smo: &SmootherCovPass,
    mp: &MeanPass,
) -> (Vec<DVector<f64>>, DVector<f64>) {
    let t_len = mp.filtered_means.len();
    let mut means = mp.filtered_means.clone();
    for t in (0..t_len - 1).rev() {
        let dm = &means[t + 1] - &mp.predicted_means[t + 1];
        means[t] = &mp.filtered_means[t] + &smo.gains[t + 1] * dm;
    }
    let dm0 = &means[0] - &mp.predicted_means[0];
    let mean0 = &smo.gains[0] * dm0;
    (means, mean0)
}

/// Forward Kalman recursion over one replicate (`p x T` matrix, column t
/// holding `y_{t+1}`), with `y_0 = 0` and `theta_0 ~ N(0, Q0)`.
pub fn filter(params: &ModelParams, replicate: &DMatrix<f64>) -> Result<FilterResult> {
    if replicate.nrows() != params.p() {
        return Err(Error::InvalidDims(format!(
            "replicate has {} rows, params expect p = {}",
            replicate.nrows(),
            params.p()
        )));
    }
    let t_len = replicate.ncols();
    if t_len == 0 {
        return Err(Error::InvalidDims("replicate must contain at least one time point".into()));
    }
    let cov = covariance_pass(params, t_len)?;
    let mp = mean_pass(params, &cov, replicate)?;
    Ok(FilterResult {
        predicted_means: mp.predicted_means,
        predicted_covs: cov.predicted_covs,
        filtered_means: mp.filtered_means,
        filtered_covs: cov.filtered_covs,
        innovations: mp.innovations,
        innovation_covs: cov.innovation_covs,
        loglik: mp.loglik,
    })
}

/// Backward fixed-interval smoothing pass, including lag-one covariances
/// and the smoothed moments of the initial state.
///
/// `filter_result` must come from [`filter`] on the same `params` and
/// replicate.
pub fn smooth(params: &ModelParams, filter_result: &FilterResult) -> Result<SmoothedMoments> {
    let t_len = filter_result.filtered_means.len();
    if t_len == 0 {
        return Err(Error::InvalidDims("empty filter result".into()));
    }
    let cov = CovariancePass {
        predicted_covs: filter_result.predicted_covs.clone(),
        filtered_covs: filter_result.filtered_covs.clone(),
        innovation_covs: Vec::new(),
        innovation_chols: Vec::new(),
        gains: Vec::new(),
        ln_det_total: 0.0,
    };
    let smo = smoother_cov_pass(params, &cov)?;
    let mp = MeanPass {
        predicted_means: filter_result.predicted_means.clone(),
        filtered_means: filter_result.filtered_means.clone(),
        innovations: Vec::new(),
        loglik: filter_result.loglik,
    };
    let (means, mean0) = smoothed_means(&smo, &mp);
    Ok(SmoothedMoments {
        means,
        covs: smo.covs,
        lag_one: smo.lag_one,
        mean0,
        cov0: smo.cov0,
    })
}

/// Marginal log-likelihood of the whole dataset: the sum of per-replicate
/// filter log-likelihoods, with the covariance recursion shared.
pub fn marginal_loglik(params: &ModelParams, dataset: &ExpressionDataset) -> Result<f64> {
    if params.p() != dataset.p() {
        return Err(Error::InvalidDims(format!(
            "params have p = {}, dataset has p = {}",
            params.p(),
            dataset.p()
        )));
    }
    let cov = covariance_pass(params, dataset.t_len())?;
    let mut total = 0.0;
    for rep in dataset.replicates() {
        total += mean_pass(params, &cov, rep)?.loglik;
    }
    Ok(total)
}
