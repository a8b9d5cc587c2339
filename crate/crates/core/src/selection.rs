//! Hidden-dimension selection by small-sample-corrected AIC over a sweep
//! of candidate `k`.

use rayon::prelude::*;

use crate::datamodel::{param_count, Dims};
use crate::em::{fit, FitConfig};
use crate::error::{Error, Result};
use crate::ExpressionDataset;

/// One fitted candidate in the sweep.
#[derive(Debug, Clone, Copy)]
pub struct SelectionEntry {
    pub k: usize,
    pub loglik: f64,
    pub param_count: u64,
    pub aicc: f64,
    pub converged: bool,
}

/// Sweep results sorted by `k`, with the AICc-minimizing candidate.
#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub entries: Vec<SelectionEntry>,
    pub chosen_k: usize,
}

/// Corrected AIC: `-2 loglik + 2 P N / (N - P - 1)`.
///
/// Requires `N > P + 1`; at or below that boundary the correction factor
/// is undefined or negative.
pub fn aicc(loglik: f64, n_obs: u64, n_params: u64) -> Result<f64> {
    if n_obs <= n_params + 1 {
        return Err(Error::Infeasible(format!(
            "AICc needs N > P + 1 (N = {n_obs}, P = {n_params})"
        )));
    }
    let n = n_obs as f64;
    let p = n_params as f64;
    Ok(-2.0 * loglik + 2.0 * p * n / (n - p - 1.0))
}

/// Fits every candidate `k`, computes AICc with `N = p*T*n_R` and
/// `P = (p+k)^2`, and picks the converged entry with minimum AICc,
/// breaking ties toward smaller `k`. Candidates are deduplicated and
/// processed in ascending order; every candidate must satisfy both the
/// feasibility bound and the AICc precondition.
pub fn select_k(
    dataset: &ExpressionDataset,
    k_range: &[usize],
    config: &FitConfig,
) -> Result<SelectionReport> {
    let mut candidates: Vec<usize> = k_range.to_vec();
    candidates.sort_unstable();
    candidates.dedup();
    if candidates.is_empty() {
        return Err(Error::InvalidDims("empty candidate range for k".into()));
    }

    let n_obs = dataset.p() as u64 * dataset.t_len() as u64 * dataset.n_reps() as u64;
    for &k in &candidates {
        Dims::new(dataset.p(), k, dataset.t_len(), dataset.n_reps())?;
        let p_count = param_count(dataset.p(), k);
        if n_obs <= p_count + 1 {
            return Err(Error::Infeasible(format!(
                "k = {k} fails the AICc precondition (N = {n_obs}, P = {p_count})"
            )));
        }
    }

    let entries: Vec<Result<SelectionEntry>> = candidates
        .par_iter()
        .map(|&k| {
            let result = fit(dataset, k, config)?;
            let p_count = param_count(dataset.p(), k);
            Ok(SelectionEntry {
                k,
                loglik: result.loglik(),
                param_count: p_count,
                aicc: aicc(result.loglik(), n_obs, p_count)?,
                converged: result.converged,
            })
        })
        .collect();
    let entries: Vec<SelectionEntry> = entries.into_iter().collect::<Result<_>>()?;

    let chosen = entries
        .iter()
        .filter(|e| e.converged)
        .min_by(|a, b| {
            a.aicc
                .partial_cmp(&b.aicc)
                .expect("AICc is finite")
                .then(a.k.cmp(&b.k))
        })
        .ok_or_else(|| Error::Numerical("no candidate fit converged; raise max_iter".into()))?;

    Ok(SelectionReport {
        chosen_k: chosen.k,
        entries,
    })
}
