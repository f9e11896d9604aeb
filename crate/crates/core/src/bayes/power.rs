use super::hellinger::{Commensurability, NormalApprox};
use super::summary::PosteriorSummary;
use crate::error::{Error, Result};

/// Δ at or above this is treated as complete conflict.
const DELTA_CEILING: f64 = 1.0 - 1e-9;
const VAGUE_PRIOR_SD: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PowerPosterior {
    pub summary: PosteriorSummary,
    pub prior_mean: f64,
    pub prior_sd: f64,
    pub commensurability: Commensurability,
    /// The external prior was dropped for the vague one.
    pub vague_fallback: bool,
}

/// Normal-normal update of the current-trial likelihood with the external
/// marginal posterior, rescaled to `n_missing` subjects and inflated by (1−Δ)⁻².
pub fn power_prior_posterior(
    cc: &NormalApprox,
    ext: &NormalApprox,
    comm: &Commensurability,
    n_missing: usize,
) -> Result<PowerPosterior> {
    if n_missing == 0 {
        return Err(Error::domain("power prior needs n_missing >= 1"));
    }
    if !(0.0..=1.0).contains(&comm.delta) {
        return Err(Error::domain(format!("commensurability {} outside [0, 1]", comm.delta)));
    }
    let vague_fallback = comm.delta >= DELTA_CEILING;
    if vague_fallback {
        log::warn!("commensurability Δ = {} treated as total conflict; using the vague prior", comm.delta);
    }
    let (prior_mean, prior_var) = if vague_fallback {
        (0.0, VAGUE_PRIOR_SD * VAGUE_PRIOR_SD)
    } else {
        let unit_var = ext.unit_information_sd().powi(2);
        (ext.mean, unit_var / n_missing as f64 / (1.0 - comm.delta).powi(2))
    };
    let prec = 1.0 / prior_var + 1.0 / cc.variance();
    let mean = (prior_mean / prior_var + cc.mean / cc.variance()) / prec;
    Ok(PowerPosterior {
        summary: PosteriorSummary::normal(mean, prec.recip().sqrt()),
        prior_mean,
        prior_sd: prior_var.sqrt(),
        commensurability: comm.clone(),
        vague_fallback,
    })
}
