use rayon::prelude::*;

use super::combine::{mmse_combine, CombinationInput, CombinedEstimate};
use crate::error::{Error, Result};
use crate::rngdist::{sample_standard_normal, RngStream};

/// Parametric bootstrap summary of the MMSE estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct MmseInference {
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: Option<f64>,
    /// Standard deviation of the bootstrap estimates.
    pub sd: f64,
    pub b: usize,
}

/// θ⁰(δ̂) at perturbed statistics with the covariance terms held at their estimates.
fn mmse_at(input: &CombinationInput, theta: f64, psi_hat: f64, psi_check: f64) -> f64 {
    let d = psi_hat - psi_check;
    theta - input.cov_theta_psi * d / (input.delta_variance() + d * d)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile interval from draws of (θ̂*, ψ̂*, ψ̌*) around the fitted values,
/// and, given `null_theta`, a two-sided p-value from draws generated with
/// θ fixed at the null and ψ̂ moved along its regression on θ̂.
pub fn mmse_bootstrap_inference(
    input: &CombinationInput,
    b: usize,
    null_theta: Option<f64>,
    rng: &RngStream,
) -> Result<MmseInference> {
    if b < 2000 {
        return Err(Error::domain(format!("MMSE bootstrap needs B >= 2000, got {b}")));
    }
    let vt = input.theta.variance;
    let c = input.cov_theta_psi;
    let cond = input.psi_hat.variance - c * c / vt;
    if cond < -1e-12 * input.psi_hat.variance {
        return Err(Error::domain("joint covariance of (θ̂, ψ̂) is not positive semidefinite"));
    }
    let l11 = vt.sqrt();
    let l21 = c / l11;
    let l22 = cond.max(0.0).sqrt();
    let sc = input.psi_check.variance.sqrt();
    let observed = mmse_at(input, input.theta.estimate, input.psi_hat.estimate, input.psi_check.estimate);
    let null_shift = null_theta.map(|t0| (t0, c / vt * (input.theta.estimate - t0)));

    let draws: Vec<(f64, f64)> = (0..b)
        .into_par_iter()
        .map(|k| {
            let mut s = rng.substream(k as u64);
            let (z1, z2, z3) = (
                sample_standard_normal(&mut s),
                sample_standard_normal(&mut s),
                sample_standard_normal(&mut s),
            );
            let (et, ep, ec) = (l11 * z1, l21 * z1 + l22 * z2, sc * z3);
            let centred = mmse_at(
                input,
                input.theta.estimate + et,
                input.psi_hat.estimate + ep,
                input.psi_check.estimate + ec,
            );
            let null = null_shift.map_or(f64::NAN, |(t0, shift)| {
                mmse_at(input, t0 + et, input.psi_hat.estimate - shift + ep, input.psi_check.estimate)
            });
            (centred, null)
        })
        .collect();

    let mut centred: Vec<f64> = draws.iter().map(|d| d.0).collect();
    centred.sort_by(f64::total_cmp);
    let mean = centred.iter().sum::<f64>() / b as f64;
    let sd = (centred.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1) as f64).sqrt();

    let p_value = null_theta.map(|_| {
        let below = draws.iter().filter(|d| d.1 <= observed).count() as f64 / b as f64;
        let above = draws.iter().filter(|d| d.1 >= observed).count() as f64 / b as f64;
        (2.0 * below.min(above)).min(1.0)
    });
    Ok(MmseInference {
        ci_low: quantile(&centred, 0.025),
        ci_high: quantile(&centred, 0.975),
        p_value,
        sd,
        b,
    })
}

/// [`mmse_combine`] with its percentile interval and p-value for θ = `null_theta`.
pub fn mmse_with_inference(
    input: &CombinationInput,
    b: usize,
    null_theta: f64,
    rng: &RngStream,
) -> Result<CombinedEstimate> {
    let mut est = mmse_combine(input)?;
    let inf = mmse_bootstrap_inference(input, b, Some(null_theta), rng)?;
    est.ci_low = Some(inf.ci_low.min(est.estimate));
    est.ci_high = Some(inf.ci_high.max(est.estimate));
    est.p_value = inf.p_value;
    est.bootstrap_b = Some(b);
    Ok(est)
}
