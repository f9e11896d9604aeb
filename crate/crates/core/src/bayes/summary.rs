use super::diagnostics::{ess_bulk, ess_mean, rhat};
use crate::rngdist::std_cdf;

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub sd: f64,
    pub pr_ge_zero: f64,
    pub q025: f64,
    pub q975: f64,
    pub ess_bulk: f64,
    pub rhat: f64,
    /// Monte Carlo standard error of `mean`.
    pub mcse: f64,
    pub n_draws: usize,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl PosteriorSummary {
    pub fn from_traces(traces: &[Vec<f64>]) -> Self {
        let mut all: Vec<f64> = traces.iter().flatten().copied().collect();
        let n = all.len();
        let mean = all.iter().sum::<f64>() / n as f64;
        let sd = (all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let pr_ge_zero = all.iter().filter(|&&x| x >= 0.0).count() as f64 / n as f64;
        all.sort_by(f64::total_cmp);
        let ess_m = ess_mean(traces);
        PosteriorSummary {
            mean,
            sd,
            pr_ge_zero,
            q025: quantile(&all, 0.025),
            q975: quantile(&all, 0.975),
            ess_bulk: ess_bulk(traces),
            rhat: rhat(traces),
            mcse: sd / ess_m.sqrt(),
            n_draws: n,
        }
    }

    /// Exact summary of a normal posterior.
    pub fn normal(mean: f64, sd: f64) -> Self {
        let h = 1.959_963_984_540_054 * sd;
        PosteriorSummary {
            mean,
            sd,
            pr_ge_zero: std_cdf(mean / sd),
            q025: mean - h,
            q975: mean + h,
            ess_bulk: f64::INFINITY,
            rhat: 1.0,
            mcse: 0.0,
            n_draws: 0,
        }
    }
}
