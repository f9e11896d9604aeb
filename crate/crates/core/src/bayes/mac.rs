//! Two-stage meta-analytic combined model: per-trial estimates with known
//! variances, exchangeable true effects.

use super::hellinger::NormalApprox;
use super::hier::{finish, HierFit, XiQuadratic};
use super::mcmc::{mcmc_sample, LogDensity, McmcConfig};
use super::priors::HierPriors;
use crate::error::{Error, Result};
use crate::rngdist::{sample_standard_normal, RngStream};

struct MacModel<'a> {
    stage1: &'a [NormalApprox],
    priors: &'a HierPriors,
}

impl MacModel<'_> {
    fn tau(&self, p: &[f64]) -> (f64, f64) {
        let td = self.priors.tau_dims();
        self.priors.tau_at(if td == 1 { Some(p[0]) } else { None })
    }

    /// log p(ξ, y | τ) up to a constant, which is exactly quadratic in ξ.
    fn xi_quadratic(&self, tau: f64) -> Option<XiQuadratic> {
        let (mut a, mut b, mut c) = (-0.5 * self.priors.xi_precision(), 0.0, 0.0);
        for s in self.stage1 {
            let v = s.variance() + tau * tau;
            a -= 0.5 / v;
            b += s.mean / v;
            c -= 0.5 * (v.ln() + s.mean * s.mean / v);
        }
        XiQuadratic::new(a, b, c, 0.0)
    }
}

impl LogDensity for MacModel<'_> {
    fn dim(&self) -> usize {
        self.priors.tau_dims()
    }

    fn log_density(&self, p: &[f64]) -> f64 {
        let (tau, lp) = self.tau(p);
        match self.xi_quadratic(tau) {
            Some(q) if tau.is_finite() => lp + q.log_integral(),
            _ => f64::NEG_INFINITY,
        }
    }
}

/// θ_d | ξ, τ, y_d in closed form.
fn shrink(s: &NormalApprox, xi: f64, tau: f64) -> (f64, f64) {
    let (v, t2) = (s.variance(), tau * tau);
    ((s.mean * t2 + xi * v) / (v + t2), v * t2 / (v + t2))
}

/// Shrinkage posterior for the current trial (`stage1[0]`).
pub fn mac_fit(
    stage1: &[NormalApprox],
    priors: &HierPriors,
    cfg: &McmcConfig,
    rng: &RngStream,
) -> Result<HierFit> {
    if stage1.len() < 2 {
        return Err(Error::insufficient("meta-analytic trials", 2, stage1.len()));
    }
    priors.validate()?;
    cfg.validate()?;
    let model = MacModel { stage1, priors };
    // With τ fixed nothing is left to sample and the draws below are exact.
    let (states, acceptance) = match super::hier::tau_sigma(priors) {
        Some(scale) => {
            let out = mcmc_sample(&model, &[(0.5 * scale).ln()], &[0.5], cfg, rng)?;
            (out.chains, out.acceptance)
        }
        None => (vec![vec![Vec::new(); cfg.kept]; cfg.chains], vec![1.0; cfg.chains]),
    };

    let d = stage1.len();
    let mut names = vec!["xi".to_string(), "tau".to_string()];
    names.extend((0..d).map(|k| format!("theta3_{k}")));
    let gen_rng = rng.substream(1 << 32);
    let chains = states
        .iter()
        .enumerate()
        .map(|(c, chain)| {
            let mut r = gen_rng.substream(c as u64);
            chain
                .iter()
                .map(|p| {
                    let (tau, _) = model.tau(p);
                    let (xm, xv) = model
                        .xi_quadratic(tau)
                        .expect("accepted state has a finite density")
                        .conditional();
                    let xi = xm + xv.sqrt() * sample_standard_normal(&mut r);
                    let mut row = vec![xi, tau];
                    for s in stage1 {
                        let (m, v) = shrink(s, xi, tau);
                        row.push(m + v.sqrt() * sample_standard_normal(&mut r));
                    }
                    row
                })
                .collect()
        })
        .collect();
    finish(acceptance, names, chains, d, priors, cfg)
}
