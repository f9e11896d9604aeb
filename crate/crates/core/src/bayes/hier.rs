//! Joint hierarchical model on per-trial ANCOVA regressions with exchangeable
//! treatment effects. The regression coefficients and ξ are integrated out
//! analytically; the sampler moves over (log τ, log σ_d) and the rest is drawn
//! from exact conditionals afterwards.

use nalgebra::{Matrix4, Vector4};

use super::mcmc::{check_convergence, mcmc_sample, LogDensity, McmcConfig};
use super::priors::HierPriors;
use super::summary::PosteriorSummary;
use crate::datagen::{Scale, TrialDataset};
use crate::error::{Error, Result};
use crate::ols::ancova_fit;
use crate::ols::{ancova_row, Endpoint, TREATMENT_COL};
use crate::rngdist::{sample_standard_normal, RngStream};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Sufficient statistics of one trial's complete-case ANCOVA.
#[derive(Clone, Debug)]
pub struct TrialStats {
    pub xtx: Matrix4<f64>,
    pub xty: Vector4<f64>,
    pub yty: f64,
    pub n: usize,
    pub ols_effect: f64,
    pub ols_se: f64,
    pub residual_sd: f64,
}

impl TrialStats {
    pub fn from_dataset(ds: &TrialDataset, scale: Scale) -> Result<Self> {
        let fit = ancova_fit(&ds.records, scale, Endpoint::Final)?;
        let mut xtx = Matrix4::zeros();
        let mut xty = Vector4::zeros();
        let mut yty = 0.0;
        for r in ds.complete_cases() {
            let x = Vector4::from(ancova_row(r, scale));
            let y = r.outcome(scale).unwrap();
            xtx += x * x.transpose();
            xty += x * y;
            yty += y * y;
        }
        Ok(TrialStats {
            xtx,
            xty,
            yty,
            n: fit.n_used,
            ols_effect: fit.coefficients[TREATMENT_COL],
            ols_se: fit.se(TREATMENT_COL),
            residual_sd: fit.residual_sd,
        })
    }
}

/// Ingredients of the conditional posterior of one trial's coefficients.
struct Conditional {
    s: Vector4<f64>,
    prior_mean: Vector4<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::U4>,
    u: Vector4<f64>,
    loglik: f64,
}

fn conditional(t: &TrialStats, coef_sd: f64, xi: f64, tau: f64, sigma: f64) -> Option<Conditional> {
    let s2 = sigma * sigma;
    let s = Vector4::new(coef_sd, coef_sd, coef_sd, tau);
    let mut m = Matrix4::<f64>::identity();
    for i in 0..4 {
        for j in 0..4 {
            m[(i, j)] += s[i] * t.xtx[(i, j)] * s[j] / s2;
        }
    }
    let chol = m.cholesky()?;
    let logdet: f64 = (0..4).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>() * 2.0;
    let prior_mean = Vector4::new(0.0, 0.0, 0.0, xi);
    let xr = t.xty - t.xtx * prior_mean;
    let rr = t.yty - 2.0 * prior_mean.dot(&t.xty) + prior_mean.dot(&(t.xtx * prior_mean));
    let u = s.component_mul(&xr) / s2;
    let quad = rr / s2 - u.dot(&chol.solve(&u));
    let n = t.n as f64;
    Some(Conditional {
        s,
        prior_mean,
        chol,
        u,
        loglik: -0.5 * (n * (LN_2PI + s2.ln()) + logdet + quad),
    })
}

/// a·u² + b·u + c with u = ξ − center: the log joint density as a function of ξ.
#[derive(Clone, Copy, Debug)]
pub(super) struct XiQuadratic {
    a: f64,
    b: f64,
    c: f64,
    center: f64,
}

impl XiQuadratic {
    pub(super) fn new(a: f64, b: f64, c: f64, center: f64) -> Option<Self> {
        (a < 0.0 && b.is_finite() && c.is_finite()).then_some(XiQuadratic { a, b, c, center })
    }

    /// Exact for quadratic `f`, from its values at center and center ± h.
    fn from_points(center: f64, h: f64, f: impl Fn(f64) -> Option<f64>) -> Option<Self> {
        let (lo, mid, hi) = (f(center - h)?, f(center)?, f(center + h)?);
        Self::new((lo + hi - 2.0 * mid) / (2.0 * h * h), (hi - lo) / (2.0 * h), mid, center)
    }

    /// log ∫ exp(a u² + b u + c) du.
    pub(super) fn log_integral(&self) -> f64 {
        self.c - self.b * self.b / (4.0 * self.a) + 0.5 * (std::f64::consts::PI / -self.a).ln()
    }

    /// Mean and variance of ξ given everything else.
    pub(super) fn conditional(&self) -> (f64, f64) {
        (self.center - self.b / (2.0 * self.a), -0.5 / self.a)
    }
}

struct HierModel<'a> {
    trials: &'a [TrialStats],
    priors: &'a HierPriors,
    /// Where and at what spacing the ξ quadratic is probed.
    center: f64,
    spread: f64,
}

impl HierModel<'_> {
    fn tau(&self, p: &[f64]) -> (f64, f64, usize) {
        let td = self.priors.tau_dims();
        let (tau, lp_tau) = self.priors.tau_at(if td == 1 { Some(p[0]) } else { None });
        (tau, lp_tau, td)
    }

    fn xi_quadratic(&self, tau: f64, sigmas: &[f64]) -> Option<XiQuadratic> {
        let h = (self.spread * self.spread + tau * tau).sqrt();
        XiQuadratic::from_points(self.center, h, |xi| {
            let mut f = self.priors.log_xi(xi);
            for (t, &s) in self.trials.iter().zip(sigmas) {
                f += conditional(t, self.priors.coef_sd, xi, tau, s)?.loglik;
            }
            Some(f)
        })
    }
}

impl LogDensity for HierModel<'_> {
    fn dim(&self) -> usize {
        self.priors.tau_dims() + self.trials.len()
    }

    fn log_density(&self, p: &[f64]) -> f64 {
        let (tau, mut lp, off) = self.tau(p);
        let mut sigmas = Vec::with_capacity(self.trials.len());
        for &ls in &p[off..] {
            if !(-30.0..=30.0).contains(&ls) {
                return f64::NEG_INFINITY;
            }
            lp += self.priors.log_sigma(ls);
            sigmas.push(ls.exp());
        }
        match self.xi_quadratic(tau, &sigmas) {
            Some(q) => lp + q.log_integral(),
            None => f64::NEG_INFINITY,
        }
    }
}

/// Posterior draws in tabular form.
#[derive(Clone, Debug, PartialEq)]
pub struct DrawTable {
    pub names: Vec<String>,
    /// `chains[c][i][j]`.
    pub chains: Vec<Vec<Vec<f64>>>,
}

impl DrawTable {
    pub fn column(&self, name: &str) -> Option<Vec<Vec<f64>>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.chains.iter().map(|c| c.iter().map(|r| r[j]).collect()).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierParams {
    pub xi: PosteriorSummary,
    pub tau: PosteriorSummary,
    pub sigma_tau: Option<f64>,
    /// θ₃d for every trial, current trial first.
    pub theta: Vec<PosteriorSummary>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierFit {
    pub theta0: PosteriorSummary,
    pub params: HierParams,
    pub draws: DrawTable,
    pub acceptance: Vec<f64>,
}

pub(super) fn tau_sigma(priors: &HierPriors) -> Option<f64> {
    match priors.tau {
        super::priors::TauPrior::HalfNormal { scale } => Some(scale),
        super::priors::TauPrior::Fixed(_) => None,
    }
}

pub(super) fn finish(
    acceptance: Vec<f64>,
    names: Vec<String>,
    chains: Vec<Vec<Vec<f64>>>,
    n_trials: usize,
    priors: &HierPriors,
    cfg: &McmcConfig,
) -> Result<HierFit> {
    let draws = DrawTable { names, chains };
    let col = |j: usize| -> Vec<Vec<f64>> {
        draws.chains.iter().map(|c| c.iter().map(|r| r[j]).collect()).collect()
    };
    // A fixed τ is constant and has no diagnostics.
    let traces: Vec<Vec<Vec<f64>>> = (0..draws.names.len())
        .map(col)
        .filter(|t| t.iter().flatten().any(|&v| v != t[0][0]))
        .collect();
    check_convergence(&traces, cfg)?;
    let theta_off = draws.names.len() - n_trials;
    let theta: Vec<PosteriorSummary> =
        (0..n_trials).map(|d| PosteriorSummary::from_traces(&col(theta_off + d))).collect();
    Ok(HierFit {
        theta0: theta[0].clone(),
        params: HierParams {
            xi: PosteriorSummary::from_traces(&col(0)),
            tau: PosteriorSummary::from_traces(&col(1)),
            sigma_tau: tau_sigma(priors),
            theta,
        },
        draws,
        acceptance,
    })
}

/// Full Bayesian ANCOVA across trials with θ₃d ~ N(ξ, τ²). `datasets[0]` is the current trial.
pub fn hierarchical_fit(
    datasets: &[TrialDataset],
    scale: Scale,
    priors: &HierPriors,
    cfg: &McmcConfig,
    rng: &RngStream,
) -> Result<HierFit> {
    if datasets.len() < 2 {
        return Err(Error::insufficient("hierarchical model trials", 2, datasets.len()));
    }
    priors.validate()?;
    let trials: Vec<TrialStats> =
        datasets.iter().map(|d| TrialStats::from_dataset(d, scale)).collect::<Result<_>>()?;
    let model = HierModel {
        trials: &trials,
        priors,
        center: trials.iter().map(|t| t.ols_effect).sum::<f64>() / trials.len() as f64,
        spread: trials.iter().map(|t| t.ols_se).fold(0.0, f64::max),
    };
    let mut init = Vec::new();
    let mut init_sd = Vec::new();
    if let Some(scale) = tau_sigma(priors) {
        init.push((0.5 * scale).ln());
        init_sd.push(0.5);
    }
    for t in &trials {
        init.push(t.residual_sd.ln());
        init_sd.push(1.0 / (2.0 * t.n as f64).sqrt());
    }
    let out = mcmc_sample(&model, &init, &init_sd, cfg, rng)?;

    let d = trials.len();
    let mut names = vec!["xi".to_string(), "tau".to_string()];
    names.extend((0..d).map(|k| format!("sigma_{k}")));
    names.extend((0..d).map(|k| format!("theta3_{k}")));
    let gen_rng = rng.substream(1 << 32);
    let chains: Vec<Vec<Vec<f64>>> = out
        .chains
        .iter()
        .enumerate()
        .map(|(c, chain)| {
            let mut s = gen_rng.substream(c as u64);
            chain
                .iter()
                .map(|p| {
                    let (tau, _, off) = model.tau(p);
                    let sigmas: Vec<f64> = p[off..].iter().map(|ls| ls.exp()).collect();
                    let (xm, xv) = model
                        .xi_quadratic(tau, &sigmas)
                        .expect("accepted state has a finite density")
                        .conditional();
                    let xi = xm + xv.sqrt() * sample_standard_normal(&mut s);
                    let mut row = vec![xi, tau];
                    row.extend(&sigmas);
                    for (k, t) in trials.iter().enumerate() {
                        let cond = conditional(t, priors.coef_sd, xi, tau, sigmas[k])
                            .expect("accepted state has a finite density");
                        let z = Vector4::from_fn(|_, _| sample_standard_normal(&mut s));
                        let noise = cond
                            .chol
                            .l()
                            .transpose()
                            .solve_upper_triangular(&z)
                            .expect("Cholesky factor is nonsingular");
                        let w = cond.chol.solve(&cond.u) + noise;
                        let beta = cond.prior_mean + cond.s.component_mul(&w);
                        row.push(beta[3]);
                    }
                    row
                })
                .collect()
        })
        .collect();
    finish(out.acceptance, names, chains, d, priors, cfg)
}
