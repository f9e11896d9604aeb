//! Adaptive random-walk Metropolis with parallel chains.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::{ess_bulk, rhat};
use crate::error::{Error, Result};
use crate::rngdist::{sample_standard_normal, RngStream};

/// Unnormalized log posterior on an unconstrained parameter vector.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub chains: usize,
    pub warmup: usize,
    pub kept: usize,
    /// Metropolis steps per kept draw.
    pub thin: usize,
    /// Overrides the stream supplied by the caller.
    pub seed: Option<u64>,
    /// Defaults to 0.44 for one parameter and 0.234 otherwise.
    pub target_accept: Option<f64>,
    pub rhat_max: f64,
    pub ess_min: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 2000,
            kept: 2000,
            thin: 4,
            seed: None,
            target_accept: None,
            rhat_max: 1.01,
            ess_min: 400.0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains < 2 {
            return Err(Error::config("MCMC needs at least 2 chains"));
        }
        if self.warmup < 100 || self.kept < 10 || self.thin == 0 {
            return Err(Error::config("MCMC needs warmup >= 100, kept >= 10 and thin >= 1"));
        }
        if let Some(a) = self.target_accept {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::config(format!("target acceptance {a} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct McmcOutput {
    /// `chains[c][i][j]`: chain c, kept draw i, parameter j.
    pub chains: Vec<Vec<Vec<f64>>>,
    pub acceptance: Vec<f64>,
    pub rhat: Vec<f64>,
    pub ess_bulk: Vec<f64>,
}

impl McmcOutput {
    /// Per-chain traces of parameter `j`.
    pub fn param(&self, j: usize) -> Vec<Vec<f64>> {
        self.chains.iter().map(|c| c.iter().map(|d| d[j]).collect()).collect()
    }

    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }
}

/// Fail with a diagnostics error if any trace misses the R̂ or ESS threshold.
pub fn check_convergence(traces: &[Vec<Vec<f64>>], cfg: &McmcConfig) -> Result<()> {
    let mut worst_rhat: f64 = 0.0;
    let mut worst_ess = f64::INFINITY;
    for t in traces {
        worst_rhat = worst_rhat.max(rhat(t));
        worst_ess = worst_ess.min(ess_bulk(t));
    }
    if worst_rhat > cfg.rhat_max || worst_ess < cfg.ess_min || worst_rhat.is_nan() {
        return Err(Error::Convergence {
            rhat: worst_rhat,
            ess: worst_ess,
            traces: Box::new(traces.to_vec()),
        });
    }
    Ok(())
}

struct Proposal {
    chol: DMatrix<f64>,
    log_scale: f64,
}

impl Proposal {
    fn step(&self, x: &[f64], rng: &mut RngStream) -> Vec<f64> {
        let d = x.len();
        let z = DVector::from_fn(d, |_, _| sample_standard_normal(rng));
        let dx = &self.chol * z * self.log_scale.exp();
        x.iter().zip(dx.iter()).map(|(a, b)| a + b).collect()
    }
}

fn metropolis(
    model: &dyn LogDensity,
    prop: &Proposal,
    x: &mut Vec<f64>,
    lp: &mut f64,
    rng: &mut RngStream,
) -> f64 {
    let y = prop.step(x, rng);
    let ly = model.log_density(&y);
    let alpha = if ly.is_finite() { (ly - *lp).exp().min(1.0) } else { 0.0 };
    if rng.random::<f64>() < alpha {
        *x = y;
        *lp = ly;
    }
    alpha
}

fn sample_cov(draws: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let n = draws.len();
    let d = draws.first()?.len();
    if n < d + 2 {
        return None;
    }
    let mean = DVector::from_fn(d, |j, _| draws.iter().map(|x| x[j]).sum::<f64>() / n as f64);
    let mut cov = DMatrix::zeros(d, d);
    for x in draws {
        let e = DVector::from_column_slice(x) - &mean;
        cov += &e * e.transpose();
    }
    cov /= (n - 1) as f64;
    if (0..d).any(|j| !(cov[(j, j)] > 0.0)) {
        return None;
    }
    let jitter = 1e-10 * cov.diagonal().max().max(1e-300);
    for j in 0..d {
        cov[(j, j)] += jitter;
    }
    Some(cov)
}

fn run_chain(
    model: &dyn LogDensity,
    init: &[f64],
    init_sd: &[f64],
    cfg: &McmcConfig,
    rng: &mut RngStream,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let d = init.len();
    let target = cfg.target_accept.unwrap_or(if d == 1 { 0.44 } else { 0.234 });

    let mut x = init.to_vec();
    let mut lp = model.log_density(&x);
    for _ in 0..100 {
        let cand: Vec<f64> =
            init.iter().zip(init_sd).map(|(m, s)| m + s * sample_standard_normal(rng)).collect();
        let lc = model.log_density(&cand);
        if lc.is_finite() {
            x = cand;
            lp = lc;
            break;
        }
    }
    if !lp.is_finite() {
        return Err(Error::domain("log density is not finite at the initial values"));
    }

    let mut prop = Proposal {
        chol: DMatrix::from_diagonal(&DVector::from_column_slice(init_sd)),
        log_scale: (2.38 / (d as f64).sqrt()).ln(),
    };
    let w = cfg.warmup;
    let ends = [w / 10, w / 5, 2 * w / 5, 4 * w / 5];
    let mut window: Vec<Vec<f64>> = Vec::new();
    let mut since_reset = 0usize;
    let mut late_accepts = 0.0;
    for t in 0..w {
        let alpha = metropolis(model, &prop, &mut x, &mut lp, rng);
        since_reset += 1;
        prop.log_scale += (since_reset as f64).powf(-0.6) * (alpha - target);
        prop.log_scale = prop.log_scale.clamp(-30.0, 10.0);
        if t >= w - w / 10 {
            late_accepts += alpha;
        }
        window.push(x.clone());
        if ends.contains(&(t + 1)) {
            if let Some(chol) = sample_cov(&window).and_then(|c| c.cholesky()) {
                prop.chol = chol.l();
                prop.log_scale = (2.38 / (d as f64).sqrt()).ln();
            }
            window.clear();
            since_reset = 0;
        }
    }
    if late_accepts == 0.0 {
        return Err(Error::Adaptation(format!(
            "no proposal accepted in the last {} warmup iterations",
            w / 10
        )));
    }

    let mut draws = Vec::with_capacity(cfg.kept);
    let mut acc = 0.0;
    for _ in 0..cfg.kept {
        for _ in 0..cfg.thin {
            acc += metropolis(model, &prop, &mut x, &mut lp, rng);
        }
        draws.push(x.clone());
    }
    Ok((draws, acc / (cfg.kept * cfg.thin) as f64))
}

/// Draw `cfg.chains` chains in parallel, each on its own substream of `rng`.
/// Chains start at `init` jittered by `init_sd`, which also sets the initial proposal.
pub fn mcmc_sample(
    model: &dyn LogDensity,
    init: &[f64],
    init_sd: &[f64],
    cfg: &McmcConfig,
    rng: &RngStream,
) -> Result<McmcOutput> {
    cfg.validate()?;
    let d = model.dim();
    if init.len() != d || init_sd.len() != d {
        return Err(Error::domain(format!("model has {d} parameters, initial values do not")));
    }
    if init_sd.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::domain("initial proposal scales must be positive"));
    }
    let base = cfg.seed.map_or_else(|| rng.clone(), |s| RngStream::new(s, rng.stream_id()));
    let runs: Vec<Result<(Vec<Vec<f64>>, f64)>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(model, init, init_sd, cfg, &mut base.substream(c as u64)))
        .collect();
    let mut chains = Vec::with_capacity(cfg.chains);
    let mut acceptance = Vec::with_capacity(cfg.chains);
    for r in runs {
        let (draws, acc) = r?;
        chains.push(draws);
        acceptance.push(acc);
    }
    let mut out = McmcOutput {
        chains,
        acceptance,
        rhat: Vec::new(),
        ess_bulk: Vec::new(),
    };
    for j in 0..d {
        let t = out.param(j);
        out.rhat.push(rhat(&t));
        out.ess_bulk.push(ess_bulk(&t));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Gauss {
        mean: Vec<f64>,
        prec: DMatrix<f64>,
    }

    impl LogDensity for Gauss {
        fn dim(&self) -> usize {
            self.mean.len()
        }
        fn log_density(&self, x: &[f64]) -> f64 {
            let e = DVector::from_iterator(x.len(), x.iter().zip(&self.mean).map(|(a, m)| a - m));
            -0.5 * (e.transpose() * &self.prec * &e)[(0, 0)]
        }
    }

    fn moments(v: &[f64]) -> (f64, f64) {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
    }

    #[test]
    fn standard_normal_target() {
        let g = Gauss {
            mean: vec![0.0],
            prec: DMatrix::identity(1, 1),
        };
        let out = mcmc_sample(&g, &[0.5], &[2.0], &McmcConfig::default(), &RngStream::new(1, 0)).unwrap();
        let all: Vec<f64> = out.param(0).concat();
        assert_eq!(all.len(), 8000);
        let (m, s) = moments(&all);
        assert!(m.abs() < 0.02 && (s - 1.0).abs() < 0.02, "{m} {s}");
        assert!(out.rhat[0] < 1.01 && out.ess_bulk[0] > 400.0);
    }

    #[test]
    fn correlated_bivariate_target() {
        let rho = 0.8;
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let g = Gauss {
            mean: vec![1.0, -2.0],
            prec: cov.try_inverse().unwrap(),
        };
        let out = mcmc_sample(&g, &[0.0, 0.0], &[1.0, 1.0], &McmcConfig::default(), &RngStream::new(2, 0)).unwrap();
        let a = out.param(0).concat();
        let b = out.param(1).concat();
        let (ma, sa) = moments(&a);
        let (mb, sb) = moments(&b);
        let r = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / ((a.len() - 1) as f64 * sa * sb);
        assert!((r - rho).abs() < 0.05, "{r}");
    }

    #[test]
    fn deterministic_given_stream() {
        let g = Gauss {
            mean: vec![0.0, 0.0],
            prec: DMatrix::identity(2, 2),
        };
        let cfg = McmcConfig {
            warmup: 200,
            kept: 100,
            ..McmcConfig::default()
        };
        let a = mcmc_sample(&g, &[0.0, 0.0], &[1.0, 1.0], &cfg, &RngStream::new(5, 1)).unwrap();
        let b = mcmc_sample(&g, &[0.0, 0.0], &[1.0, 1.0], &cfg, &RngStream::new(5, 1)).unwrap();
        assert_eq!(a.chains, b.chains);
    }

    struct Nowhere;
    impl LogDensity for Nowhere {
        fn dim(&self) -> usize {
            1
        }
        fn log_density(&self, x: &[f64]) -> f64 {
            if x[0] == 0.25 { 0.0 } else { f64::NEG_INFINITY }
        }
    }

    #[test]
    fn point_mass_fails_adaptation() {
        let out = mcmc_sample(&Nowhere, &[0.25], &[1.0], &McmcConfig::default(), &RngStream::new(1, 1));
        assert!(matches!(out, Err(Error::Adaptation(_))), "{out:?}");
    }

    #[test]
    fn bad_config() {
        let cfg = McmcConfig {
            chains: 1,
            ..McmcConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
