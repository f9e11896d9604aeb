use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rngdist::std_cdf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatLabel {
    ThetaHat,
    PsiHatInternal,
    PsiCheckExternal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub estimate: f64,
    pub variance: f64,
    pub n: usize,
    pub label: StatLabel,
}

impl SummaryStat {
    pub fn new(estimate: f64, variance: f64, n: usize, label: StatLabel) -> Result<Self> {
        if !estimate.is_finite() {
            return Err(Error::domain("summary estimate must be finite"));
        }
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::DegenerateVariance(format!("{label:?} variance {variance}")));
        }
        Ok(Self {
            estimate,
            variance,
            n,
            label,
        })
    }
}

/// θ̂ with its covariance to ψ̂ from the main data, and the independent external ψ̌.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinationInput {
    pub theta: SummaryStat,
    pub psi_hat: SummaryStat,
    pub cov_theta_psi: f64,
    pub psi_check: SummaryStat,
}

impl CombinationInput {
    pub fn delta_hat(&self) -> f64 {
        self.psi_hat.estimate - self.psi_check.estimate
    }

    /// var(δ̂) = var(ψ̂) + var(ψ̌).
    pub fn delta_variance(&self) -> f64 {
        self.psi_hat.variance + self.psi_check.variance
    }

    fn validate(&self) -> Result<()> {
        for s in [&self.theta, &self.psi_hat, &self.psi_check] {
            if !(s.variance > 0.0) || !s.variance.is_finite() || !s.estimate.is_finite() {
                return Err(Error::DegenerateVariance(format!(
                    "{:?}: estimate {}, variance {}",
                    s.label, s.estimate, s.variance
                )));
            }
        }
        if !self.cov_theta_psi.is_finite() {
            return Err(Error::domain("cov(θ̂, ψ̂) must be finite"));
        }
        let bound = (self.theta.variance * self.psi_hat.variance).sqrt();
        if self.cov_theta_psi.abs() > bound * (1.0 + 1e-9) {
            return Err(Error::domain(format!(
                "cov(θ̂, ψ̂) = {} exceeds the Cauchy-Schwarz bound {bound}",
                self.cov_theta_psi
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CombineMethod {
    #[serde(rename = "MVAR")]
    Mvar,
    #[serde(rename = "MMSE")]
    Mmse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CombinedEstimate {
    pub estimate: f64,
    /// MVAR: standard deviation. MMSE: plug-in root mean squared error.
    pub se: f64,
    pub lambda: f64,
    pub delta_hat: f64,
    pub method: CombineMethod,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub p_value: Option<f64>,
    pub bootstrap_b: Option<usize>,
}

const Z975: f64 = 1.959_963_984_540_054;

/// θ̂ − Λδ̂ for Λ = c / denom.
pub(super) fn combine_with(input: &CombinationInput, denom: f64) -> (f64, f64) {
    let lambda = input.cov_theta_psi / denom;
    (input.theta.estimate - lambda * input.delta_hat(), lambda)
}

pub fn mvar_combine(input: &CombinationInput) -> Result<CombinedEstimate> {
    input.validate()?;
    let v = input.delta_variance();
    let (estimate, lambda) = combine_with(input, v);
    let var = (input.theta.variance - input.cov_theta_psi.powi(2) / v).max(0.0);
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance(
            "MVAR variance vanishes (θ̂ fully determined by ψ̂)".into(),
        ));
    }
    let se = var.sqrt();
    Ok(CombinedEstimate {
        estimate,
        se,
        lambda,
        delta_hat: input.delta_hat(),
        method: CombineMethod::Mvar,
        ci_low: Some(estimate - Z975 * se),
        ci_high: Some(estimate + Z975 * se),
        p_value: Some(2.0 * std_cdf(-(estimate / se).abs())),
        bootstrap_b: None,
    })
}

/// Point estimate and plug-in root-MSE; interval and p-value come from
/// [`super::mmse_with_inference`].
pub fn mmse_combine(input: &CombinationInput) -> Result<CombinedEstimate> {
    input.validate()?;
    let d = input.delta_hat();
    let denom = input.delta_variance() + d * d;
    let (estimate, lambda) = combine_with(input, denom);
    let mse = input.theta.variance - input.cov_theta_psi.powi(2) / denom;
    if !(mse > 0.0) {
        return Err(Error::DegenerateVariance("MMSE mean squared error vanishes".into()));
    }
    Ok(CombinedEstimate {
        estimate,
        se: mse.sqrt(),
        lambda,
        delta_hat: d,
        method: CombineMethod::Mmse,
        ci_low: None,
        ci_high: None,
        p_value: None,
        bootstrap_b: None,
    })
}
