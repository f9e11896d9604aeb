use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prior on the common mean ξ of the exchangeable treatment effects.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiPrior {
    Normal { sd: f64 },
    Flat,
}

/// Prior on the between-trial SD τ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauPrior {
    HalfNormal { scale: f64 },
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierPriors {
    pub xi: XiPrior,
    pub tau: TauPrior,
    /// SD of the normal priors on the nuisance regression coefficients.
    pub coef_sd: f64,
    pub sigma_df: f64,
    pub sigma_scale: f64,
}

impl HierPriors {
    /// Default priors with a half-normal τ of scale `sigma_unit / 4`.
    pub fn with_unit_sd(sigma_unit: f64) -> Self {
        HierPriors {
            xi: XiPrior::Normal { sd: 10.0 },
            tau: TauPrior::HalfNormal {
                scale: sigma_unit / 4.0,
            },
            coef_sd: 10.0,
            sigma_df: 3.0,
            sigma_scale: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.xi {
            XiPrior::Normal { sd } => sd > 0.0 && sd.is_finite(),
            XiPrior::Flat => true,
        } && match self.tau {
            TauPrior::HalfNormal { scale } => scale > 0.0 && scale.is_finite(),
            TauPrior::Fixed(t) => t >= 0.0 && t.is_finite(),
        } && self.coef_sd > 0.0
            && self.sigma_df > 0.0
            && self.sigma_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid hierarchical priors {self:?}")))
        }
    }

    pub(super) fn log_xi(&self, xi: f64) -> f64 {
        match self.xi {
            XiPrior::Normal { sd } => -0.5 * (xi / sd).powi(2),
            XiPrior::Flat => 0.0,
        }
    }

    /// Prior precision of ξ (0 when flat).
    pub(super) fn xi_precision(&self) -> f64 {
        match self.xi {
            XiPrior::Normal { sd } => 1.0 / (sd * sd),
            XiPrior::Flat => 0.0,
        }
    }

    /// Number of sampled coordinates for τ (0 when fixed).
    pub(super) fn tau_dims(&self) -> usize {
        usize::from(matches!(self.tau, TauPrior::HalfNormal { .. }))
    }

    /// τ and the log prior density of log τ at `p`, the τ coordinate if any.
    pub(super) fn tau_at(&self, p: Option<f64>) -> (f64, f64) {
        match (self.tau, p) {
            (TauPrior::Fixed(t), _) => (t, 0.0),
            (TauPrior::HalfNormal { scale }, Some(lt)) => {
                let t = lt.exp();
                (t, -0.5 * (t / scale).powi(2) + lt)
            }
            (TauPrior::HalfNormal { .. }, None) => unreachable!("τ coordinate missing"),
        }
    }

    /// Half-t log density of log σ, up to a constant.
    pub(super) fn log_sigma(&self, log_sigma: f64) -> f64 {
        let s = log_sigma.exp() / self.sigma_scale;
        -0.5 * (self.sigma_df + 1.0) * (1.0 + s * s / self.sigma_df).ln() + log_sigma
    }
}
