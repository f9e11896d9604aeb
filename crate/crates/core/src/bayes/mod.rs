//! Bayesian borrowing from external trials: commensurability-discounted power
//! prior, joint hierarchical model and two-stage meta-analysis.

mod diagnostics;
mod hellinger;
mod hier;
mod mac;
mod mcmc;
mod power;
mod priors;
mod summary;

pub use diagnostics::{ess_bulk, ess_mean, rhat};
pub use hellinger::{hellinger_commensurability, lambda_from_tau, Commensurability, NormalApprox};
pub use hier::{hierarchical_fit, DrawTable, HierFit, HierParams, TrialStats};
pub use mac::mac_fit;
pub use mcmc::{check_convergence, mcmc_sample, LogDensity, McmcConfig, McmcOutput};
pub use power::{power_prior_posterior, PowerPosterior};
pub use priors::{HierPriors, TauPrior, XiPrior};
pub use summary::PosteriorSummary;
