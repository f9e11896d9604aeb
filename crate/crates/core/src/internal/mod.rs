//! Estimators that recover information from the disrupted trial's own
//! intermediate endpoint and baseline covariates.

mod aipw;
mod dreg;
mod glm;
mod marschner;

pub use aipw::{
    aipw, aipw_effect, aipw_variance_bootstrap, AipwComponents, AipwData, AipwWeights,
    OutcomeKind, WorkingModels,
};
pub use dreg::{
    double_regression, double_regression_components, double_regression_components_from,
    DRegComponents, DRegData,
};
pub use glm::{expit, fit_logistic, LogisticFit};
pub use marschner::{marschner_binary, BinaryAuxEstimate};
