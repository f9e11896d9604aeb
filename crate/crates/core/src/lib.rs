//! Estimators and borrowing methods for randomized trials with a partly missing final outcome.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.
pub mod bayes;
pub mod datagen;
pub mod error;
pub mod extfreq;
pub mod internal;
pub mod methods;
pub mod ols;
pub mod report;
pub mod rngdist;
pub mod scenario;

pub use datagen::{Scale, SubjectRecord, TrialDataset};
pub use error::{Error, Result};
