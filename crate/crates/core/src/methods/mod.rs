//! Analysis methods behind a common trait, looked up by name at run time.

mod builtin;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bayes::{DrawTable, McmcConfig};
use crate::datagen::{Scale, TrialDataset};
use crate::error::{Error, Result};
use crate::internal::WorkingModels;
use crate::rngdist::RngStream;

pub use builtin::{
    Aipw, CompleteCase, DoubleRegression, FullData, Hierarchical, Mac, Mmse, Mvar, Power,
};

/// External information: individual data or a published summary.
#[derive(Clone, Debug, PartialEq)]
pub enum ExternalEvidence {
    Ipd(TrialDataset),
    Summary { estimate: f64, variance: f64, n: usize },
}

/// Everything a method may draw on in one replication.
#[derive(Clone, Copy, Debug)]
pub struct Evidence<'a> {
    pub current: &'a TrialDataset,
    /// The current trial before any data were lost, when known.
    pub full: Option<&'a TrialDataset>,
    pub external: Option<&'a ExternalEvidence>,
    pub external_label: &'a str,
}

/// Which main-data effect plays the role of ψ̂ in MVAR/MMSE.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuxTarget {
    /// ψ = θ: the external trial reports the same 24-month effect.
    #[default]
    Final,
    Intermediate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodSettings {
    pub bootstrap_b: usize,
    pub parametric_b: usize,
    pub mcmc: McmcConfig,
    pub strict: bool,
    /// Subjects whose information the power prior stands in for; defaults to n − m.
    pub n_missing: Option<usize>,
    pub aux_target: AuxTarget,
    pub working_models: WorkingModels,
    pub null_theta: f64,
    pub keep_draws: bool,
}

impl Default for MethodSettings {
    fn default() -> Self {
        Self {
            bootstrap_b: 2000,
            parametric_b: 4000,
            mcmc: McmcConfig::default(),
            strict: false,
            n_missing: None,
            aux_target: AuxTarget::Final,
            working_models: WorkingModels::default(),
            null_theta: 0.0,
            keep_draws: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodFamily {
    Frequentist,
    Bayesian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodOutput {
    /// Estimate, or posterior mean.
    pub estimate: f64,
    /// Standard error, or posterior SD.
    pub se: f64,
    pub p_value: Option<f64>,
    pub pr_ge_zero: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub delta_sq: Option<f64>,
    pub draws: Option<DrawTable>,
}

pub trait Method: Send + Sync {
    fn name(&self) -> &'static str;
    fn family(&self) -> MethodFamily;
    fn needs_external(&self) -> bool {
        false
    }
    /// Short description of the auxiliary information used.
    fn auxiliary<'a>(&self, external_label: &'a str) -> &'a str {
        if self.needs_external() { external_label } else { "none" }
    }
    fn run(
        &self,
        ev: &Evidence<'_>,
        scale: Scale,
        settings: &MethodSettings,
        rng: &RngStream,
    ) -> Result<MethodOutput>;
}

#[derive(Clone, Default)]
pub struct MethodRegistry {
    methods: BTreeMap<String, Arc<dyn Method>>,
}

impl MethodRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(CompleteCase));
        r.register(Arc::new(FullData));
        r.register(Arc::new(DoubleRegression));
        r.register(Arc::new(Aipw));
        r.register(Arc::new(Mvar));
        r.register(Arc::new(Mmse));
        r.register(Arc::new(Power));
        r.register(Arc::new(Hierarchical));
        r.register(Arc::new(Mac));
        r
    }

    /// Add or replace a method under its own name.
    pub fn register(&mut self, method: Arc<dyn Method>) {
        self.methods.insert(method.name().to_string(), method);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Method>> {
        self.methods
            .get(name)
            .or_else(|| {
                self.methods
                    .iter()
                    .find(|(k, _)| k.eq_ignore_ascii_case(name))
                    .map(|(_, v)| v)
            })
            .cloned()
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown method `{name}`; available: {}",
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&str> {
        self.methods.keys().map(String::as_str).collect()
    }
}
