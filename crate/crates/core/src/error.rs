use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    /// A dataset cannot satisfy a request (e.g. more missing values than subjects).
    #[error("state error: {0}")]
    State(String),

    #[error("insufficient data: {what} needs {needed}, have {have}")]
    InsufficientData {
        what: String,
        needed: usize,
        have: usize,
    },

    #[error("singular design: column {column} is linearly dependent on earlier columns")]
    SingularDesign { column: usize },

    #[error("empty stratum: no subjects with {0} among the paired observations")]
    EmptyStratum(&'static str),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("model failure in arm {arm}: {source}")]
    ArmModel {
        arm: u8,
        #[source]
        source: Box<Error>,
    },

    #[error("too many failed bootstrap resamples: {failed} of {total}")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("sampler adaptation failed: {0}")]
    Adaptation(String),

    #[error("MCMC did not converge: max rhat {rhat:.4}, min bulk-ESS {ess:.1}")]
    Convergence {
        rhat: f64,
        ess: f64,
        /// Per-chain traces of the offending run, one vector per parameter per chain.
        traces: Box<Vec<Vec<Vec<f64>>>>,
    },

    #[error("{method} [{scale}]: {source}")]
    Method {
        method: String,
        scale: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn insufficient(what: impl Into<String>, needed: usize, have: usize) -> Self {
        Error::InsufficientData {
            what: what.into(),
            needed,
            have,
        }
    }

    /// True for errors caused by the user's configuration rather than the numerics.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Io(_) => true,
            Error::Method { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
