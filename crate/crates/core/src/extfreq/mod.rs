//! Frequentist combination of the trial's estimate with an external auxiliary
//! statistic: minimum variance (MVAR) and minimum MSE (MMSE) weighting.

mod combine;
mod inference;
mod moments;

pub use combine::{
    mmse_combine, mvar_combine, CombinationInput, CombineMethod, CombinedEstimate, StatLabel,
    SummaryStat,
};
pub use inference::{mmse_bootstrap_inference, mmse_with_inference, MmseInference};
pub use moments::{joint_moments, joint_moments_from, JointInput, JointMoments};
