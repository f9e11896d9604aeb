//! Reproducible random streams and the normal-distribution machinery the
//! generators and samplers share.

mod normal;
mod sample;
mod stream;

pub use normal::{normal_cdf, normal_pdf, normal_quantile, std_cdf, std_quantile};
pub use sample::{
    sample_bivariate_normal, sample_half_t, sample_standard_normal, sample_truncated_normal,
};
pub use stream::RngStream;
