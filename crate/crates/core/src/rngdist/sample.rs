use rand::distr::{Distribution, Open01};
use rand_distr::{Exp1, StandardNormal, StudentT};

use super::normal::{std_cdf, std_quantile};
use super::stream::RngStream;
use crate::error::{Error, Result};

pub fn sample_standard_normal(rng: &mut RngStream) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws from N(mean, sd²) restricted to `[lower, ∞)` by inverse-CDF transform
/// on the upper tail. `lower = -∞` gives the untruncated law.
pub fn sample_truncated_normal(
    rng: &mut RngStream,
    mean: f64,
    sd: f64,
    lower: f64,
    n: usize,
) -> Result<Vec<f64>> {
    if !(sd > 0.0) || !sd.is_finite() || !mean.is_finite() {
        return Err(Error::domain(format!("truncated normal needs sd > 0, got {sd}")));
    }
    if lower.is_nan() || lower == f64::INFINITY {
        return Err(Error::domain("truncation bound must be < +inf"));
    }
    let a = (lower - mean) / sd;
    if a > TAIL_SWITCH {
        return Ok((0..n).map(|_| mean + sd * sample_std_tail(rng, a)).collect());
    }
    let upper_mass = std_cdf(-a);
    Ok((0..n)
        .map(|_| {
            let v: f64 = Open01.sample(rng);
            let z = -std_quantile(upper_mass * v);
            (mean + sd * z).max(lower)
        })
        .collect())
}

/// Above this standardized bound the inverse-CDF route loses precision.
const TAIL_SWITCH: f64 = 5.0;

/// Standard normal restricted to `[a, ∞)`, exponential-proposal rejection.
fn sample_std_tail(rng: &mut RngStream, a: f64) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let z = a + e / rate;
        let u: f64 = Open01.sample(rng);
        if u.ln() <= -0.5 * (z - rate) * (z - rate) {
            return z;
        }
    }
}

/// `n` pairs from a bivariate normal with common marginal sd and correlation rho.
pub fn sample_bivariate_normal(
    rng: &mut RngStream,
    means: (f64, f64),
    sd: f64,
    rho: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    if !(rho.abs() < 1.0) {
        return Err(Error::domain(format!("correlation must satisfy |rho| < 1, got {rho}")));
    }
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::domain(format!("sd must be positive, got {sd}")));
    }
    let tail = (1.0 - rho * rho).sqrt();
    Ok((0..n)
        .map(|_| {
            let z1 = sample_standard_normal(rng);
            let z2 = sample_standard_normal(rng);
            (means.0 + sd * z1, means.1 + sd * (rho * z1 + tail * z2))
        })
        .collect())
}

/// |scale · T| with T ~ Student-t(df).
pub fn sample_half_t(rng: &mut RngStream, df: u32, scale: f64, n: usize) -> Result<Vec<f64>> {
    if df < 1 {
        return Err(Error::domain("half-t needs df >= 1"));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::domain(format!("half-t needs scale > 0, got {scale}")));
    }
    let t = StudentT::new(df as f64).map_err(|e| Error::domain(e.to_string()))?;
    Ok((0..n).map(|_| (scale * t.sample(rng)).abs()).collect())
}
