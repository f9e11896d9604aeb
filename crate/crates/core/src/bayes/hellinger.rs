use crate::error::{Error, Result};

/// Normal approximation to a likelihood or marginal posterior for θ.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalApprox {
    pub mean: f64,
    pub sd: f64,
    /// Sample size behind the approximation.
    pub n: usize,
}

impl NormalApprox {
    pub fn new(mean: f64, sd: f64, n: usize) -> Result<Self> {
        let a = NormalApprox { mean, sd, n };
        a.validate()?;
        Ok(a)
    }

    fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() || !(self.sd > 0.0) || !self.sd.is_finite() {
            return Err(Error::domain(format!(
                "normal approximation needs finite mean and sd > 0, got ({}, {})",
                self.mean, self.sd
            )));
        }
        if self.n == 0 {
            return Err(Error::domain("normal approximation needs n >= 1"));
        }
        Ok(())
    }

    pub fn variance(&self) -> f64 {
        self.sd * self.sd
    }

    /// SD of one observation's worth of information: sd·√n.
    pub fn unit_information_sd(&self) -> f64 {
        self.sd * (self.n as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Commensurability {
    pub delta: f64,
    pub delta_sq: f64,
    /// Exponent applied to the first likelihood, min(1, n_b/n_a).
    pub exponent_a: f64,
    pub exponent_b: f64,
}

impl Commensurability {
    /// Δ^c.
    pub fn power(&self, c: f64) -> f64 {
        self.delta.powf(c)
    }
}

/// Hellinger distance between the two normalized likelihoods after the
/// larger-sample one is flattened to the smaller sample size.
pub fn hellinger_commensurability(a: &NormalApprox, b: &NormalApprox) -> Result<Commensurability> {
    a.validate()?;
    b.validate()?;
    let (na, nb) = (a.n as f64, b.n as f64);
    let exponent_a = (nb / na).min(1.0);
    let exponent_b = (na / nb).min(1.0);
    let va = a.variance() / exponent_a;
    let vb = b.variance() / exponent_b;
    let (sa, sb) = (va.sqrt(), vb.sqrt());
    let sum = va + vb;
    let h_sq = 1.0 - (2.0 * sa * sb / sum).sqrt() * (-(a.mean - b.mean).powi(2) / (4.0 * sum)).exp();
    let delta_sq = h_sq.clamp(0.0, 1.0);
    Ok(Commensurability {
        delta: delta_sq.sqrt(),
        delta_sq,
        exponent_a,
        exponent_b,
    })
}

/// Power-prior weight implied by between-trial SD τ: 1 / (1 + 2 n τ² / σ²).
pub fn lambda_from_tau(tau: f64, n_d: usize, sigma_d: f64) -> Result<f64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::domain(format!("tau must be finite and >= 0, got {tau}")));
    }
    if !(sigma_d > 0.0) || !sigma_d.is_finite() || n_d == 0 {
        return Err(Error::domain("lambda_from_tau needs sigma > 0 and n >= 1"));
    }
    Ok(1.0 / (1.0 + 2.0 * n_d as f64 * tau * tau / (sigma_d * sigma_d)))
}
