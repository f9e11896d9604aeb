use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-10;

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug)]
pub struct LogisticFit {
    pub coefficients: DVector<f64>,
    pub iterations: usize,
}

impl LogisticFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        expit(row.iter().zip(self.coefficients.iter()).map(|(a, b)| a * b).sum())
    }
}

/// Logistic regression by IRLS. Responses may be fractional in [0, 1].
pub fn fit_logistic(design: &DMatrix<f64>, response: &DVector<f64>) -> Result<LogisticFit> {
    let (n, p) = design.shape();
    if response.len() != n {
        return Err(Error::domain("design and response lengths differ"));
    }
    if n <= p {
        return Err(Error::insufficient("logistic fit", p + 1, n));
    }
    if response.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::domain("logistic response outside [0, 1]"));
    }
    let mut beta = DVector::zeros(p);
    for iter in 1..=MAX_ITER {
        let eta = design * &beta;
        let mu = eta.map(expit);
        let w = mu.map(|m| (m * (1.0 - m)).max(1e-12));
        let mut xtwx = DMatrix::zeros(p, p);
        for i in 0..n {
            let row = design.row(i);
            xtwx += row.transpose() * row * w[i];
        }
        let score = design.transpose() * (response - &mu);
        let step = xtwx
            .cholesky()
            .ok_or_else(|| Error::domain("logistic information matrix not positive definite"))?
            .solve(&score);
        beta += &step;
        if beta.iter().any(|b| !b.is_finite() || b.abs() > 50.0) {
            return Err(Error::domain("logistic fit diverged (separation)"));
        }
        if step.amax() < TOL * (1.0 + beta.amax()) {
            return Ok(LogisticFit {
                coefficients: beta,
                iterations: iter,
            });
        }
    }
    Err(Error::domain("logistic fit did not converge"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_only_recovers_logit_of_mean() {
        let y = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        let x = DMatrix::from_element(8, 1, 1.0);
        let fit = fit_logistic(&x, &y).unwrap();
        let p: f64 = 5.0 / 8.0;
        assert!((fit.coefficients[0] - (p / (1.0 - p)).ln()).abs() < 1e-10);
    }

    #[test]
    fn score_equations_hold() {
        let n = 60;
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { (i as f64 * 0.37).sin() });
        let y = DVector::from_fn(n, |i, _| if (i * 7 + 3) % 5 < 2 { 1.0 } else { 0.0 });
        let fit = fit_logistic(&x, &y).unwrap();
        let mu = (&x * &fit.coefficients).map(expit);
        let score = x.transpose() * (y - mu);
        assert!(score.amax() < 1e-8);
    }

    #[test]
    fn separation_detected() {
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = DVector::from_fn(10, |i, _| if i >= 5 { 1.0 } else { 0.0 });
        assert!(fit_logistic(&x, &y).is_err());
    }

    #[test]
    fn expit_is_stable() {
        assert_eq!(expit(0.0), 0.5);
        assert!(expit(-800.0) >= 0.0 && expit(800.0) <= 1.0);
    }
}
