use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF Φ(x) through the complementary error function.
pub fn normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("normal_cdf of non-finite {x}")));
    }
    Ok(std_cdf(x))
}

/// Φ⁻¹(p) for p strictly inside (0, 1).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("normal_quantile needs 0 < p < 1, got {p}")));
    }
    Ok(std_quantile(p))
}

pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Unchecked Φ; infinities map to 0 and 1.
pub fn std_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Unchecked Φ⁻¹ for p in (0, 1), polished with one Halley step.
pub fn std_quantile(p: f64) -> f64 {
    // Work in the tail closest to p so that 1 - p never loses digits.
    let (q, sign) = if p > 0.5 { (1.0 - p, -1.0) } else { (p, 1.0) };
    let mut x = -SQRT_2 * erfc_inv(2.0 * q);
    let err = std_cdf(x) - q;
    let d = normal_pdf(x);
    if d > 0.0 {
        let u = err / d;
        x -= u / (1.0 + 0.5 * x * u);
    }
    sign * x
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Φ by Taylor series of erf, summed in long form; independent of erfc.
    fn cdf_series(x: f64) -> f64 {
        let z = x / SQRT_2;
        let mut term = z;
        let mut sum = z;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -z * z / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        0.5 + sum / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn symmetry_and_known_points() {
        assert_eq!(normal_cdf(0.0).unwrap(), 0.5);
        assert!((normal_cdf(1.036).unwrap() - 0.85).abs() < 1e-3);
        let x = 1.959964;
        assert!((normal_cdf(x).unwrap() - cdf_series(x)).abs() < 1e-12);
    }

    #[test]
    fn matches_series_on_grid() {
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            assert!((std_cdf(x) - cdf_series(x)).abs() < 1e-12, "x={x} {} {}", std_cdf(x), cdf_series(x));
        }
    }

    #[test]
    fn non_finite_rejected() {
        assert!(normal_cdf(f64::NAN).is_err());
        assert!(normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn quantile_points() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!((normal_quantile(0.85).unwrap() - 1.036).abs() < 1e-3);
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn quantile_round_trip_grid() {
        let mut worst: f64 = 0.0;
        for i in 1..=1000 {
            let p = i as f64 / 1001.0;
            let back = normal_cdf(normal_quantile(p).unwrap()).unwrap();
            worst = worst.max((back - p).abs());
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn quantile_round_trip_tails() {
        let mut p = 1e-8;
        while p < 0.5 {
            for q in [p, 1.0 - p] {
                let back = std_cdf(std_quantile(q));
                assert!((back - q).abs() < 1e-10, "p={q}");
            }
            p *= 1.7;
        }
    }

    #[test]
    fn cdf_monotone() {
        let mut prev = 0.0;
        for i in -800..=800 {
            let v = std_cdf(i as f64 * 0.01);
            assert!(v >= prev);
            prev = v;
        }
    }
}
