//! Least squares by Householder QR and the complete-case ANCOVA built on it.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::datagen::{Scale, SubjectRecord, TrialDataset};
use crate::error::{Error, Result};
use crate::rngdist::std_cdf;

/// Relative pivot size below which a design column counts as dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct FitResult {
    pub coefficients: DVector<f64>,
    /// σ̂² (XᵀX)⁻¹.
    pub covariance: DMatrix<f64>,
    pub residual_sd: f64,
    pub n_used: usize,
    pub dof: usize,
}

impl FitResult {
    pub fn se(&self, j: usize) -> f64 {
        self.covariance[(j, j)].sqrt()
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        row.iter().zip(self.coefficients.iter()).map(|(a, b)| a * b).sum()
    }
}

/// Ordinary least squares of `response` on the columns of `design`.
pub fn fit_ols(design: &DMatrix<f64>, response: &DVector<f64>) -> Result<FitResult> {
    let (n, p) = design.shape();
    if response.len() != n {
        return Err(Error::domain(format!(
            "design has {n} rows but response has {}",
            response.len()
        )));
    }
    if n < p + 1 {
        return Err(Error::insufficient("least squares fit", p + 1, n));
    }
    if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite value in least squares input"));
    }

    let qr = design.clone().qr();
    let r = qr.r();
    for j in 0..p {
        let col_norm = design.column(j).norm();
        if col_norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * col_norm {
            return Err(Error::SingularDesign { column: j });
        }
    }
    let qty = qr.q().transpose() * response;
    let coefficients = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::SingularDesign { column: p - 1 })?;

    let residuals = response - design * &coefficients;
    let dof = n - p;
    let sigma2 = residuals.norm_squared() / dof as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::SingularDesign { column: p - 1 })?;
    let covariance = (&r_inv * r_inv.transpose()) * sigma2;

    Ok(FitResult {
        coefficients,
        covariance,
        residual_sd: sigma2.sqrt(),
        n_used: n,
        dof,
    })
}

/// Build a design matrix from row vectors.
pub fn design_from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let p = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j])
}

/// A treatment effect with its standard error, normal-reference inference.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EffectEstimate {
    pub estimate: f64,
    pub se: f64,
    pub scale: Scale,
    pub n_used: usize,
}

impl EffectEstimate {
    pub fn z(&self) -> f64 {
        self.estimate / self.se
    }

    pub fn p_value(&self) -> f64 {
        2.0 * std_cdf(-self.z().abs())
    }

    pub fn ci95(&self) -> (f64, f64) {
        let h = 1.959_963_984_540_054 * self.se;
        (self.estimate - h, self.estimate + h)
    }
}

/// Which follow-up measurement a model treats as its response.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Intermediate,
    Final,
}

impl Endpoint {
    pub fn value(self, r: &SubjectRecord, scale: Scale) -> Option<f64> {
        match self {
            Endpoint::Intermediate => r.intermediate(scale),
            Endpoint::Final => r.outcome(scale),
        }
    }
}

/// Columns of the ANCOVA design: intercept, baseline, X, R.
pub fn ancova_row(r: &SubjectRecord, scale: Scale) -> [f64; 4] {
    [1.0, r.baseline(scale), r.x, r.arm as f64]
}

/// Column index of the treatment indicator in [`ancova_row`].
pub const TREATMENT_COL: usize = 3;

/// ANCOVA of `endpoint` on baseline, X and R over `records` having that endpoint.
pub fn ancova_fit<'a>(
    records: impl IntoIterator<Item = &'a SubjectRecord>,
    scale: Scale,
    endpoint: Endpoint,
) -> Result<FitResult> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for r in records {
        if let Some(v) = endpoint.value(r, scale) {
            rows.push(ancova_row(r, scale).to_vec());
            y.push(v);
        }
    }
    if rows.len() < 5 {
        return Err(Error::insufficient("ANCOVA", 5, rows.len()));
    }
    fit_ols(&design_from_rows(&rows), &DVector::from_vec(y))
}

/// Treatment effect on the final endpoint among subjects with it observed.
pub fn ancova_complete_case(ds: &TrialDataset, scale: Scale) -> Result<EffectEstimate> {
    let fit = ancova_fit(&ds.records, scale, Endpoint::Final)?;
    Ok(EffectEstimate {
        estimate: fit.coefficients[TREATMENT_COL],
        se: fit.se(TREATMENT_COL),
        scale,
        n_used: fit.n_used,
    })
}
