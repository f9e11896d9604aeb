use nalgebra::{DMatrix, DVector};

use crate::datagen::{Scale, TrialDataset};
use crate::error::{Error, Result};
use crate::ols::{fit_ols, EffectEstimate};

/// Inputs for double regression. Row `i` is a subject with the intermediate
/// endpoint observed; `outcome[i]` is present for complete cases.
#[derive(Clone, Debug)]
pub struct DRegData {
    /// Covariates T without the intercept.
    pub covariates: Vec<Vec<f64>>,
    pub intermediate: Vec<f64>,
    pub outcome: Vec<Option<f64>>,
    /// Index into `covariates` of the treatment indicator.
    pub effect_col: usize,
}

impl DRegData {
    /// T = (baseline, X, R) for every subject with the 12-month value.
    pub fn from_dataset(ds: &TrialDataset, scale: Scale) -> Self {
        let mut covariates = Vec::new();
        let mut intermediate = Vec::new();
        let mut outcome = Vec::new();
        for r in &ds.records {
            if let Some(z) = r.intermediate(scale) {
                covariates.push(vec![r.baseline(scale), r.x, r.arm as f64]);
                intermediate.push(z);
                outcome.push(r.outcome(scale));
            }
        }
        DRegData {
            covariates,
            intermediate,
            outcome,
            effect_col: 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DRegComponents {
    /// Z ~ 1 + T on the m_Z cases.
    pub b_z: DVector<f64>,
    pub b_z_cov: DMatrix<f64>,
    /// Y ~ 1 + T + Z on the m cases; the last coefficient is γ.
    pub beta: DVector<f64>,
    pub beta_cov: DMatrix<f64>,
    pub gamma: f64,
    pub pi: f64,
    pub rho_hat: f64,
    pub m: usize,
    pub m_z: usize,
    effect_idx: usize,
}

impl DRegComponents {
    pub fn estimate(&self) -> f64 {
        self.beta[self.effect_idx] + self.gamma * self.b_z[self.effect_idx]
    }

    /// Delta-method variance with the two regressions treated as independent.
    pub fn variance(&self) -> f64 {
        let j = self.effect_idx;
        let g = self.beta.len() - 1;
        let b = self.b_z[j];
        self.beta_cov[(j, j)]
            + self.gamma * self.gamma * self.b_z_cov[(j, j)]
            + b * b * self.beta_cov[(g, g)]
            + 2.0 * b * self.beta_cov[(j, g)]
    }

    pub fn b_z_effect(&self) -> f64 {
        self.b_z[self.effect_idx]
    }
}

fn with_intercept(rows: impl Iterator<Item = Vec<f64>>) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = rows.map(|r| std::iter::once(1.0).chain(r).collect()).collect();
    crate::ols::design_from_rows(&rows)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

pub fn double_regression_components_from(data: &DRegData) -> Result<DRegComponents> {
    let m_z = data.covariates.len();
    let q = data.covariates.first().map_or(0, Vec::len);
    if data.intermediate.len() != m_z || data.outcome.len() != m_z || data.effect_col >= q {
        return Err(Error::domain("inconsistent double regression inputs"));
    }
    let p = q + 1;
    let complete: Vec<usize> = (0..m_z).filter(|&i| data.outcome[i].is_some()).collect();
    let m = complete.len();
    if m_z < p + 2 {
        return Err(Error::insufficient("intermediate regression", p + 2, m_z));
    }
    if m < p + 3 {
        return Err(Error::insufficient("outcome regression", p + 3, m));
    }

    let dz = with_intercept(data.covariates.iter().cloned());
    let fz = fit_ols(&dz, &DVector::from_column_slice(&data.intermediate))?;

    let dy = with_intercept(complete.iter().map(|&i| {
        let mut row = data.covariates[i].clone();
        row.push(data.intermediate[i]);
        row
    }));
    let y = DVector::from_iterator(m, complete.iter().map(|&i| data.outcome[i].unwrap()));
    let fy = fit_ols(&dy, &y)?;

    let dt = with_intercept(complete.iter().map(|&i| data.covariates[i].clone()));
    let zc = DVector::from_iterator(m, complete.iter().map(|&i| data.intermediate[i]));
    let ry = &y - &dt * fit_ols(&dt, &y)?.coefficients;
    let rz = &zc - &dt * fit_ols(&dt, &zc)?.coefficients;

    let gamma = fy.coefficients[p];
    Ok(DRegComponents {
        b_z: fz.coefficients,
        b_z_cov: fz.covariance,
        beta: fy.coefficients,
        beta_cov: fy.covariance,
        gamma,
        pi: m as f64 / m_z as f64,
        rho_hat: pearson(ry.as_slice(), rz.as_slice()),
        m,
        m_z,
        effect_idx: data.effect_col + 1,
    })
}

pub fn double_regression_components(ds: &TrialDataset, scale: Scale) -> Result<DRegComponents> {
    double_regression_components_from(&DRegData::from_dataset(ds, scale))
}

/// Treatment effect on the final endpoint borrowing strength from the intermediate one.
pub fn double_regression(ds: &TrialDataset, scale: Scale) -> Result<EffectEstimate> {
    let c = double_regression_components(ds, scale)?;
    let var = c.variance();
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance(format!("double regression variance {var}")));
    }
    Ok(EffectEstimate {
        estimate: c.estimate(),
        se: var.sqrt(),
        scale,
        n_used: c.m,
    })
}
