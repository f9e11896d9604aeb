use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::datagen::{Scale, TrialDataset};
use crate::error::{Error, Result};
use crate::ols::{ancova_row, design_from_rows, fit_ols, Endpoint, FitResult, TREATMENT_COL};
use crate::rngdist::RngStream;

/// Bootstrap resamples below which the covariance estimate is considered imprecise.
const MIN_PRECISE_B: usize = 500;

/// Per-subject ANCOVA rows with the two responses whose treatment effects are θ and ψ.
#[derive(Clone, Debug)]
pub struct JointInput {
    pub rows: Vec<[f64; 4]>,
    pub theta: Vec<Option<f64>>,
    pub psi: Vec<Option<f64>>,
}

impl JointInput {
    pub fn from_dataset(ds: &TrialDataset, scale: Scale, aux: Endpoint) -> Self {
        JointInput {
            rows: ds.records.iter().map(|r| ancova_row(r, scale)).collect(),
            theta: ds.records.iter().map(|r| r.outcome(scale)).collect(),
            psi: ds.records.iter().map(|r| aux.value(r, scale)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointMoments {
    pub theta: f64,
    pub psi: f64,
    pub var_theta: f64,
    pub var_psi: f64,
    /// Model-based SEs joined by the bootstrap correlation.
    pub cov: f64,
    pub boot_cov: f64,
    /// Monte Carlo standard error of `boot_cov`.
    pub boot_cov_se: f64,
    pub boot_corr: f64,
    pub b: usize,
}

fn effect_fit(input: &JointInput, idx: &[usize], theta: bool) -> Result<FitResult> {
    let col = if theta { &input.theta } else { &input.psi };
    let (mut rows, mut y) = (Vec::new(), Vec::new());
    for &i in idx {
        if let Some(v) = col[i] {
            rows.push(input.rows[i].to_vec());
            y.push(v);
        }
    }
    if rows.len() < 5 {
        return Err(Error::insufficient("ANCOVA", 5, rows.len()));
    }
    fit_ols(&design_from_rows(&rows), &DVector::from_vec(y))
}

pub fn joint_moments_from(
    input: &JointInput,
    b: usize,
    rng: &RngStream,
    strict: bool,
) -> Result<JointMoments> {
    if b < 2 {
        return Err(Error::domain(format!("joint moments need B >= 2, got {b}")));
    }
    if b < MIN_PRECISE_B {
        if strict {
            return Err(Error::domain(format!(
                "B = {b} bootstrap resamples is below the precision floor of {MIN_PRECISE_B}"
            )));
        }
        log::warn!("covariance bootstrap with B = {b} < {MIN_PRECISE_B} is imprecise");
    }
    let n = input.rows.len();
    let all: Vec<usize> = (0..n).collect();
    let ft = effect_fit(input, &all, true)?;
    let fp = effect_fit(input, &all, false)?;

    let pairs: Vec<Option<(f64, f64)>> = (0..b)
        .into_par_iter()
        .map(|k| {
            let mut s = rng.substream(k as u64);
            let idx: Vec<usize> = (0..n).map(|_| s.random_range(0..n)).collect();
            let t = effect_fit(input, &idx, true).ok()?;
            let p = effect_fit(input, &idx, false).ok()?;
            Some((t.coefficients[TREATMENT_COL], p.coefficients[TREATMENT_COL]))
        })
        .collect();
    let pairs: Vec<(f64, f64)> = pairs.into_iter().flatten().collect();
    let failed = b - pairs.len();
    if failed * 100 > b {
        return Err(Error::BootstrapFailures { failed, total: b });
    }
    let k = pairs.len() as f64;
    let mt = pairs.iter().map(|p| p.0).sum::<f64>() / k;
    let mp = pairs.iter().map(|p| p.1).sum::<f64>() / k;
    let products: Vec<f64> = pairs.iter().map(|p| (p.0 - mt) * (p.1 - mp)).collect();
    let boot_cov = products.iter().sum::<f64>() / (k - 1.0);
    let prod_mean = products.iter().sum::<f64>() / k;
    let boot_cov_se =
        (products.iter().map(|v| (v - prod_mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt();
    let vt = pairs.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>() / (k - 1.0);
    let vp = pairs.iter().map(|p| (p.1 - mp).powi(2)).sum::<f64>() / (k - 1.0);
    let boot_corr = (boot_cov / (vt * vp).sqrt()).clamp(-1.0, 1.0);

    let var_theta = ft.covariance[(TREATMENT_COL, TREATMENT_COL)];
    let var_psi = fp.covariance[(TREATMENT_COL, TREATMENT_COL)];
    Ok(JointMoments {
        theta: ft.coefficients[TREATMENT_COL],
        psi: fp.coefficients[TREATMENT_COL],
        var_theta,
        var_psi,
        cov: boot_corr * (var_theta * var_psi).sqrt(),
        boot_cov,
        boot_cov_se,
        boot_corr,
        b,
    })
}

/// θ̂ (final endpoint) and ψ̂ (`aux` endpoint) with their covariance.
pub fn joint_moments(
    ds: &TrialDataset,
    scale: Scale,
    aux: Endpoint,
    b: usize,
    rng: &RngStream,
    strict: bool,
) -> Result<JointMoments> {
    joint_moments_from(&JointInput::from_dataset(ds, scale, aux), b, rng, strict)
}
