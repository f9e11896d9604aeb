use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::glm::{expit, fit_logistic};
use crate::datagen::{Scale, TrialDataset};
use crate::error::{Error, Result};
use crate::ols::{design_from_rows, fit_ols, EffectEstimate};
use crate::rngdist::RngStream;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    #[default]
    Continuous,
    Binary,
}

/// Terms of the two working regressions beyond their intercepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkingModels {
    /// Outcome model h includes the intermediate endpoint.
    pub stage1_intermediate: bool,
    /// Outcome model h includes the baseline covariates.
    pub stage1_covariates: bool,
    /// Prediction model g includes the baseline covariates.
    pub stage2_covariates: bool,
}

impl Default for WorkingModels {
    fn default() -> Self {
        Self {
            stage1_intermediate: true,
            stage1_covariates: true,
            stage2_covariates: true,
        }
    }
}

/// One entry per recruited subject.
#[derive(Clone, Debug, PartialEq)]
pub struct AipwData {
    pub arm: Vec<u8>,
    pub covariates: Vec<Vec<f64>>,
    pub intermediate: Vec<Option<f64>>,
    pub outcome: Vec<Option<f64>>,
}

impl AipwData {
    /// Covariates are (X, baseline).
    pub fn from_dataset(ds: &TrialDataset, scale: Scale) -> Self {
        let recs = &ds.records;
        AipwData {
            arm: recs.iter().map(|r| r.arm).collect(),
            covariates: recs.iter().map(|r| vec![r.x, r.baseline(scale)]).collect(),
            intermediate: recs.iter().map(|r| r.intermediate(scale)).collect(),
            outcome: recs.iter().map(|r| r.outcome(scale)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.arm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arm.is_empty()
    }

    fn resample(&self, idx: &[usize]) -> Self {
        AipwData {
            arm: idx.iter().map(|&i| self.arm[i]).collect(),
            covariates: idx.iter().map(|&i| self.covariates[i].clone()).collect(),
            intermediate: idx.iter().map(|&i| self.intermediate[i]).collect(),
            outcome: idx.iter().map(|&i| self.outcome[i]).collect(),
        }
    }

    fn validate(&self, kind: OutcomeKind) -> Result<()> {
        let n = self.len();
        if self.covariates.len() != n || self.intermediate.len() != n || self.outcome.len() != n {
            return Err(Error::domain("AIPW input columns differ in length"));
        }
        for i in 0..n {
            if self.outcome[i].is_some() && self.intermediate[i].is_none() {
                return Err(Error::domain(format!(
                    "subject {i}: outcome observed without the intermediate endpoint"
                )));
            }
            if self.arm[i] > 1 {
                return Err(Error::domain(format!("subject {i}: arm must be 0 or 1")));
            }
        }
        if kind == OutcomeKind::Binary
            && self.outcome.iter().flatten().any(|&y| y != 0.0 && y != 1.0)
        {
            return Err(Error::domain("binary AIPW needs 0/1 outcomes"));
        }
        Ok(())
    }
}

/// Empirical selection probabilities, indexed by arm.
#[derive(Clone, Debug, PartialEq)]
pub struct AipwWeights {
    pub p_arm: [f64; 2],
    pub p_cy_given_arm: [f64; 2],
    pub p_cz_given_arm: [f64; 2],
}

#[derive(Clone, Debug)]
pub struct AipwComponents {
    pub stage1: [DVector<f64>; 2],
    pub stage2: [DVector<f64>; 2],
    /// Ŷ_ri, present where the intermediate endpoint is observed.
    pub stage1_pred: [Vec<Option<f64>>; 2],
    /// Ỹ_ri for every subject.
    pub stage2_pred: [Vec<f64>; 2],
    pub weights: AipwWeights,
    pub mu: [f64; 2],
    pub influence: Vec<f64>,
}

impl AipwComponents {
    pub fn effect(&self) -> f64 {
        self.mu[1] - self.mu[0]
    }

    pub fn se(&self) -> f64 {
        let n = self.influence.len() as f64;
        let mean = self.influence.iter().sum::<f64>() / n;
        let var = self.influence.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }
}

#[derive(Clone, Debug)]
struct Fitted {
    beta: DVector<f64>,
    kind: OutcomeKind,
}

impl Fitted {
    fn predict(&self, row: &[f64]) -> f64 {
        let eta: f64 = row.iter().zip(self.beta.iter()).map(|(a, b)| a * b).sum();
        match self.kind {
            OutcomeKind::Continuous => eta,
            OutcomeKind::Binary => expit(eta),
        }
    }
}

fn fit(kind: OutcomeKind, rows: &[Vec<f64>], y: Vec<f64>) -> Result<Fitted> {
    let x = design_from_rows(rows);
    let y = DVector::from_vec(y);
    let beta = match kind {
        OutcomeKind::Continuous => fit_ols(&x, &y)?.coefficients,
        OutcomeKind::Binary => fit_logistic(&x, &y)?.coefficients,
    };
    Ok(Fitted { beta, kind })
}

fn stage1_row(models: &WorkingModels, z: f64, cov: &[f64]) -> Vec<f64> {
    let mut row = vec![1.0];
    if models.stage1_intermediate {
        row.push(z);
    }
    if models.stage1_covariates {
        row.extend_from_slice(cov);
    }
    row
}

fn stage2_row(models: &WorkingModels, cov: &[f64]) -> Vec<f64> {
    let mut row = vec![1.0];
    if models.stage2_covariates {
        row.extend_from_slice(cov);
    }
    row
}

/// Stage-1 fit and predictions, then stage-2 fit and predictions.
type ArmFit = (Fitted, Vec<Option<f64>>, Fitted, Vec<f64>);

fn fit_arm(data: &AipwData, models: &WorkingModels, kind: OutcomeKind, arm: u8) -> Result<ArmFit> {
    let n = data.len();
    let q = data.covariates.first().map_or(0, Vec::len);
    let p1 = 1 + usize::from(models.stage1_intermediate) + if models.stage1_covariates { q } else { 0 };
    let p2 = 1 + if models.stage2_covariates { q } else { 0 };

    let (mut rows, mut y) = (Vec::new(), Vec::new());
    for i in (0..n).filter(|&i| data.arm[i] == arm) {
        if let (Some(yi), Some(zi)) = (data.outcome[i], data.intermediate[i]) {
            rows.push(stage1_row(models, zi, &data.covariates[i]));
            y.push(yi);
        }
    }
    if rows.len() < p1 + 3 {
        return Err(Error::insufficient("outcome working model", p1 + 3, rows.len()));
    }
    let h = fit(kind, &rows, y)?;
    let y_hat: Vec<Option<f64>> = (0..n)
        .map(|i| {
            data.intermediate[i].map(|z| h.predict(&stage1_row(models, z, &data.covariates[i])))
        })
        .collect();

    let (mut rows, mut t) = (Vec::new(), Vec::new());
    for i in (0..n).filter(|&i| data.arm[i] == arm) {
        if let Some(v) = y_hat[i] {
            rows.push(stage2_row(models, &data.covariates[i]));
            t.push(v);
        }
    }
    if rows.len() < p2 + 2 {
        return Err(Error::insufficient("prediction working model", p2 + 2, rows.len()));
    }
    let g = fit(kind, &rows, t)?;
    let y_tilde = (0..n).map(|i| g.predict(&stage2_row(models, &data.covariates[i]))).collect();
    Ok((h, y_hat, g, y_tilde))
}

/// Sequential AIPW: outcome model on complete cases, then a prediction model
/// on intermediate-observed cases, averaged over every recruited subject.
pub fn aipw(data: &AipwData, models: &WorkingModels, kind: OutcomeKind) -> Result<AipwComponents> {
    data.validate(kind)?;
    let n = data.len();
    let mut arms = Vec::with_capacity(2);
    for arm in 0..2u8 {
        let fitted = fit_arm(data, models, kind, arm).map_err(|e| Error::ArmModel {
            arm,
            source: Box::new(e),
        })?;
        arms.push(fitted);
    }
    let (h1, y_hat1, g1, y_tilde1) = arms.pop().unwrap();
    let (h0, y_hat0, g0, y_tilde0) = arms.pop().unwrap();

    let count = |f: &dyn Fn(usize) -> bool| (0..n).filter(|&i| f(i)).count() as f64;
    let mut weights = AipwWeights {
        p_arm: [0.0; 2],
        p_cy_given_arm: [0.0; 2],
        p_cz_given_arm: [0.0; 2],
    };
    for r in 0..2u8 {
        let nr = count(&|i| data.arm[i] == r);
        weights.p_arm[r as usize] = nr / n as f64;
        weights.p_cy_given_arm[r as usize] = count(&|i| data.arm[i] == r && data.outcome[i].is_some()) / nr;
        weights.p_cz_given_arm[r as usize] =
            count(&|i| data.arm[i] == r && data.intermediate[i].is_some()) / nr;
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mu = [mean(&y_tilde0), mean(&y_tilde1)];
    let y_hat = [y_hat0, y_hat1];
    let y_tilde = [y_tilde0, y_tilde1];

    let influence = (0..n)
        .map(|i| {
            let term = |r: usize| {
                let mut v = y_tilde[r][i] - mu[r];
                if data.arm[i] as usize == r {
                    if let Some(yh) = y_hat[r][i] {
                        v += (yh - y_tilde[r][i]) / (weights.p_arm[r] * weights.p_cz_given_arm[r]);
                        if let Some(y) = data.outcome[i] {
                            v += (y - yh) / (weights.p_arm[r] * weights.p_cy_given_arm[r]);
                        }
                    }
                }
                v
            };
            term(1) - term(0)
        })
        .collect();

    Ok(AipwComponents {
        stage1: [h0.beta, h1.beta],
        stage2: [g0.beta, g1.beta],
        stage1_pred: y_hat,
        stage2_pred: y_tilde,
        weights,
        mu,
        influence,
    })
}

/// AIPW treatment effect with influence-function SE and default working models.
pub fn aipw_effect(ds: &TrialDataset, scale: Scale, kind: OutcomeKind) -> Result<EffectEstimate> {
    let c = aipw(&AipwData::from_dataset(ds, scale), &WorkingModels::default(), kind)?;
    Ok(EffectEstimate {
        estimate: c.effect(),
        se: c.se(),
        scale,
        n_used: ds.m_r(),
    })
}

/// Nonparametric bootstrap SE of the AIPW effect. Resamples whose models
/// cannot be fitted are skipped; more than 1% skipped is an error.
pub fn aipw_variance_bootstrap(
    data: &AipwData,
    models: &WorkingModels,
    kind: OutcomeKind,
    b: usize,
    rng: &RngStream,
) -> Result<f64> {
    if b < 200 {
        return Err(Error::domain(format!("AIPW bootstrap needs B >= 200, got {b}")));
    }
    let n = data.len();
    let results: Vec<Option<f64>> = (0..b)
        .into_par_iter()
        .map(|k| {
            let mut s = rng.substream(k as u64);
            let idx: Vec<usize> = (0..n).map(|_| s.random_range(0..n)).collect();
            aipw(&data.resample(&idx), models, kind).ok().map(|c| c.effect())
        })
        .collect();
    let ok: Vec<f64> = results.into_iter().flatten().collect();
    let failed = b - ok.len();
    if failed * 100 > b {
        return Err(Error::BootstrapFailures { failed, total: b });
    }
    if failed > 0 {
        log::warn!("AIPW bootstrap skipped {failed} of {b} resamples");
    }
    let mean = ok.iter().sum::<f64>() / ok.len() as f64;
    Ok((ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_disrupted, generate_main, GenConfig};

    #[test]
    fn influence_mean_zero() {
        let (_, ds) = generate_disrupted(&GenConfig::default()).unwrap();
        for scale in [Scale::Z, Scale::Percentile] {
            let c = aipw(&AipwData::from_dataset(&ds, scale), &WorkingModels::default(), OutcomeKind::Continuous).unwrap();
            let s: f64 = c.influence.iter().sum();
            assert!(s.abs() < 1e-8, "{s}");
            for w in c.weights.p_arm.iter().chain(&c.weights.p_cy_given_arm).chain(&c.weights.p_cz_given_arm) {
                assert!(*w > 0.0 && *w <= 1.0);
            }
        }
    }

    #[test]
    fn no_missingness_intercept_prediction_gives_mean_difference() {
        let full = generate_main(&GenConfig::default()).unwrap();
        let data = AipwData::from_dataset(&full, Scale::Z);
        let models = WorkingModels {
            stage2_covariates: false,
            ..WorkingModels::default()
        };
        let c = aipw(&data, &models, OutcomeKind::Continuous).unwrap();
        let arm_mean = |r: u8| {
            let v: Vec<f64> = full.records.iter().filter(|s| s.arm == r).map(|s| s.z_bmi3.unwrap()).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!((c.effect() - (arm_mean(1) - arm_mean(0))).abs() < 1e-10);
    }

    #[test]
    fn binary_branch() {
        let (_, ds) = generate_disrupted(&GenConfig::default()).unwrap();
        let mut data = AipwData::from_dataset(&ds, Scale::Z);
        let cut = |v: Option<f64>| v.map(|x| if x > 1.4 { 1.0 } else { 0.0 });
        data.outcome = data.outcome.iter().map(|&v| cut(v)).collect();
        let c = aipw(&data, &WorkingModels::default(), OutcomeKind::Binary).unwrap();
        assert!(c.mu.iter().all(|m| (0.0..=1.0).contains(m)));
        assert!(c.influence.iter().sum::<f64>().abs() < 1e-6);
        assert!(c.se() > 0.0);
    }

    #[test]
    fn binary_rejects_continuous_outcome() {
        let (_, ds) = generate_disrupted(&GenConfig::default()).unwrap();
        assert!(aipw_effect(&ds, Scale::Z, OutcomeKind::Binary).is_err());
    }

    #[test]
    fn arm_failure_names_arm() {
        let (_, mut ds) = generate_disrupted(&GenConfig::default()).unwrap();
        for r in ds.records.iter_mut().filter(|r| r.arm == 1) {
            r.z_bmi3 = None;
            r.p_bmi3 = None;
            r.obs_y = false;
        }
        assert!(matches!(aipw_effect(&ds, Scale::Z, OutcomeKind::Continuous), Err(Error::ArmModel { arm: 1, .. })));
    }

    #[test]
    fn bootstrap_precondition_and_determinism() {
        let (_, ds) = generate_disrupted(&GenConfig::default()).unwrap();
        let data = AipwData::from_dataset(&ds, Scale::Z);
        let m = WorkingModels::default();
        let rng = RngStream::new(9, 4);
        assert!(aipw_variance_bootstrap(&data, &m, OutcomeKind::Continuous, 0, &rng).is_err());
        let a = aipw_variance_bootstrap(&data, &m, OutcomeKind::Continuous, 200, &rng).unwrap();
        let b = aipw_variance_bootstrap(&data, &m, OutcomeKind::Continuous, 200, &rng).unwrap();
        assert_eq!(a, b);
    }
}
