use super::{
    AuxTarget, Evidence, ExternalEvidence, Method, MethodFamily, MethodOutput, MethodSettings,
};
use crate::bayes::{
    hellinger_commensurability, hierarchical_fit, mac_fit, power_prior_posterior, HierFit,
    HierPriors, NormalApprox,
};
use crate::datagen::{Scale, TrialDataset};
use crate::error::{Error, Result};
use crate::extfreq::{
    joint_moments, mmse_with_inference, mvar_combine, CombinationInput, CombinedEstimate,
    StatLabel, SummaryStat,
};
use crate::internal::{aipw, double_regression, AipwData, OutcomeKind};
use crate::ols::{ancova_complete_case, ancova_fit, EffectEstimate, Endpoint, TREATMENT_COL};
use crate::rngdist::{std_cdf, RngStream};

fn frequentist(e: &EffectEstimate) -> MethodOutput {
    MethodOutput {
        estimate: e.estimate,
        se: e.se,
        p_value: Some(e.p_value()),
        pr_ge_zero: Some(std_cdf(e.z())),
        ci: Some(e.ci95()),
        delta_sq: None,
        draws: None,
    }
}

fn combined(c: &CombinedEstimate) -> MethodOutput {
    MethodOutput {
        estimate: c.estimate,
        se: c.se,
        p_value: c.p_value,
        pr_ge_zero: None,
        ci: c.ci_low.zip(c.ci_high),
        delta_sq: None,
        draws: None,
    }
}

fn bayesian(fit: HierFit, keep: bool) -> MethodOutput {
    let s = &fit.theta0;
    MethodOutput {
        estimate: s.mean,
        se: s.sd,
        p_value: None,
        pr_ge_zero: Some(s.pr_ge_zero),
        ci: Some((s.q025, s.q975)),
        delta_sq: None,
        draws: keep.then_some(fit.draws),
    }
}

fn external<'a>(ev: &Evidence<'a>) -> Result<&'a ExternalEvidence> {
    ev.external
        .ok_or_else(|| Error::config("method needs external evidence but none is configured"))
}

fn external_ipd<'a>(ev: &Evidence<'a>) -> Result<&'a TrialDataset> {
    match external(ev)? {
        ExternalEvidence::Ipd(ds) => Ok(ds),
        ExternalEvidence::Summary { .. } => {
            Err(Error::config("method needs individual external data, not a summary"))
        }
    }
}

/// External effect on `endpoint` as a normal approximation.
fn external_effect(ev: &Evidence<'_>, scale: Scale, endpoint: Endpoint) -> Result<NormalApprox> {
    match external(ev)? {
        ExternalEvidence::Ipd(ds) => {
            let fit = ancova_fit(&ds.records, scale, endpoint)?;
            NormalApprox::new(fit.coefficients[TREATMENT_COL], fit.se(TREATMENT_COL), ds.n())
        }
        ExternalEvidence::Summary {
            estimate,
            variance,
            n,
        } => NormalApprox::new(*estimate, variance.sqrt(), *n),
    }
}

fn combination_input(
    ev: &Evidence<'_>,
    scale: Scale,
    settings: &MethodSettings,
    rng: &RngStream,
) -> Result<CombinationInput> {
    let cc = ancova_complete_case(ev.current, scale)?;
    let m = ev.current.m();
    let theta = SummaryStat::new(cc.estimate, cc.se * cc.se, m, StatLabel::ThetaHat)?;
    let (psi_hat, cov, aux_endpoint) = match settings.aux_target {
        AuxTarget::Final => (
            SummaryStat {
                label: StatLabel::PsiHatInternal,
                ..theta.clone()
            },
            theta.variance,
            Endpoint::Final,
        ),
        AuxTarget::Intermediate => {
            let jm = joint_moments(
                ev.current,
                scale,
                Endpoint::Intermediate,
                settings.bootstrap_b,
                rng,
                settings.strict,
            )?;
            let psi = SummaryStat::new(jm.psi, jm.var_psi, ev.current.m_z(), StatLabel::PsiHatInternal)?;
            (psi, jm.cov, Endpoint::Intermediate)
        }
    };
    let ext = external_effect(ev, scale, aux_endpoint)?;
    Ok(CombinationInput {
        theta,
        psi_hat,
        cov_theta_psi: cov,
        psi_check: SummaryStat::new(ext.mean, ext.variance(), ext.n, StatLabel::PsiCheckExternal)?,
    })
}

pub struct CompleteCase;

impl Method for CompleteCase {
    fn name(&self) -> &'static str {
        "CC"
    }
    fn family(&self) -> MethodFamily {
        MethodFamily::Frequentist
    }
    fn run(&self, ev: &Evidence<'_>, scale: Scale, _: &MethodSettings, _: &RngStream) -> Result<MethodOutput> {
        Ok(frequentist(&ancova_complete_case(ev.current, scale)?))
    }
}

/// ANCOVA on the trial as it would have been without disruption.
pub struct FullData;

impl Method for FullData {
    fn name(&self) -> &'static str {
        "Full"
    }
    fn family(&self) -> MethodFamily {
        MethodFamily::Frequentist
    }
    fn run(&self, ev: &Evidence<'_>, scale: Scale, _: &MethodSettings, _: &RngStream) -> Result<MethodOutput> {
        let full = ev
            .full
            .ok_or_else(|| Error::config("Full needs the undisrupted dataset, which is unavailable"))?;
        Ok(frequentist(&ancova_complete_case(full, scale)?))
    }
}

pub struct DoubleRegression;

impl Method for DoubleRegression {
    fn name(&self) -> &'static str {
        "DReg"
    }
    fn family(&self) -> MethodFamily {
        MethodFamily::Frequentist
    }
    fn auxiliary<'a>(&self, _: &'a str) -> &'a str {
        "internal"
    }
    fn run(&self, ev: &Evidence<'_>, scale: Scale, _: &MethodSettings, _: &RngStream) -> Result<MethodOutput> {
        Ok(frequentist(&double_regression(ev.current, scale)?))
    }
}

pub struct Aipw;

impl Method for Aipw {
    fn name(&self) -> &'static str {
        "AIPW"
    }
    fn family(&self) -> MethodFamily {
        MethodFamily::Frequentist
    }
    fn auxiliary<'a>(&self, _: &'a str) -> &'a str {
        "internal"
    }
    fn run(&self, ev: &Evidence<'_>, scale: Scale, s: &MethodSettings, _: &RngStream) -> Result<MethodOutput> {
        let data = AipwData::from_dataset(ev.current, scale);
        let c = aipw(&data, &s.working_models, OutcomeKind::Continuous)?;
        Ok(frequentist(&EffectEstimate {
            estimate: c.effect(),
            se: c.se(),
            scale,
            n_used: data.len(),
        }))
    }
}

pub struct Mvar;

impl Method for Mvar {
    fn name(&self) -> &'static str {
        "MVAR"
    }
    fn family(&self) -> MethodFamily {
        MethodFamily::Frequentist
    }
    fn needs_external(&self) -> bool {
        true
    }
    fn run(&self, ev: &Evidence<'_>, scale: Scale, s: &MethodSettings, rng: &RngStream) -> Result<MethodOutput> {
        Ok(combined(&mvar_combine(&combination_input(ev, scale, s, rng)?)?))
    }
}

pub struct Mmse;

impl Method for Mmse {
    fn name(&self) -> &'static str {
        "MMSE"
    }
    fn family(&self) -> MethodFamily {
        MethodFamily::Frequentist
    }
    fn needs_external(&self) -> bool {
        true
    }
    fn run(&self, ev: &Evidence<'_>, scale: Scale, s: &MethodSettings, rng: &RngStream) -> Result<MethodOutput> {
        let input = combination_input(ev, scale, s, &rng.substream(0))?;
        let est = mmse_with_inference(&input, s.parametric_b, s.null_theta, &rng.substream(1))?;
        Ok(combined(&est))
    }
}

pub struct Power;

impl Method for Power {
    fn name(&self) -> &'static str {
        "Power"
    }
    fn family(&self) -> MethodFamily {
        MethodFamily::Bayesian
    }
    fn needs_external(&self) -> bool {
        true
    }
    fn run(&self, ev: &Evidence<'_>, scale: Scale, s: &MethodSettings, _: &RngStream) -> Result<MethodOutput> {
        let cc_fit = ancova_complete_case(ev.current, scale)?;
        let cc = NormalApprox::new(cc_fit.estimate, cc_fit.se, ev.current.n())?;
        let ext = external_effect(ev, scale, Endpoint::Final)?;
        let comm = hellinger_commensurability(&cc, &ext)?;
        let n_missing = s.n_missing.unwrap_or(ev.current.n() - ev.current.m());
        let post = power_prior_posterior(&cc, &ext, &comm, n_missing)?;
        let p = &post.summary;
        Ok(MethodOutput {
            estimate: p.mean,
            se: p.sd,
            p_value: None,
            pr_ge_zero: Some(p.pr_ge_zero),
            ci: Some((p.q025, p.q975)),
            delta_sq: Some(comm.delta_sq),
            draws: None,
        })
    }
}

pub struct Hierarchical;

impl Method for Hierarchical {
    fn name(&self) -> &'static str {
        "Hierarchical"
    }
    fn family(&self) -> MethodFamily {
        MethodFamily::Bayesian
    }
    fn needs_external(&self) -> bool {
        true
    }
    fn run(&self, ev: &Evidence<'_>, scale: Scale, s: &MethodSettings, rng: &RngStream) -> Result<MethodOutput> {
        let ext_ds = external_ipd(ev)?;
        let ext = external_effect(ev, scale, Endpoint::Final)?;
        let priors = HierPriors::with_unit_sd(ext.unit_information_sd());
        let fit = hierarchical_fit(&[ev.current.clone(), ext_ds.clone()], scale, &priors, &s.mcmc, rng)?;
        Ok(bayesian(fit, s.keep_draws))
    }
}

pub struct Mac;

impl Method for Mac {
    fn name(&self) -> &'static str {
        "MAC"
    }
    fn family(&self) -> MethodFamily {
        MethodFamily::Bayesian
    }
    fn needs_external(&self) -> bool {
        true
    }
    fn run(&self, ev: &Evidence<'_>, scale: Scale, s: &MethodSettings, rng: &RngStream) -> Result<MethodOutput> {
        let cc_fit = ancova_complete_case(ev.current, scale)?;
        let cc = NormalApprox::new(cc_fit.estimate, cc_fit.se, ev.current.m())?;
        let ext = external_effect(ev, scale, Endpoint::Final)?;
        let priors = HierPriors::with_unit_sd(ext.unit_information_sd());
        let fit = mac_fit(&[cc, ext], &priors, &s.mcmc, rng)?;
        Ok(bayesian(fit, s.keep_draws))
    }
}
