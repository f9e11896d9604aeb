//! One analysis run: generate (or load) data, apply each configured method on
//! each scale, and aggregate over replications.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{DrawTable, McmcConfig};
use crate::datagen::{
    apply_missingness, generate_external, generate_main, read_csv, ExternalScenario, GenConfig,
    Scale, TrialDataset,
};
use crate::error::{Error, Result};
use crate::internal::WorkingModels;
use crate::methods::{
    AuxTarget, Evidence, ExternalEvidence, MethodOutput, MethodRegistry, MethodSettings,
};
use crate::report::ReportRow;
use crate::rngdist::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ExternalSpec {
    /// Simulated external trial; conflict `NC`/`SC`/`MC`, size `Full`/`Double`/`Half`.
    Generated { conflict: String, size: String },
    Summary { estimate: f64, variance: f64, n: usize },
    /// External individual data in the dataset CSV layout.
    Csv { path: PathBuf },
}

fn one() -> usize {
    1
}
fn default_rho() -> f64 {
    0.9
}
fn default_scales() -> Vec<Scale> {
    vec![Scale::Z, Scale::Percentile]
}
fn default_bootstrap() -> usize {
    2000
}
fn default_parametric() -> usize {
    4000
}
fn default_alpha() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    pub methods: Vec<String>,
    #[serde(default)]
    pub external: Option<ExternalSpec>,
    #[serde(default = "default_scales")]
    pub scales: Vec<Scale>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_b: usize,
    #[serde(default = "default_parametric")]
    pub parametric_b: usize,
    #[serde(default)]
    pub mcmc: McmcConfig,
    /// Generate under zero treatment effects (for size studies).
    #[serde(default)]
    pub null_effect: bool,
    #[serde(default)]
    pub n_missing: Option<usize>,
    #[serde(default)]
    pub aux_target: AuxTarget,
    #[serde(default)]
    pub working_models: WorkingModels,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub dump_draws: bool,
    /// Generator constants; `seed` and `rho` above take precedence.
    #[serde(default)]
    pub generator: Option<GenConfig>,
}

impl ScenarioConfig {
    /// Minimal config running `methods` with every default.
    pub fn new(seed: u64, methods: &[&str]) -> Self {
        serde_json::from_value(serde_json::json!({
            "seed": seed,
            "methods": methods,
        }))
        .expect("minimal config is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    /// Read a config file; relative external CSV paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(ExternalSpec::Csv { path: p }) = &mut cfg.external {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn gen_config(&self) -> GenConfig {
        let base = self.generator.clone().unwrap_or_default();
        let g = GenConfig {
            rho: self.rho,
            seed: self.seed,
            ..base
        };
        if self.null_effect { g.null_effect() } else { g }
    }

    pub fn settings(&self, strict: bool) -> MethodSettings {
        MethodSettings {
            bootstrap_b: self.bootstrap_b,
            parametric_b: self.parametric_b,
            mcmc: self.mcmc.clone(),
            strict,
            n_missing: self.n_missing,
            aux_target: self.aux_target,
            working_models: self.working_models,
            null_theta: 0.0,
            keep_draws: self.dump_draws,
        }
    }

    pub fn validate(&self, registry: &MethodRegistry) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::config("methods list is empty"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications must be at least 1"));
        }
        if self.scales.is_empty() {
            return Err(Error::config("scales list is empty"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &self.methods {
            let m = registry.get(name)?;
            if !seen.insert(m.name()) {
                return Err(Error::config(format!("method `{name}` listed twice")));
            }
            if m.needs_external() && self.external.is_none() {
                return Err(Error::config(format!("method `{name}` needs an `external` section")));
            }
        }
        let mut scales = self.scales.clone();
        scales.dedup();
        if scales.len() != self.scales.len() {
            return Err(Error::config("scales list has duplicates"));
        }
        match &self.external {
            Some(ExternalSpec::Generated { conflict, size }) => {
                ExternalScenario::from_tags(conflict, size)?;
            }
            Some(ExternalSpec::Summary { variance, n, .. }) => {
                if !(*variance > 0.0) || *n == 0 {
                    return Err(Error::config("external summary needs variance > 0 and n >= 1"));
                }
                if self.scales.len() != 1 {
                    return Err(Error::config(
                        "an external summary is on one scale; list exactly one scale",
                    ));
                }
            }
            Some(ExternalSpec::Csv { path }) if !path.exists() => {
                return Err(Error::config(format!("external CSV {} not found", path.display())));
            }
            Some(ExternalSpec::Csv { .. }) | None => {}
        }
        if self.methods.iter().any(|m| m.eq_ignore_ascii_case("MMSE")) && self.parametric_b < 2000 {
            return Err(Error::config("parametric_b must be at least 2000 for MMSE"));
        }
        self.mcmc.validate()?;
        self.gen_config().validate()
    }

    fn external_label(&self) -> String {
        match &self.external {
            Some(ExternalSpec::Generated { conflict, size }) => ExternalScenario::from_tags(conflict, size)
                .map(|s| s.label().to_string())
                .unwrap_or_default(),
            Some(ExternalSpec::Summary { .. }) => "external summary".into(),
            Some(ExternalSpec::Csv { path }) => format!(
                "external {}",
                path.file_name().map(|f| f.to_string_lossy()).unwrap_or_default()
            ),
            None => "none".into(),
        }
    }
}

/// Posterior draws from one method on one scale.
#[derive(Clone, Debug, PartialEq)]
pub struct DrawDump {
    pub method: String,
    pub scale: Scale,
    pub draws: DrawTable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOutput {
    pub rows: Vec<ReportRow>,
    pub draws: Vec<DrawDump>,
}

struct Replication {
    outputs: Vec<MethodOutput>,
}

fn replication_data(
    cfg: &ScenarioConfig,
    rep: usize,
    csv_external: Option<&TrialDataset>,
) -> Result<(TrialDataset, TrialDataset, Option<ExternalEvidence>)> {
    let seed = cfg.seed.wrapping_add(rep as u64);
    let gen = GenConfig {
        seed,
        ..cfg.gen_config()
    };
    let full = generate_main(&gen)?;
    let mut miss_rng = RngStream::new(seed, 1);
    let current = apply_missingness(&full, &mut miss_rng, gen.missing_pairs, gen.missing_final_only)?;
    let external = match &cfg.external {
        Some(ExternalSpec::Generated { conflict, size }) => {
            let sc = ExternalScenario::from_tags(conflict, size)?;
            let ext_gen = GenConfig {
                rho: gen.rho,
                ..cfg.generator.clone().unwrap_or_default()
            };
            let ext_gen = if cfg.null_effect && sc != ExternalScenario::StrongConflict && sc != ExternalScenario::ModerateConflict {
                ext_gen.null_effect()
            } else {
                ext_gen
            };
            Some(ExternalEvidence::Ipd(generate_external(sc, &ext_gen, &mut RngStream::new(seed, 2))?))
        }
        Some(ExternalSpec::Summary {
            estimate,
            variance,
            n,
        }) => Some(ExternalEvidence::Summary {
            estimate: *estimate,
            variance: *variance,
            n: *n,
        }),
        Some(ExternalSpec::Csv { .. }) => csv_external.cloned().map(ExternalEvidence::Ipd),
        None => None,
    };
    Ok((full, current, external))
}

fn run_replication(
    cfg: &ScenarioConfig,
    registry: &MethodRegistry,
    settings: &MethodSettings,
    rep: usize,
    csv_external: Option<&TrialDataset>,
    label: &str,
) -> Result<Replication> {
    let (full, current, external) = replication_data(cfg, rep, csv_external)?;
    let ev = Evidence {
        current: &current,
        full: Some(&full),
        external: external.as_ref(),
        external_label: label,
    };
    let method_root = RngStream::new(cfg.seed.wrapping_add(rep as u64), 3);
    let mut outputs = Vec::new();
    for (k, name) in cfg.methods.iter().enumerate() {
        let method = registry.get(name)?;
        for (j, &scale) in cfg.scales.iter().enumerate() {
            let rng = method_root.substream((k * cfg.scales.len() + j) as u64);
            let out = method.run(&ev, scale, settings, &rng).map_err(|e| Error::Method {
                method: method.name().to_string(),
                scale: scale.to_string(),
                source: Box::new(e),
            })?;
            outputs.push(out);
        }
    }
    Ok(Replication { outputs })
}

fn rejects(o: &MethodOutput, alpha: f64) -> bool {
    match (o.p_value, o.pr_ge_zero) {
        (Some(p), _) => p < alpha,
        (None, Some(q)) => q < alpha / 2.0 || q > 1.0 - alpha / 2.0,
        (None, None) => false,
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn mean_opt(v: impl Iterator<Item = Option<f64>> + Clone) -> Option<f64> {
    if v.clone().all(|x| x.is_some()) {
        Some(mean(v.map(Option::unwrap)))
    } else {
        None
    }
}

/// Raw outputs of every replication, each in (method, scale) order.
pub fn run_replications(
    cfg: &ScenarioConfig,
    registry: &MethodRegistry,
    strict: bool,
) -> Result<Vec<Vec<MethodOutput>>> {
    cfg.validate(registry)?;
    let settings = cfg.settings(strict);
    let csv_external = match &cfg.external {
        Some(ExternalSpec::Csv { path }) => {
            let file = std::fs::File::open(path)
                .map_err(|e| Error::config(format!("cannot open {}: {e}", path.display())))?;
            let mut sets = read_csv(file)?;
            if sets.is_empty() {
                return Err(Error::config(format!("{} holds no records", path.display())));
            }
            Some(sets.swap_remove(0))
        }
        _ => None,
    };
    let label = cfg.external_label();
    let reps: Vec<Result<Replication>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, registry, &settings, r, csv_external.as_ref(), &label))
        .collect();
    reps.into_iter().map(|r| r.map(|r| r.outputs)).collect()
}

/// Run every replication; rows come out in (method, scale) order.
pub fn run_scenario(cfg: &ScenarioConfig, registry: &MethodRegistry, strict: bool) -> Result<ScenarioOutput> {
    let reps = run_replications(cfg, registry, strict)?;
    let label = cfg.external_label();

    let mut rows = Vec::new();
    let mut draws = Vec::new();
    let nrep = reps.len();
    for (k, name) in cfg.methods.iter().enumerate() {
        let method = registry.get(name)?;
        for (j, &scale) in cfg.scales.iter().enumerate() {
            let idx = k * cfg.scales.len() + j;
            let outs: Vec<&MethodOutput> = reps.iter().map(|r| &r[idx]).collect();
            let row = if nrep == 1 {
                let o = outs[0];
                if let Some(d) = &o.draws {
                    draws.push(DrawDump {
                        method: method.name().to_string(),
                        scale,
                        draws: d.clone(),
                    });
                }
                ReportRow {
                    method: method.name().to_string(),
                    auxiliary: method.auxiliary(&label).to_string(),
                    scale,
                    estimate: o.estimate,
                    se: o.se,
                    p_value: o.p_value,
                    pr_ge_zero: o.pr_ge_zero,
                    ci_low: o.ci.map(|c| c.0),
                    ci_high: o.ci.map(|c| c.1),
                    delta_sq: o.delta_sq,
                    replications: 1,
                    mc_sd: None,
                    rejection_rate: None,
                }
            } else {
                let est = mean(outs.iter().map(|o| o.estimate));
                let sd = (outs.iter().map(|o| (o.estimate - est).powi(2)).sum::<f64>() / (nrep - 1) as f64).sqrt();
                ReportRow {
                    method: method.name().to_string(),
                    auxiliary: method.auxiliary(&label).to_string(),
                    scale,
                    estimate: est,
                    se: mean(outs.iter().map(|o| o.se)),
                    p_value: mean_opt(outs.iter().map(|o| o.p_value)),
                    pr_ge_zero: mean_opt(outs.iter().map(|o| o.pr_ge_zero)),
                    ci_low: mean_opt(outs.iter().map(|o| o.ci.map(|c| c.0))),
                    ci_high: mean_opt(outs.iter().map(|o| o.ci.map(|c| c.1))),
                    delta_sq: mean_opt(outs.iter().map(|o| o.delta_sq)),
                    replications: nrep,
                    mc_sd: Some(sd),
                    rejection_rate: Some(
                        outs.iter().filter(|o| rejects(o, cfg.alpha)).count() as f64 / nrep as f64,
                    ),
                }
            };
            rows.push(row);
        }
    }
    Ok(ScenarioOutput { rows, draws })
}
