//! Synthetic PLAN-style trials: the main dataset, its missingness pattern and
//! the external comparator scenarios.

use std::fmt;
use std::io::{Read, Write};

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rngdist::{
    sample_bivariate_normal, sample_standard_normal, sample_truncated_normal, std_cdf, RngStream,
};

/// Measurement scale of the BMI endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scale {
    #[serde(rename = "z", alias = "Z", alias = "zBMI")]
    Z,
    #[serde(rename = "percentile", alias = "p", alias = "pBMI")]
    Percentile,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Z => "z",
            Scale::Percentile => "percentile",
        }
    }

    pub fn parse(s: &str) -> Result<Scale> {
        match s {
            "z" | "Z" | "zBMI" => Ok(Scale::Z),
            "percentile" | "p" | "pBMI" => Ok(Scale::Percentile),
            other => Err(Error::config(format!("unknown scale `{other}`"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One child in the trial. The 12- and 24-month values are absent when not observed.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectRecord {
    pub id: usize,
    pub arm: u8,
    pub x: f64,
    pub z_bmi1: f64,
    pub z_bmi2: Option<f64>,
    pub z_bmi3: Option<f64>,
    pub p_bmi1: f64,
    pub p_bmi2: Option<f64>,
    pub p_bmi3: Option<f64>,
    pub obs_z: bool,
    pub obs_y: bool,
}

impl SubjectRecord {
    pub fn baseline(&self, scale: Scale) -> f64 {
        match scale {
            Scale::Z => self.z_bmi1,
            Scale::Percentile => self.p_bmi1,
        }
    }

    pub fn intermediate(&self, scale: Scale) -> Option<f64> {
        match scale {
            Scale::Z => self.z_bmi2,
            Scale::Percentile => self.p_bmi2,
        }
    }

    pub fn outcome(&self, scale: Scale) -> Option<f64> {
        match scale {
            Scale::Z => self.z_bmi3,
            Scale::Percentile => self.p_bmi3,
        }
    }

    pub fn treated(&self) -> bool {
        self.arm == 1
    }

    fn drop_outcome(&mut self) {
        self.z_bmi3 = None;
        self.p_bmi3 = None;
        self.obs_y = false;
    }

    fn drop_intermediate(&mut self) {
        self.z_bmi2 = None;
        self.p_bmi2 = None;
        self.obs_z = false;
    }
}

/// All records of one data source `d` (0 is the current trial).
#[derive(Clone, Debug, PartialEq)]
pub struct TrialDataset {
    pub source_id: usize,
    pub records: Vec<SubjectRecord>,
}

impl TrialDataset {
    pub fn n(&self) -> usize {
        self.records.len()
    }

    /// Subjects with the final outcome observed.
    pub fn m(&self) -> usize {
        self.records.iter().filter(|r| r.obs_y).count()
    }

    pub fn m_z(&self) -> usize {
        self.records.iter().filter(|r| r.obs_z).count()
    }

    /// Recruited subjects with baseline data; every generated subject qualifies.
    pub fn m_r(&self) -> usize {
        self.n()
    }

    pub fn arm_counts(&self) -> (usize, usize) {
        let treated = self.records.iter().filter(|r| r.treated()).count();
        (self.n() - treated, treated)
    }

    pub fn complete_cases(&self) -> impl Iterator<Item = &SubjectRecord> {
        self.records.iter().filter(|r| r.obs_y)
    }

    /// Check the counting and missingness invariants every dataset must satisfy.
    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            if r.obs_z != r.z_bmi2.is_some() || r.obs_z != r.p_bmi2.is_some() {
                return Err(Error::State(format!("subject {}: obs_Z flag disagrees with values", r.id)));
            }
            if r.obs_y != r.z_bmi3.is_some() || r.obs_y != r.p_bmi3.is_some() {
                return Err(Error::State(format!("subject {}: obs_Y flag disagrees with values", r.id)));
            }
            if r.obs_y && !r.obs_z {
                return Err(Error::State(format!(
                    "subject {}: final outcome observed without the intermediate one",
                    r.id
                )));
            }
            if r.arm > 1 {
                return Err(Error::State(format!("subject {}: arm must be 0 or 1", r.id)));
            }
        }
        let (c, t) = self.arm_counts();
        if c < 2 || t < 2 {
            return Err(Error::State(format!("need at least two subjects per arm, have {c}/{t}")));
        }
        Ok(())
    }
}

/// Constants of the generating model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub n: usize,
    /// Correlation of the 12- and 24-month z-values.
    pub rho: f64,
    pub effect_intermediate: f64,
    pub effect_final: f64,
    /// Shift of the 12-month mean relative to baseline.
    pub intercept_drift: f64,
    pub covariate_coef: f64,
    pub outcome_sd: f64,
    pub baseline_mean: f64,
    pub baseline_lower: f64,
    pub covariate_mean: f64,
    pub covariate_sd: f64,
    pub missing_pairs: usize,
    pub missing_final_only: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n: 452,
            rho: 0.9,
            effect_intermediate: -0.16,
            effect_final: -0.08,
            intercept_drift: -0.2,
            covariate_coef: 0.1,
            outcome_sd: 0.3,
            baseline_mean: 1.5,
            baseline_lower: 1.036,
            covariate_mean: 1.0,
            covariate_sd: 1.0,
            missing_pairs: 125,
            missing_final_only: 125,
            seed: 1,
        }
    }
}

impl GenConfig {
    /// The lower-correlation variant of the main dataset.
    pub fn main2() -> Self {
        Self {
            rho: 0.6,
            ..Self::default()
        }
    }

    /// Same model with both treatment effects removed.
    pub fn null_effect(&self) -> Self {
        Self {
            effect_intermediate: 0.0,
            effect_final: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::config(format!("n must be at least 4, got {}", self.n)));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::config(format!("rho must lie in (-1, 1), got {}", self.rho)));
        }
        if !(self.outcome_sd > 0.0) || !(self.covariate_sd > 0.0) {
            return Err(Error::config("standard deviations must be positive"));
        }
        if self.missing_pairs + self.missing_final_only > self.n {
            return Err(Error::config(format!(
                "{} + {} missing subjects exceed n = {}",
                self.missing_pairs, self.missing_final_only, self.n
            )));
        }
        let finite = [
            self.effect_intermediate,
            self.effect_final,
            self.intercept_drift,
            self.covariate_coef,
            self.baseline_mean,
            self.covariate_mean,
        ];
        if finite.iter().any(|v| !v.is_finite()) || self.baseline_lower.is_nan() {
            return Err(Error::config("generator coefficients must be finite"));
        }
        Ok(())
    }
}

/// Treatment coefficients on the 12- and 24-month means.
#[derive(Clone, Copy, Debug)]
struct Effects {
    intermediate: f64,
    final_: f64,
}

/// Complete (no missingness) dataset from the main generating model.
pub fn generate_main(cfg: &GenConfig) -> Result<TrialDataset> {
    cfg.validate()?;
    let mut rng = RngStream::new(cfg.seed, 0);
    let effects = Effects {
        intermediate: cfg.effect_intermediate,
        final_: cfg.effect_final,
    };
    simulate(cfg, cfg.n, effects, 0, &mut rng)
}

/// Main dataset followed by the configured missingness pattern.
pub fn generate_disrupted(cfg: &GenConfig) -> Result<(TrialDataset, TrialDataset)> {
    let full = generate_main(cfg)?;
    let mut rng = RngStream::new(cfg.seed, 0).substream(100);
    let missing = apply_missingness(&full, &mut rng, cfg.missing_pairs, cfg.missing_final_only)?;
    Ok((full, missing))
}

fn simulate(
    cfg: &GenConfig,
    n: usize,
    effects: Effects,
    source_id: usize,
    rng: &mut RngStream,
) -> Result<TrialDataset> {
    let mut base_rng = rng.substream(0);
    let mut arm_rng = rng.substream(1);
    let mut cov_rng = rng.substream(2);
    let mut out_rng = rng.substream(3);

    let baseline =
        sample_truncated_normal(&mut base_rng, cfg.baseline_mean, 1.0, cfg.baseline_lower, n)?;
    let arms = permuted_blocks(&mut arm_rng, n);
    let noise = sample_bivariate_normal(&mut out_rng, (0.0, 0.0), cfg.outcome_sd, cfg.rho, n)?;

    let records = (0..n)
        .map(|i| {
            let x = cfg.covariate_mean + cfg.covariate_sd * sample_standard_normal(&mut cov_rng);
            let r = arms[i] as f64;
            let z1 = baseline[i];
            let z2 = z1 + cfg.intercept_drift + effects.intermediate * r + cfg.covariate_coef * x
                + noise[i].0;
            let z3 = z1 + effects.final_ * r + cfg.covariate_coef * x + noise[i].1;
            SubjectRecord {
                id: i + 1,
                arm: arms[i],
                x,
                z_bmi1: z1,
                z_bmi2: Some(z2),
                z_bmi3: Some(z3),
                p_bmi1: std_cdf(z1),
                p_bmi2: Some(std_cdf(z2)),
                p_bmi3: Some(std_cdf(z3)),
                obs_z: true,
                obs_y: true,
            }
        })
        .collect();
    Ok(TrialDataset { source_id, records })
}

/// 1:1 allocation in blocks of two; an odd last subject gets a fair coin.
fn permuted_blocks(rng: &mut RngStream, n: usize) -> Vec<u8> {
    let mut arms = Vec::with_capacity(n);
    while arms.len() + 2 <= n {
        let mut block = [0u8, 1u8];
        block.shuffle(rng);
        arms.extend_from_slice(&block);
    }
    if arms.len() < n {
        let mut block = [0u8, 1u8];
        block.shuffle(rng);
        arms.push(block[0]);
    }
    arms
}

/// Remove `pairs` subjects' 12- and 24-month values, then the 24-month value of
/// `final_only` further subjects among those that still have the 12-month one.
pub fn apply_missingness(
    ds: &TrialDataset,
    rng: &mut RngStream,
    pairs: usize,
    final_only: usize,
) -> Result<TrialDataset> {
    let mut out = ds.clone();
    let eligible_pairs: Vec<usize> = (0..out.n()).filter(|&i| out.records[i].obs_z).collect();
    if pairs > eligible_pairs.len() {
        return Err(Error::State(format!(
            "cannot remove {pairs} intermediate/final pairs: only {} subjects have them",
            eligible_pairs.len()
        )));
    }
    for k in index::sample(rng, eligible_pairs.len(), pairs) {
        let rec = &mut out.records[eligible_pairs[k]];
        rec.drop_intermediate();
        rec.drop_outcome();
    }
    let eligible_final: Vec<usize> = (0..out.n())
        .filter(|&i| out.records[i].obs_z && out.records[i].obs_y)
        .collect();
    if final_only > eligible_final.len() {
        return Err(Error::State(format!(
            "cannot remove {final_only} final outcomes: only {} subjects remain eligible",
            eligible_final.len()
        )));
    }
    for k in index::sample(rng, eligible_final.len(), final_only) {
        out.records[eligible_final[k]].drop_outcome();
    }
    Ok(out)
}

/// The five external comparator trials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExternalScenario {
    SameSize,
    Double,
    Half,
    StrongConflict,
    ModerateConflict,
}

impl ExternalScenario {
    pub const ALL: [ExternalScenario; 5] = [
        ExternalScenario::SameSize,
        ExternalScenario::Double,
        ExternalScenario::Half,
        ExternalScenario::StrongConflict,
        ExternalScenario::ModerateConflict,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|sc| format!("{sc:?}").eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown external scenario `{s}`")))
    }

    /// Build from a conflict tag (`NC`, `SC`, `MC`) and a size tag (`Full`, `Double`, `Half`).
    pub fn from_tags(conflict: &str, size: &str) -> Result<Self> {
        let conflict = conflict.to_ascii_uppercase();
        let size = size.to_ascii_lowercase();
        match (conflict.as_str(), size.as_str()) {
            ("NC", "full") => Ok(Self::SameSize),
            ("NC", "double") => Ok(Self::Double),
            ("NC", "half") => Ok(Self::Half),
            ("SC", "full") => Ok(Self::StrongConflict),
            ("MC", "full") => Ok(Self::ModerateConflict),
            _ => Err(Error::config(format!(
                "no external scenario with conflict `{conflict}` and size `{size}`"
            ))),
        }
    }

    pub fn sample_size(self, base_n: usize) -> usize {
        match self {
            Self::Double => 2 * base_n,
            Self::Half => base_n / 2,
            _ => base_n,
        }
    }

    fn effects(self, base: &GenConfig) -> Effects {
        match self {
            Self::StrongConflict => Effects {
                intermediate: -0.36,
                final_: -0.28,
            },
            Self::ModerateConflict => Effects {
                intermediate: -0.18,
                final_: -0.10,
            },
            _ => Effects {
                intermediate: base.effect_intermediate,
                final_: base.effect_final,
            },
        }
    }

    /// Table-style label, e.g. `Ext-Full (SC)`.
    pub fn label(self) -> &'static str {
        match self {
            Self::SameSize => "Ext-Full (NC)",
            Self::Double => "Ext-Double (NC)",
            Self::Half => "Ext-Half (NC)",
            Self::StrongConflict => "Ext-Full (SC)",
            Self::ModerateConflict => "Ext-Full (MC)",
        }
    }
}

/// External trial with no missing data. Its size is relative to `base_cfg.n`.
pub fn generate_external(
    scenario: ExternalScenario,
    base_cfg: &GenConfig,
    rng: &mut RngStream,
) -> Result<TrialDataset> {
    base_cfg.validate()?;
    let n = scenario.sample_size(base_cfg.n);
    simulate(base_cfg, n, scenario.effects(base_cfg), 1, rng)
}

const CSV_HEADER: [&str; 12] = [
    "id", "d", "R", "X", "zBMI1", "zBMI2", "zBMI3", "pBMI1", "pBMI2", "pBMI3", "obs_Z", "obs_Y",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write one or more datasets in the long CSV layout; missing values are empty fields.
pub fn write_csv<W: Write>(datasets: &[&TrialDataset], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for ds in datasets {
        for r in &ds.records {
            w.write_record([
                r.id.to_string(),
                ds.source_id.to_string(),
                r.arm.to_string(),
                r.x.to_string(),
                r.z_bmi1.to_string(),
                opt(r.z_bmi2),
                opt(r.z_bmi3),
                r.p_bmi1.to_string(),
                opt(r.p_bmi2),
                opt(r.p_bmi3),
                u8::from(r.obs_z).to_string(),
                u8::from(r.obs_y).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read datasets back, one per distinct `d`, in order of first appearance.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<TrialDataset>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(CSV_HEADER.iter().copied()) {
        return Err(Error::config(format!(
            "unexpected dataset header; expected `{}`",
            CSV_HEADER.join(",")
        )));
    }
    let mut out: Vec<TrialDataset> = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("").trim();
        let bad = |what: &str| Error::config(format!("row {}: invalid {what}", line + 2));
        let num = |i: usize| -> Result<f64> { field(i).parse::<f64>().map_err(|_| bad(CSV_HEADER[i])) };
        let opt_num = |i: usize| -> Result<Option<f64>> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let flag = |i: usize| -> Result<bool> {
            match field(i) {
                "1" | "true" | "TRUE" => Ok(true),
                "0" | "false" | "FALSE" => Ok(false),
                _ => Err(bad(CSV_HEADER[i])),
            }
        };
        let d: usize = field(1).parse().map_err(|_| bad("d"))?;
        let rec = SubjectRecord {
            id: field(0).parse().map_err(|_| bad("id"))?,
            arm: field(2).parse().map_err(|_| bad("R"))?,
            x: num(3)?,
            z_bmi1: num(4)?,
            z_bmi2: opt_num(5)?,
            z_bmi3: opt_num(6)?,
            p_bmi1: num(7)?,
            p_bmi2: opt_num(8)?,
            p_bmi3: opt_num(9)?,
            obs_z: flag(10)?,
            obs_y: flag(11)?,
        };
        match out.iter_mut().find(|ds| ds.source_id == d) {
            Some(ds) => ds.records.push(rec),
            None => out.push(TrialDataset {
                source_id: d,
                records: vec![rec],
            }),
        }
    }
    for ds in &out {
        ds.validate().map_err(|e| Error::config(format!("dataset d={}: {e}", ds.source_id)))?;
    }
    Ok(out)
}
