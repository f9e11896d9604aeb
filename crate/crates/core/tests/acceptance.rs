//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line to
//! stderr (outside the test harness capture) and then asserts.

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use trialaux::bayes::{
    hellinger_commensurability, lambda_from_tau, mcmc_sample, LogDensity, McmcConfig, NormalApprox,
    PosteriorSummary,
};
use trialaux::datagen::{generate_disrupted, generate_main, GenConfig};
use trialaux::extfreq::{mmse_combine, mvar_combine, CombinationInput, StatLabel, SummaryStat};
use trialaux::internal::{
    aipw, double_regression, double_regression_components_from, marschner_binary, AipwData, DRegData,
    OutcomeKind, WorkingModels,
};
use trialaux::methods::{MethodOutput, MethodRegistry};
use trialaux::ols::{ancova_complete_case, fit_ols};
use trialaux::rngdist::{sample_bivariate_normal, RngStream};
use trialaux::scenario::{run_replications, run_scenario, ExternalSpec, ScenarioConfig};
use trialaux::Scale;

fn report(id: u32, pass: bool, detail: &str) {
    let line = format!("criterion {id}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn finish(id: u32, checks: &[(bool, String)], elapsed: Duration) {
    let pass = checks.iter().all(|c| c.0);
    let detail = checks
        .iter()
        .map(|(ok, s)| format!("{}{s}", if *ok { "" } else { "[x] " }))
        .collect::<Vec<_>>()
        .join("; ");
    report(id, pass, &format!("{detail}; {:.1}s", elapsed.as_secs_f64()));
    assert!(pass, "criterion {id}: {detail}");
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn var(v: &[f64]) -> f64 {
    sd(v).powi(2)
}

/// Monte Carlo standard error of the mean of `v`.
fn mc_se(v: &[f64]) -> f64 {
    sd(v) / (v.len() as f64).sqrt()
}

/// Bootstrap SE of `stat(a) − stat(b)` over paired replications.
fn paired_boot_se(a: &[f64], b: &[f64], stat: fn(&[f64]) -> f64, seed: u64) -> f64 {
    use rand::Rng;
    let mut rng = RngStream::new(seed, 0);
    let n = a.len();
    let diffs: Vec<f64> = (0..2000)
        .map(|_| {
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let ra: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
            let rb: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
            stat(&ra) - stat(&rb)
        })
        .collect();
    sd(&diffs)
}

fn column(reps: &[Vec<MethodOutput>], idx: usize, f: fn(&MethodOutput) -> f64) -> Vec<f64> {
    reps.iter().map(|r| f(&r[idx])).collect()
}

fn est(o: &MethodOutput) -> f64 {
    o.estimate
}

fn se(o: &MethodOutput) -> f64 {
    o.se
}

fn generated(conflict: &str, size: &str) -> Option<ExternalSpec> {
    Some(ExternalSpec::Generated {
        conflict: conflict.into(),
        size: size.into(),
    })
}

fn scenario(seed: u64, reps: usize, methods: &[&str], external: Option<ExternalSpec>) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(seed, methods);
    cfg.replications = reps;
    cfg.scales = vec![Scale::Z];
    cfg.external = external;
    cfg
}

#[test]
fn criterion_1_generator_truth() {
    let t = Instant::now();
    let effects: Vec<(f64, f64)> = (0..500u64)
        .into_par_iter()
        .map(|s| {
            let ds = generate_main(&GenConfig {
                seed: 10_000 + s,
                ..GenConfig::default()
            })
            .unwrap();
            (
                ancova_complete_case(&ds, Scale::Z).unwrap().estimate,
                ancova_complete_case(&ds, Scale::Percentile).unwrap().estimate,
            )
        })
        .collect();
    let z: Vec<f64> = effects.iter().map(|e| e.0).collect();
    let p: Vec<f64> = effects.iter().map(|e| e.1).collect();
    let (mz, mp) = (mean(&z), mean(&p));
    let el = t.elapsed();
    finish(
        1,
        &[
            ((mz + 0.08).abs() <= 0.005, format!("z mean {mz:.5} vs -0.08 +/- 0.005")),
            ((mp + 0.01).abs() <= 0.003, format!("percentile mean {mp:.5} vs -0.01 +/- 0.003")),
            (el < Duration::from_secs(60), "runtime < 60s".into()),
        ],
        el,
    );
}

#[test]
fn criterion_2_internal_efficiency() {
    let t = Instant::now();
    let cfg = scenario(20_000, 500, &["CC", "DReg", "AIPW"], None);
    let reps = run_replications(&cfg, &MethodRegistry::with_builtins(), false).unwrap();
    let (cc, dreg, aipw) = (column(&reps, 0, est), column(&reps, 1, est), column(&reps, 2, est));
    let (s_cc, s_dreg, s_aipw) = (sd(&cc), sd(&dreg), sd(&aipw));
    let gap1 = s_dreg - s_aipw;
    let gap2 = s_cc - s_dreg;
    let se1 = paired_boot_se(&dreg, &aipw, sd, 1);
    let se2 = paired_boot_se(&cc, &dreg, sd, 2);
    let el = t.elapsed();
    finish(
        2,
        &[
            (
                gap1 >= 0.0 && gap1 > 2.0 * se1,
                format!("SD(DReg) - SD(AIPW) = {gap1:.5} vs 2 MC-SE {:.5} (SDs {s_dreg:.4}, {s_aipw:.4})", 2.0 * se1),
            ),
            (
                gap2 > 2.0 * se2,
                format!("SD(CC) - SD(DReg) = {gap2:.5} vs 2 MC-SE {:.5} (SD(CC) {s_cc:.4})", 2.0 * se2),
            ),
            (el < Duration::from_secs(300), "runtime < 300s".into()),
        ],
        el,
    );
}

/// Two-arm trial without covariates: Z for `m_z` subjects, Y for a random `m` of them.
fn eq8_cell(rho: f64, pi: f64, reps: usize, seed: u64) -> (f64, f64) {
    let m_z = 400;
    let m = (pi * m_z as f64).round() as usize;
    let draws: Vec<(f64, f64)> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(seed, r);
            let pairs = sample_bivariate_normal(&mut rng, (0.0, 0.0), 1.0, rho, m_z).unwrap();
            let observed = rand::seq::index::sample(&mut rng, m_z, m).into_vec();
            let mut seen = vec![false; m_z];
            observed.iter().for_each(|&i| seen[i] = true);
            let arm = |i: usize| (i % 2) as f64;
            let data = DRegData {
                covariates: (0..m_z).map(|i| vec![arm(i)]).collect(),
                intermediate: pairs.iter().enumerate().map(|(i, p)| p.0 - 0.2 * arm(i)).collect(),
                outcome: pairs
                    .iter()
                    .enumerate()
                    .map(|(i, p)| seen[i].then_some(p.1 - 0.1 * arm(i)))
                    .collect(),
                effect_col: 0,
            };
            let dreg = double_regression_components_from(&data).unwrap().estimate();
            let cc_rows: Vec<usize> = (0..m_z).filter(|&i| seen[i]).collect();
            let design = DMatrix::from_fn(m, 2, |k, j| if j == 0 { 1.0 } else { arm(cc_rows[k]) });
            let y = DVector::from_iterator(m, cc_rows.iter().map(|&i| data.outcome[i].unwrap()));
            let cc = fit_ols(&design, &y).unwrap().coefficients[1];
            (dreg, cc)
        })
        .collect();
    let d: Vec<f64> = draws.iter().map(|x| x.0).collect();
    let c: Vec<f64> = draws.iter().map(|x| x.1).collect();
    (var(&d) / var(&c), 1.0 - rho * rho * (1.0 - pi))
}

#[test]
fn criterion_3_variance_ratio_grid() {
    let t = Instant::now();
    let mut checks = Vec::new();
    for (a, &rho) in [0.3, 0.6, 0.9].iter().enumerate() {
        for (b, &pi) in [0.25, 0.5, 0.75].iter().enumerate() {
            let (ratio, target) = eq8_cell(rho, pi, 2000, 30_000 + (3 * a + b) as u64);
            let rel = ratio / target - 1.0;
            checks.push((rel.abs() <= 0.10, format!("rho {rho} pi {pi}: {ratio:.3} vs {target:.3}")));
        }
    }
    finish(3, &checks, t.elapsed());
}

#[test]
fn criterion_4_conflict_behaviour() {
    let t = Instant::now();
    let reg = MethodRegistry::with_builtins();
    let sc = run_replications(&scenario(40_000, 500, &["CC", "MVAR", "MMSE"], generated("SC", "Full")), &reg, false).unwrap();
    let (cc, mvar, mmse) = (column(&sc, 0, est), column(&sc, 1, est), column(&sc, 2, est));
    let cc_se = mean(&column(&sc, 0, se));
    let bias = mean(&cc) - mean(&mvar);
    let shift = mean(&mmse) - mean(&cc);
    let mmse_mc_se = mc_se(&mmse);

    let nc = run_replications(&scenario(41_000, 500, &["CC", "MVAR", "MMSE"], generated("NC", "Full")), &reg, false).unwrap();
    let (se_cc, se_mvar, se_mmse) = (mean(&column(&nc, 0, se)), mean(&column(&nc, 1, se)), mean(&column(&nc, 2, se)));
    finish(
        4,
        &[
            (bias > 3.0 * cc_se, format!("SC MVAR shift toward external {bias:.4} vs 3 CC-SE {:.4}", 3.0 * cc_se)),
            (
                shift.abs() <= 2.0 * mmse_mc_se,
                format!("SC MMSE - CC mean {shift:.4} vs 2 MC-SE {:.4} (MMSE {:.4}, CC {:.4})", 2.0 * mmse_mc_se, mean(&mmse), mean(&cc)),
            ),
            (
                se_mvar < se_mmse && se_mmse < se_cc,
                format!("NC mean SE MVAR {se_mvar:.4} < MMSE {se_mmse:.4} < CC {se_cc:.4}"),
            ),
        ],
        t.elapsed(),
    );
}

#[test]
fn criterion_5_mmse_bootstrap_inference() {
    let t = Instant::now();
    let reg = MethodRegistry::with_builtins();
    let mut cov_cfg = scenario(50_000, 1000, &["MMSE"], generated("NC", "Full"));
    cov_cfg.parametric_b = 4000;
    let reps = run_replications(&cov_cfg, &reg, false).unwrap();
    let truth = GenConfig::default().effect_final;
    let covered = reps
        .iter()
        .filter(|r| r[0].ci.is_some_and(|(lo, hi)| lo <= truth && truth <= hi))
        .count() as f64
        / reps.len() as f64;

    let mut null_cfg = scenario(51_000, 1000, &["MMSE"], generated("NC", "Full"));
    null_cfg.parametric_b = 4000;
    null_cfg.null_effect = true;
    let size = run_scenario(&null_cfg, &reg, false).unwrap().rows[0].rejection_rate.unwrap();
    finish(
        5,
        &[
            ((0.93..=0.97).contains(&covered), format!("NC coverage {covered:.3} in [0.93, 0.97]")),
            ((0.03..=0.07).contains(&size), format!("null size {size:.3} in [0.03, 0.07]")),
        ],
        t.elapsed(),
    );
}

#[test]
fn criterion_6_bayesian_borrowing() {
    let t = Instant::now();
    let reg = MethodRegistry::with_builtins();
    let methods = ["CC", "Power", "Hierarchical", "MAC"];
    let mut checks = Vec::new();
    for (k, (conflict, size)) in [("NC", "Full"), ("NC", "Double"), ("NC", "Half"), ("SC", "Full")].into_iter().enumerate() {
        let cfg = scenario(60_000 + 1000 * k as u64, 200, &methods, generated(conflict, size));
        let reps = match run_replications(&cfg, &reg, false) {
            Ok(r) => r,
            Err(e) => {
                checks.push((false, format!("{conflict}/{size}: {e}")));
                continue;
            }
        };
        let tag = format!("{conflict}/{size}");
        let mean_sd: Vec<f64> = (0..4).map(|j| mean(&column(&reps, j, se))).collect();
        let mean_est: Vec<f64> = (0..4).map(|j| mean(&column(&reps, j, est))).collect();
        if conflict == "NC" {
            for j in 1..4 {
                checks.push((
                    mean_sd[j] < mean_sd[0],
                    format!("{tag} {} SD {:.4} < CC {:.4}", methods[j], mean_sd[j], mean_sd[0]),
                ));
            }
        } else {
            let d2 = mean(&reps.iter().map(|r| r[1].delta_sq.unwrap()).collect::<Vec<_>>());
            checks.push((d2 >= 0.9, format!("{tag} Power delta^2 {d2:.3} >= 0.9")));
            let power = column(&reps, 1, est);
            let shift = mean_est[1] - mean_est[0];
            checks.push((
                shift.abs() <= 2.0 * mc_se(&power),
                format!("{tag} Power - CC mean {shift:.4} vs 2 MC-SE {:.4}", 2.0 * mc_se(&power)),
            ));
            checks.push((
                (mean_sd[1] / mean_sd[0] - 1.0).abs() <= 0.10,
                format!("{tag} Power SD {:.4} vs CC {:.4}", mean_sd[1], mean_sd[0]),
            ));
        }
        checks.push((
            (mean_est[2] - mean_est[3]).abs() <= 0.005 && (mean_sd[2] / mean_sd[3] - 1.0).abs() <= 0.15,
            format!("{tag} Hierarchical {:.4} ({:.4}) vs MAC {:.4} ({:.4})", mean_est[2], mean_sd[2], mean_est[3], mean_sd[3]),
        ));
    }
    let el = t.elapsed();
    checks.push((el < Duration::from_secs(1800), "runtime < 30 min".into()));
    finish(6, &checks, el);
}

#[test]
fn criterion_7_exact_identities() {
    let t = Instant::now();
    let mut checks = Vec::new();
    let tol = 1e-10;

    let (_, ds) = generate_disrupted(&GenConfig {
        seed: 70,
        missing_final_only: 0,
        ..GenConfig::default()
    })
    .unwrap();
    let d = (double_regression(&ds, Scale::Z).unwrap().estimate - ancova_complete_case(&ds, Scale::Z).unwrap().estimate).abs();
    checks.push((d <= tol, format!("DReg vs CC at pi = 1: {d:.1e}")));

    let stat = |e, v, n, l| SummaryStat::new(e, v, n, l).unwrap();
    let same = CombinationInput {
        theta: stat(-0.08, 0.0018, 202, StatLabel::ThetaHat),
        psi_hat: stat(-0.15, 0.0011, 327, StatLabel::PsiHatInternal),
        cov_theta_psi: 0.0009,
        psi_check: stat(-0.15, 0.0007, 452, StatLabel::PsiCheckExternal),
    };
    let d = (mmse_combine(&same).unwrap().estimate - mvar_combine(&same).unwrap().estimate).abs();
    checks.push((d <= tol, format!("MMSE vs MVAR at delta 0: {d:.1e}")));

    let (t1, v1, t2, v2) = (-0.083, 0.0018, -0.071, 0.00078);
    let pool = CombinationInput {
        theta: stat(t1, v1, 202, StatLabel::ThetaHat),
        psi_hat: stat(t1, v1, 202, StatLabel::PsiHatInternal),
        cov_theta_psi: v1,
        psi_check: stat(t2, v2, 452, StatLabel::PsiCheckExternal),
    };
    let mv = mvar_combine(&pool).unwrap();
    let ivw = (t1 / v1 + t2 / v2) / (1.0 / v1 + 1.0 / v2);
    let ivw_var = 1.0 / (1.0 / v1 + 1.0 / v2);
    let d = (mv.estimate - ivw).abs().max((mv.se * mv.se - ivw_var).abs());
    checks.push((d <= tol, format!("MVAR vs inverse-variance pooling: {d:.1e}")));

    let y: Vec<bool> = (0..60).map(|i| i % 3 == 0 || i % 7 == 0).collect();
    let z: Vec<bool> = (0..60).map(|i| i % 2 == 0 || i % 7 == 0).collect();
    let prop = y.iter().filter(|&&v| v).count() as f64 / 60.0;
    let d = (marschner_binary(&y, &z).unwrap().p_y - prop).abs();
    checks.push((d <= tol, format!("Marschner vs sample proportion at m = m_Z: {d:.1e}")));

    let d = (lambda_from_tau(0.0, 452, 0.9).unwrap() - 1.0).abs();
    checks.push((d <= tol, format!("lambda(0) = 1: {d:.1e}")));

    let a = NormalApprox::new(-0.08, 0.04, 452).unwrap();
    let d = hellinger_commensurability(&a, &a).unwrap().delta;
    checks.push((d <= tol, format!("Delta(identical) = 0: {d:.1e}")));

    let full = generate_main(&GenConfig { seed: 71, ..GenConfig::default() }).unwrap();
    let intercept_only = WorkingModels {
        stage1_intermediate: false,
        stage1_covariates: false,
        stage2_covariates: false,
    };
    let fit = aipw(&AipwData::from_dataset(&full, Scale::Z), &intercept_only, OutcomeKind::Continuous).unwrap();
    let arm_mean = |a: u8| {
        let v: Vec<f64> = full.records.iter().filter(|r| r.arm == a).map(|r| r.z_bmi3.unwrap()).collect();
        mean(&v)
    };
    let d = (fit.effect() - (arm_mean(1) - arm_mean(0))).abs();
    checks.push((d <= tol, format!("AIPW vs arm-mean difference without missingness: {d:.1e}")));

    finish(7, &checks, t.elapsed());
}

/// y_i ~ N(μ, σ²) with μ ~ N(μ0, s0²).
struct NormalMean {
    y: Vec<f64>,
    sigma: f64,
    mu0: f64,
    s0: f64,
}

impl LogDensity for NormalMean {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, p: &[f64]) -> f64 {
        let mu = p[0];
        let ll: f64 = self.y.iter().map(|y| -0.5 * ((y - mu) / self.sigma).powi(2)).sum();
        ll - 0.5 * ((mu - self.mu0) / self.s0).powi(2)
    }
}

#[test]
fn criterion_8_mcmc_validity() {
    let t = Instant::now();
    let mut checks = Vec::new();

    let mut rng = RngStream::new(80, 0);
    let y: Vec<f64> = sample_bivariate_normal(&mut rng, (0.7, 0.0), 2.0, 0.0, 40).unwrap().iter().map(|p| p.0).collect();
    let model = NormalMean { y, sigma: 2.0, mu0: 0.0, s0: 1.5 };
    let prec = model.y.len() as f64 / model.sigma.powi(2) + 1.0 / model.s0.powi(2);
    let post_mean = (model.y.iter().sum::<f64>() / model.sigma.powi(2) + model.mu0 / model.s0.powi(2)) / prec;
    let post_var = 1.0 / prec;
    let cfg = McmcConfig { seed: Some(8), ..McmcConfig::default() };
    let out = mcmc_sample(&model, &[0.0], &[1.0], &cfg, &RngStream::new(81, 0)).unwrap();
    let traces = out.param(0);
    let s = PosteriorSummary::from_traces(&traces);
    checks.push((
        (s.mean - post_mean).abs() <= 3.0 * s.mcse,
        format!("conjugate mean {:.5} vs {post_mean:.5} (3 MC-SE {:.5})", s.mean, 3.0 * s.mcse),
    ));
    let sq: Vec<Vec<f64>> = traces.iter().map(|c| c.iter().map(|x| (x - post_mean).powi(2)).collect()).collect();
    let sq_summary = PosteriorSummary::from_traces(&sq);
    checks.push((
        (sq_summary.mean - post_var).abs() <= 3.0 * sq_summary.mcse,
        format!("conjugate variance {:.5} vs {post_var:.5} (3 MC-SE {:.5})", sq_summary.mean, 3.0 * sq_summary.mcse),
    ));
    checks.push((s.rhat < 1.01 && s.ess_bulk > 400.0, format!("conjugate rhat {:.4}, bulk-ESS {:.0}", s.rhat, s.ess_bulk)));

    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    let reg = MethodRegistry::with_builtins();
    for path in files.iter().filter(|p| p.extension().is_some_and(|e| e == "json")) {
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let cfg = ScenarioConfig::load(path).unwrap();
        let thresholds = cfg.mcmc.rhat_max <= 1.01 && cfg.mcmc.ess_min >= 400.0;
        // Convergence is checked inside every MCMC fit against these thresholds.
        match run_scenario(&cfg, &reg, true) {
            Ok(_) => checks.push((thresholds, format!("{name} converged"))),
            Err(e) => checks.push((false, format!("{name}: {e}"))),
        }
    }
    finish(8, &checks, t.elapsed());
}
