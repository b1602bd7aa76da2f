//! The validation suite: every acceptance criterion with its measured
//! values, tolerance interval and runtime budget.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_distr::Binomial;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind, Plan};
use super::run::{dimension_analysis, limsup_analysis, linear_shell, monotone_within_bands, pam_analysis, pam_shell, ShellField};
use crate::error::{Error, Result};
use crate::fractal::{estimate_dimension, skeleton_set, tail_exponent_fit, CoverReport, CoverScheme, Shell};
use crate::gaussian_field::{sample_field_exact, z_correlation, LatticeSpec};
use crate::io::save_csv;
use crate::kernels::{variance_constant, z_covariance_radial, z_variance, ModelParams};
use crate::pam::{
    coupling_profile, fk_moment_with, pam_moments, replica_seed, sample_log_u, second_moment_allowance, FkKernel,
    FkSpec, PamConfig, PicardSolver, MAX_STEP_SD,
};
use crate::rng::{derive_seed, stream};
use crate::stats::{correlation, ols, variance_with_stderr};

/// One measured quantity and its acceptance interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCheck {
    pub label: String,
    pub measured: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub pass: bool,
}

impl SuiteCheck {
    pub fn new(label: impl Into<String>, measured: f64, lo: Option<f64>, hi: Option<f64>) -> Self {
        Self {
            label: label.into(),
            measured,
            lo,
            hi,
            pass: within(measured, lo, hi),
        }
    }

    fn around(label: impl Into<String>, measured: f64, target: f64, tol: f64) -> Self {
        Self::new(label, measured, Some(target - tol), Some(target + tol))
    }

    fn at_most(label: impl Into<String>, measured: f64, hi: f64) -> Self {
        Self::new(label, measured, None, Some(hi))
    }
}

fn within(v: f64, lo: Option<f64>, hi: Option<f64>) -> bool {
    v.is_finite() && lo.is_none_or(|l| v >= l) && hi.is_none_or(|h| v <= h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    pub seconds: f64,
    pub checks: Vec<SuiteCheck>,
    pub error: Option<String>,
}

impl CriterionResult {
    /// `PASS`/`FAIL`, id, title and the check count on one line.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let ok = self.checks.iter().filter(|c| c.pass).count();
        let mut s = format!(
            "{verdict} criterion {:>2} {}: {ok}/{} checks, {:.1} s",
            self.id,
            self.title,
            self.checks.len(),
            self.seconds
        );
        if let Some(e) = &self.error {
            let _ = write!(s, ", error: {e}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub all_passed: bool,
    pub criteria: Vec<CriterionResult>,
}

/// Knobs of the suite: master seed, worker count and the PAM step multiplier
/// (values other than 1 perturb the second-moment check).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    pub workers: usize,
    pub dt_scale: f64,
}

impl SuiteOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            workers: crate::par::workers(),
            dt_scale: 1.0,
        }
    }

    fn seed_for(&self, id: u32) -> u64 {
        derive_seed(self.seed, &[0x5355, id as u64])
    }
}

pub const TITLES: [&str; 11] = [
    "variance law",
    "structure-function exponent",
    "correlation decay",
    "linear dimension law",
    "limsup constant",
    "estimator ground truth",
    "PAM mean and second moment",
    "intermittency exponent",
    "tail order of log u",
    "localization",
    "PAM dimension bracket",
];

/// Runtime budgets in seconds.
pub const BUDGETS: [f64; 11] = [60.0, 120.0, 60.0, 1800.0, 600.0, 60.0, 900.0, 1200.0, 1800.0, 1200.0, 3600.0];

/// Runs criterion `id` (1-based). Errors become a failed result.
pub fn run_criterion(id: u32, opts: &SuiteOptions) -> CriterionResult {
    let start = Instant::now();
    let out = match id {
        1 => variance_law(opts),
        2 => structure_exponent(),
        3 => correlation_decay(),
        4 | 5 => linear_fields(opts).and_then(|f| if id == 4 { linear_dimension(&f) } else { limsup(&f) }),
        6 => estimator_truth(opts),
        7 => pam_moments_check(opts),
        8 => intermittency(opts),
        9 => tail_order(opts),
        10 => localization(opts),
        11 => pam_dimension(opts),
        _ => Err(Error::InvalidArgument(format!("no criterion {id}"))),
    };
    finish(id, start, out)
}

fn finish(id: u32, start: Instant, out: Result<Vec<SuiteCheck>>) -> CriterionResult {
    let seconds = start.elapsed().as_secs_f64();
    let budget = BUDGETS[id as usize - 1];
    let (mut checks, error) = match out {
        Ok(c) => (c, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    checks.push(SuiteCheck::at_most("runtime seconds", seconds, budget));
    CriterionResult {
        id,
        title: TITLES[id as usize - 1].to_string(),
        passed: error.is_none() && checks.iter().all(|c| c.pass),
        seconds,
        checks,
        error,
    }
}

/// All criteria; criteria 4 and 5 share one set of linear fields.
pub fn run_all(opts: &SuiteOptions) -> ValidationSummary {
    let mut criteria = Vec::new();
    for id in 1..=3 {
        criteria.push(run_criterion(id, opts));
    }
    let start = Instant::now();
    let fields = linear_fields(opts);
    let shared = start.elapsed().as_secs_f64();
    for id in [4u32, 5] {
        let t = Instant::now();
        let out = match &fields {
            Ok(f) if id == 4 => linear_dimension(f),
            Ok(f) => limsup(f),
            Err(e) => Err(Error::InvalidArgument(e.to_string())),
        };
        let mut r = finish(id, t, out);
        // sampling time is charged to both
        r.seconds += shared;
        if let Some(c) = r.checks.last_mut() {
            *c = SuiteCheck::at_most("runtime seconds", r.seconds, BUDGETS[id as usize - 1]);
        }
        r.passed = r.error.is_none() && r.checks.iter().all(|c| c.pass);
        criteria.push(r);
    }
    for id in 6..=11 {
        criteria.push(run_criterion(id, opts));
    }
    ValidationSummary {
        all_passed: criteria.iter().all(|c| c.passed),
        criteria,
    }
}

pub fn run_suite(plan: &Plan, workers: usize) -> ValidationSummary {
    run_all(&SuiteOptions {
        seed: plan.seed,
        workers,
        dt_scale: plan.dt_scale,
    })
}

fn p(alpha: f64, beta: f64, d: usize, t: f64) -> Result<ModelParams> {
    if beta == d as f64 {
        ModelParams::white_noise(alpha, d, t)
    } else {
        ModelParams::new(alpha, beta, d, t)
    }
}

const REFERENCE_SETS: [(f64, f64, usize); 3] = [(2.0, 1.0, 1), (1.5, 0.5, 1), (2.0, 0.5, 2)];

fn variance_law(opts: &SuiteOptions) -> Result<Vec<SuiteCheck>> {
    const DRAWS: usize = 100_000;
    let mut checks = Vec::new();
    for (k, &(a, b, d)) in REFERENCE_SETS.iter().enumerate() {
        let lattice = LatticeSpec::new(vec![0.0; d], 1.0, vec![1; d])?;
        let mut est = Vec::new();
        for (j, t) in [1.0, 2.0].into_iter().enumerate() {
            let params = p(a, b, d, t)?;
            let seed = derive_seed(opts.seed_for(1), &[k as u64, j as u64]);
            let draws = crate::par::map(DRAWS, opts.workers, |i| {
                sample_field_exact(&lattice, &params, derive_seed(seed, &[i as u64])).map(|f| f.values[0])
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let (v, se) = variance_with_stderr(&draws);
            let target = variance_constant(&params)? * t.powf(params.variance_exponent());
            checks.push(SuiteCheck::around(format!("({a},{b},{d}) Var Z_{t}"), v, target, 3.0 * se));
            est.push((v, se, params.variance_exponent()));
        }
        let r = est[1].0 / est[0].0;
        let se = r * ((est[0].1 / est[0].0).powi(2) + (est[1].1 / est[1].0).powi(2)).sqrt();
        checks.push(SuiteCheck::around(format!("({a},{b},{d}) Var ratio 2t/t"), r, 2f64.powf(est[0].2), 3.0 * se));
    }
    Ok(checks)
}

/// `E|Z(x) - Z(y)|^2` slope over lags `2^-6 .. 2^-1`, at `t = 64` where the
/// whole lag range is in the small-lag regime.
fn structure_exponent() -> Result<Vec<SuiteCheck>> {
    let mut checks = Vec::new();
    for &(a, b, d) in &REFERENCE_SETS {
        let params = p(a, b, d, 64.0)?;
        let var = z_variance(&params)?;
        let lags: Vec<f64> = (1..=6).map(|k| 2f64.powi(-k)).collect();
        let x: Vec<f64> = lags.iter().map(|h| h.ln()).collect();
        let y = lags
            .iter()
            .map(|&h| Ok((2.0 * (var - z_covariance_radial(h, &params)?)).ln()))
            .collect::<Result<Vec<_>>>()?;
        let fit = ols(&x, &y);
        checks.push(SuiteCheck::around(format!("({a},{b},{d}) slope"), fit.slope, a - b, 0.05));
    }
    Ok(checks)
}

/// Correlation slope over lags 10..1000 for the Riesz-noise sets (the
/// white-noise set has no power-law correlation).
fn correlation_decay() -> Result<Vec<SuiteCheck>> {
    let mut checks = Vec::new();
    for &(a, b, d) in REFERENCE_SETS.iter().filter(|s| s.1 < s.2 as f64) {
        let params = p(a, b, d, 1.0)?;
        let lags: Vec<f64> = (0..=8).map(|k| 10f64 * 10f64.powf(k as f64 / 4.0)).collect();
        let x: Vec<f64> = lags.iter().map(|h| h.ln()).collect();
        let y = lags
            .iter()
            .map(|&h| Ok(z_correlation(h, &params)?.ln()))
            .collect::<Result<Vec<_>>>()?;
        let fit = ols(&x, &y);
        checks.push(SuiteCheck::around(format!("({a},{b},{d}) slope"), fit.slope, -b, 0.1));
    }
    Ok(checks)
}

fn plan(kind: ExperimentKind, params: &ModelParams, shells: (u32, u32), gammas: Vec<f64>, seed: u64) -> Result<Plan> {
    let mut cfg = ExperimentConfig::default();
    cfg.model.alpha = Some(params.alpha);
    cfg.model.beta = Some(params.beta);
    cfg.model.d = Some(params.d);
    cfg.model.t = Some(params.t);
    cfg.sampler.seed = Some(seed);
    cfg.shells.min = Some(shells.0);
    cfg.shells.max = Some(shells.1);
    cfg.shells.fit_min = Some(shells.0);
    cfg.gauge.gamma = Some(gammas);
    cfg.output.experiment = Some(kind);
    cfg.output.dir = Some(std::env::temp_dir().join("mfshe-suite"));
    Plan::new(&cfg, None)
}

struct LinearFields {
    plan: Plan,
    params: ModelParams,
    fields: Vec<ShellField>,
}

const LINEAR_GAMMAS: [f64; 4] = [0.25, 0.5, 0.75, 1.2];

fn linear_fields(opts: &SuiteOptions) -> Result<LinearFields> {
    let params = ModelParams::new(2.0, 0.5, 1, 1.0)?;
    let plan = plan(ExperimentKind::LinearDimension, &params, (6, 14), LINEAR_GAMMAS.to_vec(), opts.seed_for(4))?;
    let fields = crate::par::map(9, opts.workers, |i| linear_shell(&plan, &params, 6 + i as u32))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(LinearFields { plan, params, fields })
}

fn linear_dimension(f: &LinearFields) -> Result<Vec<SuiteCheck>> {
    let (s, _, _) = dimension_analysis(&f.plan, &f.params, &f.fields)?;
    let mut checks = Vec::new();
    for row in &s.rows {
        if row.gamma < 1.0 {
            let est = row.estimate.unwrap_or(f64::NAN);
            checks.push(SuiteCheck::around(format!("gamma={} estimate", row.gamma), est, 1.0 - row.gamma, 0.15));
        } else {
            match (row.estimate, row.band) {
                (Some(e), Some(b)) => checks.push(SuiteCheck::at_most(format!("gamma={} estimate - band", row.gamma), e - b, 0.0)),
                _ => checks.push(SuiteCheck::at_most(
                    format!("gamma={} occupied shells (no growth below 4)", row.gamma),
                    row.nonzero_shells as f64,
                    3.0,
                )),
            }
        }
    }
    Ok(checks)
}

fn limsup(f: &LinearFields) -> Result<Vec<SuiteCheck>> {
    let upper: Vec<ShellField> = f.fields.iter().filter(|s| s.n >= 8).cloned().collect();
    let s = limsup_analysis(&f.params, &upper)?;
    Ok(s.rows
        .iter()
        .filter(|r| r.n >= 12)
        .map(|r| SuiteCheck::around(format!("shell {} max/sqrt(n)", r.n), r.ratio, s.target, 0.2 * s.target))
        .collect())
}

fn estimator_truth(opts: &SuiteOptions) -> Result<Vec<SuiteCheck>> {
    let mut checks = Vec::new();
    for d in [1usize, 2] {
        let shells = if d == 1 { 5..=14 } else { 5..=9 };
        for theta in [0.25, 0.5, 0.75] {
            let set = skeleton_set(theta, shells.clone(), d)?;
            let counts: Vec<(u32, u64)> = shells.clone().map(|n| (n, set.count(n))).collect();
            let report = CoverReport::from_counts(d, &counts, &[d as f64]);
            let fit = estimate_dimension(&report, shells.clone())?;
            let target = d as f64 * (1.0 - theta);
            checks.push(SuiteCheck::around(format!("skeleton d={d} theta={theta}"), fit.estimate, target, fit.band));
        }
    }
    let mut rng = stream(opts.seed_for(6), &[]);
    for d in [1usize, 2] {
        let gamma = 0.3;
        let counts = (8..=20u32)
            .map(|n| {
                let sites = Shell::new(n, d)?.site_count() as u64;
                let b = Binomial::new(sites, (-gamma * n as f64).exp())
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                Ok((n, rng.sample(b)))
            })
            .collect::<Result<Vec<_>>>()?;
        let report = CoverReport::from_counts(d, &counts, &[d as f64]);
        let fit = estimate_dimension(&report, 8..=20)?;
        checks.push(SuiteCheck::around(format!("Bernoulli d={d} gamma={gamma}"), fit.estimate, d as f64 - gamma, 0.1));
    }
    let _ = CoverScheme::UnitLattice;
    Ok(checks)
}

/// Reference PAM set and grid for criteria 7 and 9.
pub fn reference_pam(seed: u64) -> Result<PamConfig> {
    PamConfig::new(ModelParams::new(1.5, 0.5, 1, 0.5)?, 32.0, 256, seed)
}

fn pam_moments_check(opts: &SuiteOptions) -> Result<Vec<SuiteCheck>> {
    let reference = reference_pam(opts.seed_for(7))?;
    let cfg = if opts.dt_scale == 1.0 {
        reference
    } else {
        reference.with_dt(reference.dt * opts.dt_scale)?
    };
    let m = pam_moments(&cfg, 10_000, opts.workers)?;
    let allowance = second_moment_allowance(&reference)?;
    let fk = |steps: usize| {
        fk_moment_with(
            &FkSpec {
                k: 2,
                params: reference.params,
                n_paths: 200_000,
                dt_path: reference.params.t / steps as f64,
                cap: 1e4,
                seed: opts.seed_for(70),
                kernel: FkKernel::Riesz,
            },
            opts.workers,
        )
    };
    let fine = fk(200)?;
    let coarse = fk(100)?;
    let fk_allowance = (fine.value - coarse.value).abs();
    let tol = 3.0 * (m.second_stderr.powi(2) + fine.stderr.powi(2)).sqrt() + allowance.value + fk_allowance;
    Ok(vec![
        SuiteCheck::around("E u_t", m.mean, 1.0, 3.0 * m.mean_stderr),
        SuiteCheck::around("E u_t^2 (simulation) vs Feynman-Kac", m.second, fine.value, tol),
        SuiteCheck::at_most("factors 1 + dF <= 0", m.negative_factors as f64, 0.0),
    ])
}

fn intermittency(opts: &SuiteOptions) -> Result<Vec<SuiteCheck>> {
    let params = ModelParams::new(1.5, 0.5, 1, 0.25)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for k in 2..=5usize {
        let e = fk_moment_with(
            &FkSpec {
                k,
                params,
                n_paths: 100_000,
                dt_path: params.t / 100.0,
                cap: 1e4,
                seed: derive_seed(opts.seed_for(8), &[k as u64]),
                kernel: FkKernel::Riesz,
            },
            opts.workers,
        )?;
        x.push((k as f64).ln());
        y.push(e.value.ln().ln());
    }
    let fit = ols(&x, &y);
    Ok(vec![SuiteCheck::around(
        "slope of log log E u^k on log k",
        fit.slope,
        params.intermittency_exponent(),
        0.4,
    )])
}

fn tail_order(opts: &SuiteOptions) -> Result<Vec<SuiteCheck>> {
    let cfg = reference_pam(opts.seed_for(9))?;
    let samples = sample_log_u(&cfg, 20_000, 8, opts.workers)?;
    let fit = tail_exponent_fit(&samples, &[cfg.params.tail_exponent()])?;
    Ok(vec![SuiteCheck::around(
        "slope of log(-log P) on log z",
        fit.b_hat,
        cfg.params.tail_exponent(),
        0.3,
    )])
}

/// PAM grid for the localization checks: `a = 1/4`, per-step sd at the bound.
fn picard_grid(side: f64, seed: u64) -> Result<PamConfig> {
    let params = ModelParams::new(1.5, 0.5, 1, 0.5)?;
    let base = PamConfig::new(params, side, (side * 4.0) as usize, seed)?;
    let rate = base.step_sd().powi(2) / base.dt;
    base.with_dt(MAX_STEP_SD.powi(2) / rate)
}

fn localization(opts: &SuiteOptions) -> Result<Vec<SuiteCheck>> {
    let seed = opts.seed_for(10);
    let mut checks = Vec::new();

    // independence beyond the range, with pairs spaced so that every pair is
    // independent of every other
    let cfg = picard_grid(128.0, seed)?;
    let (ell, m) = (2.0, 2);
    let range = crate::pam::independence_range(&crate::pam::PicardSpec { ell, m, params: cfg.params })?;
    let sep = (range.ceil() as usize).next_power_of_two();
    let per_unit = 4;
    let pairs = 128 / (2 * sep);
    let solver = PicardSolver::new(&cfg, ell)?;
    let replicas = 10_000usize.div_ceil(pairs);
    let vals = crate::par::map(replicas, opts.workers, |r| {
        solver.iterates(replica_seed(seed, r), m).map(|mut its| {
            let u = its.pop().unwrap_or_default();
            (0..pairs)
                .map(|i| (u[2 * i * sep * per_unit], u[(2 * i + 1) * sep * per_unit]))
                .collect::<Vec<_>>()
        })
    });
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for v in vals {
        for (a, b) in v? {
            xs.push(a);
            ys.push(b);
        }
    }
    let r = correlation(&xs, &ys);
    let se = 1.0 / (xs.len() as f64).sqrt();
    checks.push(SuiteCheck::around(format!("correlation at separation {sep} > {range:.2}"), r, 0.0, 3.0 * se));

    // truncation radius: gap(ell) for ell = 2, 4, 8 on a torus wide enough
    // that the truncated tail of h is not cut by the torus
    let mut gaps = Vec::new();
    for ell in [2.0, 4.0, 8.0] {
        let s = PicardSolver::new(&cfg, ell)?;
        gaps.push(coupling_profile(&s, 10, 1000, seed ^ 0x11, opts.workers)?[10].mean_square);
    }
    let ratio = (gaps[2] / gaps[0]).sqrt();
    let target = 2f64.powf(-cfg.params.beta);
    checks.push(SuiteCheck::around("gap ratio per doubling of ell", ratio, target, 0.3 * target));

    // iteration count on the whole torus
    let small = picard_grid(32.0, seed)?;
    let whole = PicardSolver::new(&small, 1e3)?;
    let prof = coupling_profile(&whole, 7, 1000, seed ^ 0x22, opts.workers)?;
    let ratio = (prof[7].mean_square / prof[4].mean_square).powf(1.0 / 3.0);
    checks.push(SuiteCheck::around("gap ratio per Picard step (m = 4..7)", ratio, 0.5, 0.15));
    Ok(checks)
}

fn pam_dimension(opts: &SuiteOptions) -> Result<Vec<SuiteCheck>> {
    let params = ModelParams::new(1.5, 0.5, 1, 0.5)?;
    let mut plan = plan(
        ExperimentKind::PamDimension,
        &params,
        (5, 10),
        vec![0.1, 0.25, 0.5, 0.75, 0.9],
        opts.seed_for(11),
    )?;
    plan.dt_scale = opts.dt_scale;
    let fields = crate::par::map(6, opts.workers, |i| pam_shell(&plan, &params, 5 + i as u32))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (s, _, _) = pam_analysis(&plan, &params, &fields)?;
    let mut checks = vec![SuiteCheck::new(
        "estimates nonincreasing in gamma (1 = yes)",
        if monotone_within_bands(&s.dimension.rows) { 1.0 } else { 0.0 },
        Some(1.0),
        None,
    )];
    let slope = s.exponent.map_or(f64::NAN, |e| e.0);
    checks.push(SuiteCheck::around("slope of log(d - estimate) on log gamma", slope, s.exponent_target, 0.5));
    Ok(checks)
}

pub fn write_table(path: &Path, s: &ValidationSummary) -> Result<()> {
    let bound = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x}"));
    let rows: Vec<Vec<String>> = s
        .criteria
        .iter()
        .flat_map(|c| {
            c.checks.iter().map(move |k| {
                vec![
                    c.id.to_string(),
                    k.label.replace(',', ";"),
                    format!("{}", k.measured),
                    bound(k.lo),
                    bound(k.hi),
                    k.pass.to_string(),
                ]
            })
        })
        .collect();
    save_csv(path, &["criterion", "check", "measured", "lo", "hi", "pass"], &rows)
}

/// Rows of `validation.csv`: criterion id and the check.
pub fn read_table(path: &Path) -> Result<Vec<(u32, SuiteCheck)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::Format(format!("bad validation row '{line}'")));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| Error::Format(format!("bad number '{s}'")))
            }
        };
        let id = f[0].parse().map_err(|_| Error::Format(format!("bad id '{}'", f[0])))?;
        let measured = num(f[2])?.unwrap_or(f64::NAN);
        let pass = f[5] == "true";
        out.push((
            id,
            SuiteCheck {
                label: f[1].to_string(),
                measured,
                lo: num(f[3])?,
                hi: num(f[4])?,
                pass,
            },
        ));
    }
    Ok(out)
}

/// Pass flags in the table agree with their bounds and with the summary.
pub fn consistent(s: &ValidationSummary, table: &[(u32, SuiteCheck)]) -> bool {
    let summary_checks: Vec<(u32, bool)> = s
        .criteria
        .iter()
        .flat_map(|c| c.checks.iter().map(move |k| (c.id, k.pass)))
        .collect();
    summary_checks.len() == table.len()
        && table
            .iter()
            .zip(&summary_checks)
            .all(|((id, k), (sid, spass))| id == sid && k.pass == within(k.measured, k.lo, k.hi) && k.pass == *spass)
        && s.criteria.iter().all(|c| {
            c.passed == (c.error.is_none() && table.iter().filter(|(id, _)| *id == c.id).all(|(_, k)| k.pass))
        })
}

pub fn render(s: &ValidationSummary) -> String {
    let mut out = String::new();
    for c in &s.criteria {
        let _ = writeln!(out, "{}", c.line());
        for k in &c.checks {
            let b = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
            let _ = writeln!(
                out,
                "    {} {:<48} {:>12.5} in [{}, {}]",
                if k.pass { "ok " } else { "BAD" },
                k.label,
                k.measured,
                b(k.lo),
                b(k.hi)
            );
        }
    }
    let _ = writeln!(out, "all passed: {}", s.all_passed);
    out
}
