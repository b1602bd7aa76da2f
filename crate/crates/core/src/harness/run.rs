//! Experiment pipelines, run directories, `verify` and `report`.
//!
//! A run directory holds `config.toml` (as run), `record.json`, the raw
//! per-shell fields under `fields/`, and the derived tables. Every summary
//! number is a pure function of `config.toml` and the raw fields, which is
//! what `verify` recomputes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind, Plan};
use super::suite::{self, ValidationSummary};
use crate::error::{Error, Result};
use crate::fractal::{
    cover_report, estimate_dimension, extract_peaks, tail_exponent_fit, CoverReport, Gauge, GaugeRecord,
    PeakSet, Shell,
};
use crate::gaussian_field::{block_for_bound, sample_field, LatticeSpec};
use crate::io::{load_field_dump, load_peaks, save_csv, save_field_dump, save_peaks, DumpKind, FieldDump};
use crate::kernels::{z_variance, ModelParams};
use crate::pam::{PamConfig, TorusOps};
use crate::rng::derive_seed;
use crate::stats::ols;

/// Version of the `record.json` layout.
pub const RECORD_SCHEMA: u32 = 1;

const SHELL_LABEL: u64 = 0x5348;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub gamma: f64,
    pub estimate: Option<f64>,
    pub band: Option<f64>,
    pub peaks: u64,
    pub nonzero_shells: usize,
    /// Either no fit (fewer than four occupied shells) or `estimate - band <= 0`.
    pub consistent_with_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSummary {
    pub gauge: Gauge,
    pub shells: (u32, u32),
    pub fit_from: u32,
    pub rows: Vec<GammaRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimsupRow {
    pub n: u32,
    /// Largest `Z_t / sd` over the shell patch.
    pub max: f64,
    pub ratio: f64,
    pub running_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimsupSummary {
    pub d: usize,
    pub target: f64,
    pub rows: Vec<LimsupRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSummary {
    pub samples: usize,
    pub b_hat: f64,
    pub b_se: f64,
    /// Range of `-log P / z^b` at `b = (2 alpha - beta) / alpha`.
    pub c_lower: f64,
    pub c_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketRow {
    pub gamma: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PamDimensionSummary {
    pub dimension: DimensionSummary,
    pub monotone: bool,
    /// Slope of `log(d - estimate)` on `log gamma` and its standard error.
    pub exponent: Option<(f64, f64)>,
    pub exponent_target: f64,
    pub tail: Option<TailSummary>,
    pub bracket: Vec<BracketRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Summary {
    None,
    LinearDimension(DimensionSummary),
    LinearLimsup(LimsupSummary),
    PamDimension(PamDimensionSummary),
    Validation(ValidationSummary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: u32,
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub seed: u64,
    /// `ok`, or `failed: <reason>` with whatever was persisted before the failure.
    pub status: String,
    pub timings: Vec<StageTiming>,
    /// Paths relative to the run directory.
    pub artifacts: Vec<String>,
    pub summary: Summary,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(run_dir.join("record.json"))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Field values of one shell patch at unit spacing.
#[derive(Debug, Clone)]
pub struct ShellField {
    pub n: u32,
    pub dump: FieldDump,
}

struct RunDir {
    root: PathBuf,
    artifacts: Vec<String>,
}

impl RunDir {
    fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    fn path(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.artifacts.push(rel.to_string());
        Ok(p)
    }

    fn csv(&mut self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let p = self.path(rel)?;
        save_csv(&p, header, rows)
    }

    /// Whitespace-separated columns with a `#` header, for gnuplot.
    fn dat(&mut self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut s = format!("# {}\n", header.join(" "));
        for r in rows {
            s.push_str(&r.join(" "));
            s.push('\n');
        }
        let p = self.path(rel)?;
        std::fs::write(p, s)?;
        Ok(())
    }
}

fn field_path(n: u32) -> String {
    format!("fields/shell_{n:02}.mfshe")
}

fn peaks_path(i: usize) -> String {
    format!("peaks/gamma_{i:02}.mfpeaks")
}

fn shell_seed(plan: &Plan, n: u32) -> u64 {
    derive_seed(plan.seed, &[SHELL_LABEL, n as u64])
}

/// Samples `Z_t` on the positive-orthant patch of shell `n`.
pub fn linear_shell(plan: &Plan, params: &ModelParams, n: u32) -> Result<ShellField> {
    let lattice = Shell::new(n, params.d)?.patch_lattice()?;
    let block = match plan.block {
        Some(b) => b,
        None => block_for_bound(params, 1.0, plan.block_bound)?,
    };
    let sample = sample_field(&lattice, params, plan.scheme, block, shell_seed(plan, n))?;
    Ok(ShellField {
        n,
        dump: FieldDump::from_sample(&sample),
    })
}

/// `u_t` on the patch of shell `n` (d = 1): one torus run at spacing
/// `pam_spacing` covering the patch plus margin, read at the integer sites.
pub fn pam_shell(plan: &Plan, params: &ModelParams, n: u32) -> Result<ShellField> {
    let (lo, hi) = Shell::new(n, 1)?.patch_axis();
    let len = (hi - lo + 1) as usize;
    let a = plan.pam_spacing;
    let per_unit = (1.0 / a).round() as usize;
    let grid_n = (((len as f64 + plan.pam_margin) / a).ceil() as usize).next_power_of_two();
    let seed = shell_seed(plan, n);
    let mut cfg = PamConfig::new(*params, grid_n as f64 * a, grid_n, seed)?;
    if plan.dt_scale != 1.0 {
        cfg = cfg.with_dt(cfg.dt * plan.dt_scale)?;
    }
    let run = TorusOps::new(&cfg)?.run(seed)?;
    let values = (0..len).map(|k| run.u[k * per_unit]).collect();
    Ok(ShellField {
        n,
        dump: FieldDump {
            lattice: LatticeSpec::line(lo as f64, 1.0, len)?,
            values,
            params: *params,
            seed,
            kind: DumpKind::PamSnapshot,
        },
    })
}

fn sample_shells(plan: &Plan, params: &ModelParams, workers: usize) -> Result<Vec<ShellField>> {
    let (lo, hi) = plan.shells;
    let ns: Vec<u32> = (lo..=hi).collect();
    crate::par::map(ns.len(), workers, |i| match plan.kind {
        ExperimentKind::PamDimension => pam_shell(plan, params, ns[i]),
        _ => linear_shell(plan, params, ns[i]),
    })
    .into_iter()
    .collect()
}

/// Peak sets per gamma, covers and dimension fits.
pub fn dimension_analysis(
    plan: &Plan,
    params: &ModelParams,
    fields: &[ShellField],
) -> Result<(DimensionSummary, Vec<PeakSet>, Vec<CoverReport>)> {
    let (lo, hi) = plan.shells;
    let mut rows = Vec::new();
    let mut sets = Vec::new();
    let mut reports = Vec::new();
    for &gamma in &plan.gammas {
        let mut flat = Vec::new();
        for f in fields {
            let part = extract_peaks(&f.dump.lattice, &f.dump.values, params, plan.gauge, gamma, "")?;
            for (p, _) in part.points() {
                flat.extend_from_slice(p);
            }
        }
        let source = format!("{} seed={} shells={lo}..={hi}", plan.kind.tag(), plan.seed);
        let set = PeakSet::from_flat(params.d, &flat, GaugeRecord::new(plan.gauge.tag(), gamma), &source)?;
        let mut report = cover_report(&set, lo..=hi, &plan.rho, plan.cover)?;
        let nonzero = report
            .rows
            .iter()
            .filter(|r| r.n >= plan.fit_min && r.count > 0)
            .count();
        let row = match estimate_dimension(&report, plan.fit_min..=hi) {
            Ok(fit) => {
                report.fit = Some(fit);
                GammaRow {
                    gamma,
                    estimate: Some(fit.estimate),
                    band: Some(fit.band),
                    peaks: set.len() as u64,
                    nonzero_shells: nonzero,
                    consistent_with_zero: fit.estimate - fit.band <= 0.0,
                }
            }
            Err(Error::InsufficientShells { .. }) => GammaRow {
                gamma,
                estimate: None,
                band: None,
                peaks: set.len() as u64,
                nonzero_shells: nonzero,
                consistent_with_zero: true,
            },
            Err(e) => return Err(e),
        };
        rows.push(row);
        sets.push(set);
        reports.push(report);
    }
    Ok((
        DimensionSummary {
            gauge: plan.gauge,
            shells: plan.shells,
            fit_from: plan.fit_min,
            rows,
        },
        sets,
        reports,
    ))
}

/// Per-shell maxima of the unit-normalized field.
pub fn limsup_analysis(params: &ModelParams, fields: &[ShellField]) -> Result<LimsupSummary> {
    let sd = z_variance(params)?.sqrt();
    let mut running = f64::NEG_INFINITY;
    let rows = fields
        .iter()
        .map(|f| {
            let max = f.dump.values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) / sd;
            running = running.max(max);
            LimsupRow {
                n: f.n,
                max,
                ratio: max / (f.n as f64).sqrt(),
                running_max: running,
            }
        })
        .collect();
    Ok(LimsupSummary {
        d: params.d,
        target: (2.0 * params.d as f64).sqrt(),
        rows,
    })
}

/// Nonincreasing in gamma up to the combined bands of neighbours.
pub fn monotone_within_bands(rows: &[GammaRow]) -> bool {
    let mut sorted: Vec<&GammaRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    // a missing fit means no growth, i.e. dimension 0
    let value = |r: &GammaRow| (r.estimate.unwrap_or(0.0), r.band.unwrap_or(0.0));
    sorted.windows(2).all(|w| {
        let (e0, b0) = value(w[0]);
        let (e1, b1) = value(w[1]);
        e1 <= e0 + b0 + b1
    })
}

pub fn pam_analysis(
    plan: &Plan,
    params: &ModelParams,
    fields: &[ShellField],
) -> Result<(PamDimensionSummary, Vec<PeakSet>, Vec<CoverReport>)> {
    let (dimension, sets, reports) = dimension_analysis(plan, params, fields)?;
    let d = params.d as f64;
    let b = params.tail_exponent();
    let pts: Vec<(f64, f64)> = dimension
        .rows
        .iter()
        .filter(|r| r.gamma > 0.0)
        .filter_map(|r| r.estimate.map(|e| (r.gamma, d - e)))
        .filter(|&(_, gap)| gap > 0.0)
        .collect();
    let exponent = (pts.len() >= 3).then(|| {
        let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
        let f = ols(&x, &y);
        (f.slope, f.slope_se)
    });
    let samples: Vec<f64> = fields
        .iter()
        .flat_map(|f| f.dump.values.iter().map(|&u| u.max(f64::MIN_POSITIVE).ln()))
        .collect();
    let tail = match tail_exponent_fit(&samples, &[b]) {
        Ok(fit) => Some(TailSummary {
            samples: samples.len(),
            b_hat: fit.b_hat,
            b_se: fit.b_se,
            c_lower: fit.c_lower,
            c_upper: fit.c_upper,
        }),
        Err(Error::Censored { .. }) | Err(Error::InvalidArgument(_)) => None,
        Err(e) => return Err(e),
    };
    let scale = params.t.powf(params.variance_exponent());
    let bracket = tail
        .as_ref()
        .map(|tl| {
            plan.gammas
                .iter()
                .map(|&g| BracketRow {
                    gamma: g,
                    lower: (d - tl.c_upper * scale * g.powf(b)).max(0.0),
                    upper: (d - tl.c_lower * scale * g.powf(b)).max(0.0),
                })
                .collect()
        })
        .unwrap_or_default();
    Ok((
        PamDimensionSummary {
            monotone: monotone_within_bands(&dimension.rows),
            dimension,
            exponent,
            exponent_target: b,
            tail,
            bracket,
        },
        sets,
        reports,
    ))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt)
}

fn write_dimension_tables(
    dir: &mut RunDir,
    summary: &DimensionSummary,
    sets: &[PeakSet],
    reports: &[CoverReport],
) -> Result<()> {
    for (i, set) in sets.iter().enumerate() {
        let p = dir.path(&peaks_path(i))?;
        save_peaks(&p, set)?;
    }
    let rho_cols: Vec<String> = reports
        .first()
        .map(|r| r.rho_grid.iter().map(|rho| format!("nu_rho_{rho}")).collect())
        .unwrap_or_default();
    let mut header = vec!["gamma", "n", "count"];
    header.extend(rho_cols.iter().map(String::as_str));
    let mut rows = Vec::new();
    for (g, rep) in summary.rows.iter().zip(reports) {
        for r in &rep.rows {
            let mut row = vec![fmt(g.gamma), r.n.to_string(), r.count.to_string()];
            row.extend(r.nu.iter().map(|&v| fmt(v)));
            rows.push(row);
        }
    }
    dir.csv("counts.csv", &header, &rows)?;
    let table: Vec<Vec<String>> = summary
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt(r.gamma),
                opt(r.estimate),
                opt(r.band),
                r.peaks.to_string(),
                r.nonzero_shells.to_string(),
            ]
        })
        .collect();
    let head = ["gamma", "estimate", "band", "peaks", "nonzero_shells"];
    dir.csv("dimension.csv", &head, &table)?;
    dir.dat("dimension.dat", &head, &table)
}

fn write_limsup_tables(dir: &mut RunDir, s: &LimsupSummary) -> Result<()> {
    let rows: Vec<Vec<String>> = s
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), fmt(r.max), fmt(r.ratio), fmt(r.running_max)])
        .collect();
    let head = ["n", "max", "ratio", "running_max"];
    dir.csv("limsup.csv", &head, &rows)?;
    dir.dat("limsup.dat", &head, &rows)
}

fn write_pam_tables(dir: &mut RunDir, s: &PamDimensionSummary) -> Result<()> {
    let rows: Vec<Vec<String>> = s
        .bracket
        .iter()
        .map(|r| vec![fmt(r.gamma), fmt(r.lower), fmt(r.upper)])
        .collect();
    let head = ["gamma", "lower", "upper"];
    dir.csv("bracket.csv", &head, &rows)?;
    dir.dat("bracket.dat", &head, &rows)
}

struct Timer {
    timings: Vec<StageTiming>,
    at: Instant,
}

impl Timer {
    fn new() -> Self {
        Self {
            timings: Vec::new(),
            at: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: self.at.elapsed().as_secs_f64(),
        });
        self.at = Instant::now();
    }
}

/// Runs the planned experiment into `plan.dir`. Module errors after the
/// directory exists are recorded in the returned record (status `failed`)
/// and in a `FAILED` marker file.
pub fn run_experiment(plan: &Plan, workers: usize) -> Result<RunRecord> {
    let mut dir = RunDir::new(&plan.dir)?;
    let cfg_path = dir.path("config.toml")?;
    std::fs::write(cfg_path, plan.config.to_toml()?)?;
    let mut timer = Timer::new();
    let mut summary = Summary::None;
    let outcome = execute(plan, workers, &mut dir, &mut timer, &mut summary);
    let status = match &outcome {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("failed: {e}"),
    };
    let marker = plan.dir.join("FAILED");
    if outcome.is_err() {
        std::fs::write(&marker, format!("{status}\n"))?;
    } else if marker.exists() {
        std::fs::remove_file(&marker)?;
    }
    let record = RunRecord {
        schema: RECORD_SCHEMA,
        experiment: plan.kind,
        config_hash: plan.config.hash()?,
        seed: plan.seed,
        status,
        timings: timer.timings,
        artifacts: dir.artifacts,
        summary,
    };
    std::fs::write(plan.dir.join("record.json"), serde_json::to_string_pretty(&record)?)?;
    Ok(record)
}

fn execute(plan: &Plan, workers: usize, dir: &mut RunDir, timer: &mut Timer, summary: &mut Summary) -> Result<()> {
    if plan.kind == ExperimentKind::Validation {
        let s = suite::run_suite(plan, workers);
        timer.lap("suite");
        suite::write_table(&dir.path("validation.csv")?, &s)?;
        *summary = Summary::Validation(s);
        return Ok(());
    }
    let params = plan.model()?;
    let fields = sample_shells(plan, &params, workers)?;
    timer.lap("sample");
    for f in &fields {
        let p = dir.path(&field_path(f.n))?;
        save_field_dump(&p, &f.dump)?;
    }
    timer.lap("persist");
    match plan.kind {
        ExperimentKind::LinearDimension => {
            let (s, sets, reports) = dimension_analysis(plan, &params, &fields)?;
            timer.lap("analyze");
            write_dimension_tables(dir, &s, &sets, &reports)?;
            *summary = Summary::LinearDimension(s);
        }
        ExperimentKind::LinearLimsup => {
            let s = limsup_analysis(&params, &fields)?;
            timer.lap("analyze");
            write_limsup_tables(dir, &s)?;
            *summary = Summary::LinearLimsup(s);
        }
        ExperimentKind::PamDimension => {
            let (s, sets, reports) = pam_analysis(plan, &params, &fields)?;
            timer.lap("analyze");
            write_dimension_tables(dir, &s.dimension, &sets, &reports)?;
            write_pam_tables(dir, &s)?;
            *summary = Summary::PamDimension(s);
        }
        ExperimentKind::Validation => unreachable!(),
    }
    timer.lap("write");
    Ok(())
}

/// Outcome of one `verify` check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    fn push(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            ok,
            detail: detail.into(),
        });
    }
}

/// Recomputes every summary statistic of a run from its persisted raw files.
pub fn verify(run_dir: &Path) -> Result<VerifyReport> {
    let record = RunRecord::load(run_dir)?;
    let cfg = ExperimentConfig::load(&run_dir.join("config.toml"))?;
    let mut plan = Plan::new(&cfg, None)?;
    plan.dir = run_dir.to_path_buf();
    let mut rep = VerifyReport { checks: Vec::new() };
    let hash = cfg.hash()?;
    rep.push("config hash", hash == record.config_hash, format!("{hash} vs {}", record.config_hash));
    let missing: Vec<&String> = record.artifacts.iter().filter(|a| !run_dir.join(a).exists()).collect();
    rep.push("artifacts present", missing.is_empty(), format!("missing: {missing:?}"));
    if !record.ok() {
        rep.push("run status", false, record.status.clone());
        return Ok(rep);
    }
    if let Summary::Validation(s) = &record.summary {
        let table = suite::read_table(&run_dir.join("validation.csv"))?;
        rep.push(
            "validation table",
            suite::consistent(s, &table),
            "pass flags recomputed from measured values and bounds",
        );
        return Ok(rep);
    }
    let params = plan.model()?;
    let (lo, hi) = plan.shells;
    let fields = (lo..=hi)
        .map(|n| {
            Ok(ShellField {
                n,
                dump: load_field_dump(&run_dir.join(field_path(n)))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (recomputed, sets) = match plan.kind {
        ExperimentKind::LinearDimension => {
            let (s, sets, _) = dimension_analysis(&plan, &params, &fields)?;
            (Summary::LinearDimension(s), sets)
        }
        ExperimentKind::LinearLimsup => (Summary::LinearLimsup(limsup_analysis(&params, &fields)?), Vec::new()),
        ExperimentKind::PamDimension => {
            let (s, sets, _) = pam_analysis(&plan, &params, &fields)?;
            (Summary::PamDimension(s), sets)
        }
        ExperimentKind::Validation => unreachable!(),
    };
    rep.push(
        "summary from raw fields",
        recomputed == record.summary,
        "summary recomputed from fields/ and config.toml",
    );
    for (i, set) in sets.iter().enumerate() {
        let stored = load_peaks(&run_dir.join(peaks_path(i)))?;
        rep.push(
            &format!("peaks gamma={}", set.gauge.gamma),
            stored.is_subset_of(set) && set.is_subset_of(&stored),
            format!("{} points", set.len()),
        );
    }
    Ok(rep)
}

/// Plain-text summary of a run directory.
pub fn report(run_dir: &Path) -> Result<String> {
    let r = RunRecord::load(run_dir)?;
    let mut s = String::new();
    let _ = writeln!(s, "experiment {}  seed {}  status {}", r.experiment.tag(), r.seed, r.status);
    let _ = writeln!(s, "config sha256 {}", r.config_hash);
    for t in &r.timings {
        let _ = writeln!(s, "  {:<10} {:>9.2} s", t.stage, t.seconds);
    }
    let dim_table = |s: &mut String, d: &DimensionSummary| {
        let _ = writeln!(s, "gauge {}  shells {}..={}  fit from {}", d.gauge.tag(), d.shells.0, d.shells.1, d.fit_from);
        let _ = writeln!(s, "{:>8} {:>10} {:>8} {:>10} {:>7}", "gamma", "estimate", "band", "peaks", "zero?");
        for row in &d.rows {
            let _ = writeln!(
                s,
                "{:>8.3} {:>10} {:>8} {:>10} {:>7}",
                row.gamma,
                row.estimate.map_or("-".into(), |v| format!("{v:.4}")),
                row.band.map_or("-".into(), |v| format!("{v:.4}")),
                row.peaks,
                row.consistent_with_zero
            );
        }
    };
    match &r.summary {
        Summary::None => {}
        Summary::LinearDimension(d) => dim_table(&mut s, d),
        Summary::LinearLimsup(l) => {
            let _ = writeln!(s, "target sqrt(2d) = {:.4}", l.target);
            let _ = writeln!(s, "{:>4} {:>9} {:>9} {:>9}", "n", "max", "max/sqrt", "running");
            for row in &l.rows {
                let _ = writeln!(s, "{:>4} {:>9.4} {:>9.4} {:>9.4}", row.n, row.max, row.ratio, row.running_max);
            }
        }
        Summary::PamDimension(p) => {
            dim_table(&mut s, &p.dimension);
            let _ = writeln!(s, "monotone within bands: {}", p.monotone);
            match p.exponent {
                Some((e, se)) => {
                    let _ = writeln!(s, "log(d - dim) vs log gamma slope {e:.3} +- {se:.3} (form exponent {:.3})", p.exponent_target);
                }
                None => {
                    let _ = writeln!(s, "too few positive gaps for the exponent fit");
                }
            }
            if let Some(t) = &p.tail {
                let _ = writeln!(
                    s,
                    "log u tail: {} samples, slope {:.3} +- {:.3}, constants [{:.4}, {:.4}]",
                    t.samples, t.b_hat, t.b_se, t.c_lower, t.c_upper
                );
            }
            for b in &p.bracket {
                let _ = writeln!(s, "  gamma {:.3}: bracket [{:.4}, {:.4}]", b.gamma, b.lower, b.upper);
            }
        }
        Summary::Validation(v) => s.push_str(&suite::render(v)),
    }
    Ok(s)
}
