//! Macroscopic fractal geometry on the integer lattice: exponential shells,
//! cube covers, dimension fits, skeletons, thickness and tail exponents.
//!
//! Shell `n` is `V_n \ V_{n-1}` with `V_n = [-e^n, e^n)^d`. On integer
//! points, `x` lies in `V_n` iff every `|x_i| <= floor(e^n)` (n >= 1), and
//! `V_0 = {-1, 0}^d`. Points are stored flat (`d` coordinates per point).

use std::collections::{BTreeMap, HashMap};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_field::{FieldSample, LatticeSpec};
use crate::kernels::{z_variance, ModelParams};

/// Largest shell index whose outer radius fits in an `i64`.
pub const MAX_SHELL: u32 = 43;

const FLOOR_EXP: [i64; 44] = [
    1,
    2,
    7,
    20,
    54,
    148,
    403,
    1096,
    2980,
    8103,
    22026,
    59874,
    162754,
    442413,
    1202604,
    3269017,
    8886110,
    24154952,
    65659969,
    178482300,
    485165195,
    1318815734,
    3584912846,
    9744803446,
    26489122129,
    72004899337,
    195729609428,
    532048240601,
    1446257064291,
    3931334297144,
    10686474581524,
    29048849665247,
    78962960182680,
    214643579785916,
    583461742527454,
    1586013452313430,
    4311231547115195,
    11719142372802611,
    31855931757113756,
    86593400423993746,
    235385266837019985,
    639843493530054949,
    1739274941520501047,
    4727839468229346561,
];

/// `floor(e^n)`, exact.
pub fn floor_exp(n: u32) -> i64 {
    FLOOR_EXP[n as usize]
}

fn axis_level(v: i64) -> Option<u32> {
    if v == 0 || v == -1 {
        return Some(0);
    }
    let a = v.unsigned_abs();
    (1..=MAX_SHELL).find(|&n| a <= FLOOR_EXP[n as usize] as u64)
}

/// Index of the shell containing the integer point `x`.
pub fn shell_of(x: &[i64]) -> Result<u32> {
    let mut n = 0;
    for &v in x {
        n = n.max(axis_level(v).ok_or_else(|| {
            Error::Geometry(format!("coordinate {v} lies beyond shell {MAX_SHELL}"))
        })?);
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shell {
    pub n: u32,
    pub d: usize,
}

impl Shell {
    pub fn new(n: u32, d: usize) -> Result<Self> {
        if n > MAX_SHELL || d == 0 {
            return Err(Error::Geometry(format!("shell {n} in dimension {d} not representable")));
        }
        Ok(Self { n, d })
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.d && shell_of(x).ok() == Some(self.n)
    }

    /// Number of integer points in `V_n`, per axis.
    fn axis_width(n: u32) -> u128 {
        if n == 0 {
            2
        } else {
            2 * FLOOR_EXP[n as usize] as u128 + 1
        }
    }

    /// Number of integer points of the shell.
    pub fn site_count(&self) -> u128 {
        let outer = Self::axis_width(self.n).pow(self.d as u32);
        if self.n == 0 {
            return outer;
        }
        outer - Self::axis_width(self.n - 1).pow(self.d as u32)
    }

    /// Inclusive integer range `[floor(e^{n-1}) + 1, floor(e^n)]`, the
    /// per-axis extent of the positive-orthant patch `[e^{n-1}, e^n)`.
    pub fn patch_axis(&self) -> (i64, i64) {
        if self.n == 0 {
            return (0, 0);
        }
        (FLOOR_EXP[self.n as usize - 1] + 1, FLOOR_EXP[self.n as usize])
    }

    /// Lattice spec of the positive-orthant patch at unit spacing.
    pub fn patch_lattice(&self) -> Result<LatticeSpec> {
        let (lo, hi) = self.patch_axis();
        LatticeSpec::new(vec![lo as f64; self.d], 1.0, vec![(hi - lo + 1) as usize; self.d])
    }
}

/// Half-open cube `[x_1, x_1 + r) x ... x [x_d, x_d + r)` with `r >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub corner: Vec<f64>,
    pub side: f64,
}

impl Cube {
    pub fn new(corner: Vec<f64>, side: f64) -> Result<Self> {
        if !(side >= 1.0) {
            return Err(Error::InvalidArgument(format!("cube side {side} < 1")));
        }
        Ok(Self { corner, side })
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.iter()
            .zip(&self.corner)
            .all(|(&v, &c)| (v as f64) >= c && (v as f64) < c + self.side)
    }
}

/// Which threshold rule produced a peak set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeRecord {
    pub tag: String,
    pub gamma: f64,
}

impl GaugeRecord {
    pub fn new(tag: &str, gamma: f64) -> Self {
        Self {
            tag: tag.to_string(),
            gamma,
        }
    }
}

/// Duplicate-free integer point set, stored per shell in sorted flat form.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet {
    pub d: usize,
    shells: BTreeMap<u32, Vec<i64>>,
    pub gauge: GaugeRecord,
    pub source: String,
}

impl PeakSet {
    /// Builds a set from a flat coordinate list (`d` per point).
    pub fn from_flat(d: usize, flat: &[i64], gauge: GaugeRecord, source: &str) -> Result<Self> {
        if d == 0 || flat.len() % d != 0 {
            return Err(Error::InvalidArgument("flat point list length is not a multiple of d".into()));
        }
        let mut per: BTreeMap<u32, Vec<Vec<i64>>> = BTreeMap::new();
        for p in flat.chunks(d) {
            per.entry(shell_of(p)?).or_default().push(p.to_vec());
        }
        let shells = per
            .into_iter()
            .map(|(n, mut pts)| {
                pts.sort_unstable();
                pts.dedup();
                (n, pts.concat())
            })
            .collect();
        Ok(Self {
            d,
            shells,
            gauge,
            source: source.to_string(),
        })
    }

    pub fn from_points(d: usize, points: &[Vec<i64>], gauge: GaugeRecord, source: &str) -> Result<Self> {
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::InvalidArgument("point of wrong dimension".into()));
        }
        Self::from_flat(d, &points.concat(), gauge, source)
    }

    /// Checked variant for points tagged with a claimed shell.
    pub fn from_tagged(d: usize, tagged: &[(Vec<i64>, u32)], gauge: GaugeRecord, source: &str) -> Result<Self> {
        for (p, n) in tagged {
            if shell_of(p)? != *n {
                return Err(Error::ShellMembership {
                    point: p.clone(),
                    shell: *n,
                });
            }
        }
        let flat: Vec<i64> = tagged.iter().flat_map(|(p, _)| p.iter().copied()).collect();
        Self::from_flat(d, &flat, gauge, source)
    }

    pub fn empty(d: usize, gauge: GaugeRecord, source: &str) -> Self {
        Self {
            d,
            shells: BTreeMap::new(),
            gauge,
            source: source.to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.shells.values().map(|v| v.len() / self.d).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of points in shell `n`.
    pub fn count(&self, n: u32) -> u64 {
        self.shells.get(&n).map_or(0, |v| (v.len() / self.d) as u64)
    }

    /// Occupied shell indices, ascending.
    pub fn shells(&self) -> Vec<u32> {
        self.shells.keys().copied().collect()
    }

    /// Flat sorted coordinates of the points in shell `n`.
    pub fn shell_points(&self, n: u32) -> &[i64] {
        self.shells.get(&n).map_or(&[], |v| v.as_slice())
    }

    pub fn points(&self) -> impl Iterator<Item = (&[i64], u32)> + '_ {
        self.shells
            .iter()
            .flat_map(move |(&n, v)| v.chunks(self.d).map(move |p| (p, n)))
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        let Ok(n) = shell_of(x) else { return false };
        let v = self.shell_points(n);
        let k = v.len() / self.d;
        let (mut lo, mut hi) = (0, k);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match v[mid * self.d..(mid + 1) * self.d].cmp(x) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    pub fn is_subset_of(&self, other: &PeakSet) -> bool {
        self.points().all(|(p, _)| other.contains(p))
    }
}

/// Cover construction used for `nu_rho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverScheme {
    UnitLattice,
    GreedyDyadic,
}

impl std::str::FromStr for CoverScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit-lattice" | "unit" => Ok(CoverScheme::UnitLattice),
            "greedy-dyadic" | "dyadic" => Ok(CoverScheme::GreedyDyadic),
            _ => Err(Error::InvalidArgument(format!("unknown cover scheme '{s}'"))),
        }
    }
}

/// Cover cost `sum_i (side_i / e^n)^rho` of the points (flat, `d` per point)
/// of shell `n`. Both schemes are upper bounds on the minimum over all covers.
pub fn nu_rho(n: u32, d: usize, flat: &[i64], rho: f64, scheme: CoverScheme) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho = {rho} must be positive")));
    }
    let mut pts: Vec<&[i64]> = flat.chunks(d).collect();
    for p in &pts {
        if shell_of(p)? != n {
            return Err(Error::ShellMembership {
                point: p.to_vec(),
                shell: n,
            });
        }
    }
    pts.sort_unstable();
    pts.dedup();
    let scale = (-(n as f64) * rho).exp();
    match scheme {
        CoverScheme::UnitLattice => Ok(pts.len() as f64 * scale),
        CoverScheme::GreedyDyadic => Ok(dyadic_cost(&pts, d, rho) * scale),
    }
}

/// Sum over maximal fully occupied aligned dyadic blocks of `side^rho`,
/// merging only when `rho < d` (otherwise unit boxes are never worse).
fn dyadic_cost(pts: &[&[i64]], d: usize, rho: f64) -> f64 {
    if rho >= d as f64 || pts.is_empty() {
        return pts.len() as f64;
    }
    let full_children = 1usize << d;
    let mut level: Vec<Vec<i64>> = pts.iter().map(|p| p.to_vec()).collect();
    let mut cost = 0.0;
    let mut k = 0;
    loop {
        let mut parents: HashMap<Vec<i64>, usize> = HashMap::new();
        for b in &level {
            *parents.entry(b.iter().map(|v| v >> 1).collect()).or_default() += 1;
        }
        let side = 2f64.powi(k).powf(rho);
        let mut next = Vec::new();
        for b in &level {
            let parent: Vec<i64> = b.iter().map(|v| v >> 1).collect();
            if parents[&parent] != full_children {
                cost += side;
            }
        }
        for (parent, c) in parents {
            if c == full_children {
                next.push(parent);
            }
        }
        if next.is_empty() {
            break;
        }
        level = next;
        k += 1;
    }
    cost
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellRow {
    pub n: u32,
    pub count: u64,
    /// `nu_rho` for each entry of the report's rho grid.
    pub nu: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionFit {
    pub estimate: f64,
    /// Two standard errors.
    pub band: f64,
    pub slope_se: f64,
    pub dispersion: f64,
    pub n_min: u32,
    pub n_max: u32,
    pub nonzero_shells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub d: usize,
    pub scheme: CoverScheme,
    pub rho_grid: Vec<f64>,
    pub rows: Vec<ShellRow>,
    pub fit: Option<DimensionFit>,
}

/// Per-shell counts and cover costs over `shells`.
pub fn cover_report(
    set: &PeakSet,
    shells: RangeInclusive<u32>,
    rho_grid: &[f64],
    scheme: CoverScheme,
) -> Result<CoverReport> {
    let mut rows = Vec::new();
    for n in shells {
        let flat = set.shell_points(n);
        let nu = rho_grid
            .iter()
            .map(|&rho| nu_rho(n, set.d, flat, rho, scheme))
            .collect::<Result<Vec<_>>>()?;
        rows.push(ShellRow {
            n,
            count: set.count(n),
            nu,
        });
    }
    Ok(CoverReport {
        d: set.d,
        scheme,
        rho_grid: rho_grid.to_vec(),
        rows,
        fit: None,
    })
}

impl CoverReport {
    /// Unit-lattice report straight from occupied-box counts.
    pub fn from_counts(d: usize, counts: &[(u32, u64)], rho_grid: &[f64]) -> Self {
        let rows = counts
            .iter()
            .map(|&(n, count)| ShellRow {
                n,
                count,
                nu: rho_grid
                    .iter()
                    .map(|&rho| count as f64 * (-(n as f64) * rho).exp())
                    .collect(),
            })
            .collect();
        Self {
            d,
            scheme: CoverScheme::UnitLattice,
            rho_grid: rho_grid.to_vec(),
            rows,
            fit: None,
        }
    }
}

/// Exponential growth rate of occupied counts over `n_range`, by Poisson
/// regression `log E count_n = c + s n` (iteratively reweighted least
/// squares). Zero-count shells enter the likelihood. The band is twice the
/// slope's standard error, inflated by the Pearson dispersion when it
/// exceeds 1.
pub fn estimate_dimension(report: &CoverReport, n_range: RangeInclusive<u32>) -> Result<DimensionFit> {
    let rows: Vec<&ShellRow> = report.rows.iter().filter(|r| n_range.contains(&r.n)).collect();
    let nonzero = rows.iter().filter(|r| r.count > 0).count();
    if nonzero < 4 {
        return Err(Error::InsufficientShells {
            needed: 4,
            found: nonzero,
        });
    }
    let xbar = rows.iter().map(|r| r.n as f64).sum::<f64>() / rows.len() as f64;
    let x: Vec<f64> = rows.iter().map(|r| r.n as f64 - xbar).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.count as f64).collect();
    // start from least squares on log(count + 1/2)
    let ly: Vec<f64> = y.iter().map(|v| (v + 0.5).ln()).collect();
    let start = crate::stats::ols(&x, &ly);
    let (mut c, mut s) = (start.intercept, start.slope);
    let mut info = [[0.0; 2]; 2];
    for _ in 0..100 {
        let mut u = [0.0; 2];
        info = [[0.0; 2]; 2];
        for (&xi, &yi) in x.iter().zip(&y) {
            let mu = (c + s * xi).exp();
            u[0] += yi - mu;
            u[1] += (yi - mu) * xi;
            info[0][0] += mu;
            info[0][1] += mu * xi;
            info[1][1] += mu * xi * xi;
        }
        info[1][0] = info[0][1];
        let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
        let dc = (info[1][1] * u[0] - info[0][1] * u[1]) / det;
        let ds = (info[0][0] * u[1] - info[1][0] * u[0]) / det;
        // damp steps that would overflow the exponent
        let damp = (1.0f64).min(2.0 / (dc.abs() + ds.abs() * x.iter().fold(0.0f64, |a, v| a.max(v.abs()))).max(1e-300));
        c += damp * dc;
        s += damp * ds;
        if dc.abs() + ds.abs() < 1e-12 {
            break;
        }
    }
    let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
    let var_s = info[0][0] / det;
    let k = rows.len();
    let pearson: f64 = x
        .iter()
        .zip(&y)
        .map(|(&xi, &yi)| {
            let mu = (c + s * xi).exp();
            (yi - mu).powi(2) / mu
        })
        .sum();
    let dispersion = if k > 2 { (pearson / (k - 2) as f64).max(1.0) } else { 1.0 };
    let slope_se = (dispersion * var_s).sqrt();
    Ok(DimensionFit {
        estimate: s,
        band: 2.0 * slope_se,
        slope_se,
        dispersion,
        n_min: *n_range.start(),
        n_max: *n_range.end(),
        nonzero_shells: nonzero,
    })
}

/// Threshold rule for tall peaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gauge {
    /// `Z_t(x) >= (2 Var(Z_t) gamma log+ |x|)^{1/2}`.
    LinearShe,
    /// `log+ u_t(x) >= gamma t^{(alpha-beta)/(2alpha-beta)} (log+ |x|)^{alpha/(2alpha-beta)}`.
    Pam,
}

impl Gauge {
    pub fn tag(self) -> &'static str {
        match self {
            Gauge::LinearShe => "linear-she",
            Gauge::Pam => "pam",
        }
    }
}

impl std::str::FromStr for Gauge {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear-she" | "linear" => Ok(Gauge::LinearShe),
            "pam" => Ok(Gauge::Pam),
            _ => Err(Error::InvalidArgument(format!("unknown gauge '{s}'"))),
        }
    }
}

/// `log(max(r, e))`.
pub fn log_plus(r: f64) -> f64 {
    r.max(std::f64::consts::E).ln()
}

/// Gauge threshold at distance `r` from the origin; for the PAM gauge it is
/// a threshold on `log+ u`. `variance` is `Var Z_t` (linear gauge only).
pub fn gauge_threshold(gauge: Gauge, params: &ModelParams, variance: f64, gamma: f64, r: f64) -> f64 {
    match gauge {
        Gauge::LinearShe => (2.0 * variance * gamma * log_plus(r)).sqrt(),
        Gauge::Pam => {
            let (a, b) = (params.alpha, params.beta);
            gamma * params.t.powf((a - b) / (2.0 * a - b)) * log_plus(r).powf(a / (2.0 * a - b))
        }
    }
}

/// Sites whose value meets the gauge at their own distance from the origin.
/// The lattice must have unit spacing and integer origin.
pub fn extract_peaks(
    lattice: &LatticeSpec,
    values: &[f64],
    params: &ModelParams,
    gauge: Gauge,
    gamma: f64,
    source: &str,
) -> Result<PeakSet> {
    if lattice.spacing != 1.0 {
        return Err(Error::Spacing(lattice.spacing));
    }
    if lattice.origin.iter().any(|o| o.fract() != 0.0) {
        return Err(Error::Geometry(format!("origin {:?} is not an integer point", lattice.origin)));
    }
    if values.len() != lattice.len() {
        return Err(Error::InvalidArgument("value count does not match lattice".into()));
    }
    let variance = match gauge {
        Gauge::LinearShe => z_variance(params)?,
        Gauge::Pam => 0.0,
    };
    let origin: Vec<i64> = lattice.origin.iter().map(|&o| o as i64).collect();
    let mut flat = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let idx = lattice.multi_index(i);
        let p: Vec<i64> = idx.iter().zip(&origin).map(|(&k, &o)| o + k as i64).collect();
        let r = p.iter().map(|&c| (c as f64).powi(2)).sum::<f64>().sqrt();
        let thr = gauge_threshold(gauge, params, variance, gamma, r);
        let stat = match gauge {
            Gauge::LinearShe => v,
            Gauge::Pam => log_plus(v),
        };
        if stat >= thr {
            flat.extend_from_slice(&p);
        }
    }
    PeakSet::from_flat(lattice.d, &flat, GaugeRecord::new(gauge.tag(), gamma), source)
}

/// [`extract_peaks`] on a sampled linear field.
pub fn extract_field_peaks(field: &FieldSample, gamma: f64) -> Result<PeakSet> {
    extract_peaks(
        &field.lattice,
        &field.values,
        &field.params,
        Gauge::LinearShe,
        gamma,
        &format!("field seed={} scheme={}", field.seed, field.scheme.tag()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSpec {
    pub theta: f64,
    pub n: u32,
    pub d: usize,
}

impl SkeletonSpec {
    pub fn new(theta: f64, n: u32, d: usize) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidArgument(format!("theta = {theta} outside (0, 1)")));
        }
        Ok(Self { theta, n, d })
    }

    /// `floor(e^{n(1-theta)}) + 1`.
    pub fn per_axis(&self) -> usize {
        (self.n as f64 * (1.0 - self.theta)).exp().floor() as usize + 1
    }

    /// `e^n + j e^{theta n}` for `0 <= j <= e^{n(1-theta)}`.
    pub fn axis(&self) -> Vec<f64> {
        let n = self.n as f64;
        let step = (self.theta * n).exp();
        (0..self.per_axis()).map(|j| n.exp() + j as f64 * step).collect()
    }
}

/// The anchors `A_n(theta)^d`, as real points.
pub fn skeleton(spec: &SkeletonSpec) -> Vec<Vec<f64>> {
    let axis = spec.axis();
    let mut pts = vec![Vec::new()];
    for _ in 0..spec.d {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    pts
}

/// Union of skeletons `n in ns`, snapped up to integer points (which land in
/// shell `n + 1`: `e^n < ceil(e^n + j e^{theta n}) <= floor(e^{n+1})`).
pub fn skeleton_set(theta: f64, ns: RangeInclusive<u32>, d: usize) -> Result<PeakSet> {
    let mut flat = Vec::new();
    for n in ns {
        let spec = SkeletonSpec::new(theta, n, d)?;
        for p in skeleton(&spec) {
            flat.extend(p.iter().map(|v| v.ceil() as i64));
        }
    }
    PeakSet::from_flat(d, &flat, GaugeRecord::new("skeleton", theta), "skeleton")
}

/// Outcome of a thickness test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thickness {
    pub thick: bool,
    /// First skeleton anchor `(n, x)` whose cube misses the set.
    pub witness: Option<(u32, Vec<f64>)>,
    pub n_max: u32,
}

/// Checks `E ∩ Q(x, e^{theta n}) != ∅` for every `x` in `Pi_n(theta)` and
/// `from <= n <= n_max`, where `n_max + 1` is the outermost occupied shell
/// (skeleton `n` lives in shell `n + 1`).
pub fn is_theta_thick(set: &PeakSet, theta: f64, from: u32) -> Result<Thickness> {
    let n_max = set.shells().last().map_or(from, |&s| s.saturating_sub(1)).max(from);
    for n in from..=n_max {
        let spec = SkeletonSpec::new(theta, n, set.d)?;
        let side = (theta * n as f64).exp();
        for x in skeleton(&spec) {
            if !cube_meets(set, &x, side) {
                return Ok(Thickness {
                    thick: false,
                    witness: Some((n, x)),
                    n_max,
                });
            }
        }
    }
    Ok(Thickness {
        thick: true,
        witness: None,
        n_max,
    })
}

fn cube_meets(set: &PeakSet, corner: &[f64], side: f64) -> bool {
    let lo: Vec<i64> = corner.iter().map(|c| c.ceil() as i64).collect();
    // largest integer strictly below c + side
    let hi: Vec<i64> = corner
        .iter()
        .map(|c| {
            let e = c + side;
            let f = e.floor() as i64;
            if f as f64 == e {
                f - 1
            } else {
                f
            }
        })
        .collect();
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return false;
    }
    let n_lo = shell_of(&lo).unwrap_or(MAX_SHELL);
    let n_hi = shell_of(&hi).unwrap_or(MAX_SHELL);
    let d = set.d;
    for n in n_lo.min(n_hi)..=n_lo.max(n_hi) {
        let flat = set.shell_points(n);
        // points are sorted lexicographically: start at the first with x_0 >= lo_0
        let k = flat.len() / d;
        let (mut a, mut b) = (0, k);
        while a < b {
            let m = (a + b) / 2;
            if flat[m * d] < lo[0] {
                a = m + 1;
            } else {
                b = m;
            }
        }
        for p in flat[a * d..].chunks(d) {
            if p[0] > hi[0] {
                break;
            }
            if p.iter().zip(&lo).zip(&hi).all(|((v, l), h)| v >= l && v <= h) {
                return true;
            }
        }
    }
    false
}

/// Empirical tail levels: exceedance count and the level between the
/// `k`-th and `(k+1)`-th largest samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailLevel {
    pub z: f64,
    pub exceedances: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Slope of `log(-log P)` on `log z`.
    pub b_hat: f64,
    pub b_se: f64,
    /// Grid value nearest to `b_hat`, used for the constants.
    pub b_used: f64,
    /// `exp(intercept)` of the regression.
    pub c_intercept: f64,
    /// Min and max of `-log P / z^b` over the upper half of the levels.
    pub c_lower: f64,
    pub c_upper: f64,
    pub levels: Vec<TailLevel>,
}

/// Level selection for [`tail_exponent_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailWindow {
    /// Largest exceedance probability used.
    pub p_max: f64,
    pub min_exceedances: usize,
    pub levels: usize,
}

impl Default for TailWindow {
    fn default() -> Self {
        Self {
            p_max: 0.1,
            min_exceedances: 20,
            levels: 16,
        }
    }
}

pub fn tail_exponent_fit(samples: &[f64], b_grid: &[f64]) -> Result<TailFit> {
    tail_exponent_fit_with(samples, b_grid, TailWindow::default())
}

pub fn tail_exponent_fit_with(samples: &[f64], b_grid: &[f64], window: TailWindow) -> Result<TailFit> {
    if samples.len() < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "tail fit needs at least 1e4 samples, got {}",
            samples.len()
        )));
    }
    let mut v = samples.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let n = v.len();
    let k_hi = ((n as f64 * window.p_max) as usize).min(n - 1);
    let k_lo = window.min_exceedances;
    if k_hi <= k_lo {
        return Err(Error::Censored {
            exceedances: k_hi,
            needed: k_lo,
        });
    }
    let ratio = (k_hi as f64 / k_lo as f64).powf(1.0 / (window.levels - 1) as f64);
    let mut ks: Vec<usize> = (0..window.levels)
        .map(|i| (k_lo as f64 * ratio.powi(i as i32)).round() as usize)
        .collect();
    ks.dedup();
    let mut levels = Vec::new();
    for &k in ks.iter().rev() {
        let z = 0.5 * (v[k - 1] + v[k]);
        let exceed = v.partition_point(|&s| s > z);
        if z > 0.0 && exceed >= k_lo && exceed < n {
            levels.push(TailLevel {
                z,
                exceedances: exceed,
                probability: exceed as f64 / n as f64,
            });
        }
    }
    if levels.len() < 3 {
        return Err(Error::Censored {
            exceedances: levels.last().map_or(0, |l| l.exceedances),
            needed: k_lo,
        });
    }
    let x: Vec<f64> = levels.iter().map(|l| l.z.ln()).collect();
    let y: Vec<f64> = levels.iter().map(|l| (-l.probability.ln()).ln()).collect();
    let fit = crate::stats::ols(&x, &y);
    let b_used = b_grid
        .iter()
        .copied()
        .min_by(|a, b| (a - fit.slope).abs().total_cmp(&(b - fit.slope).abs()))
        .unwrap_or(fit.slope);
    let upper = &levels[levels.len() / 2..];
    let ratios: Vec<f64> = upper
        .iter()
        .map(|l| -l.probability.ln() / l.z.powf(b_used))
        .collect();
    Ok(TailFit {
        b_hat: fit.slope,
        b_se: fit.slope_se,
        b_used,
        c_intercept: fit.intercept.exp(),
        c_lower: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        c_upper: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn g() -> GaugeRecord {
        GaugeRecord::new("test", 0.0)
    }

    #[test]
    fn shell_membership() {
        assert_eq!(shell_of(&[0]).unwrap(), 0);
        assert_eq!(shell_of(&[-1]).unwrap(), 0);
        assert_eq!(shell_of(&[1]).unwrap(), 1);
        assert_eq!(shell_of(&[-2]).unwrap(), 1);
        assert_eq!(shell_of(&[2]).unwrap(), 1);
        assert_eq!(shell_of(&[3]).unwrap(), 2);
        assert_eq!(shell_of(&[7, 0]).unwrap(), 2);
        assert_eq!(shell_of(&[8, 0]).unwrap(), 3);
        assert_eq!(Shell::new(3, 1).unwrap().site_count(), 26);
        assert_eq!(Shell::new(0, 2).unwrap().site_count(), 4);
        assert_eq!(Shell::new(2, 1).unwrap().patch_axis(), (3, 7));
        // shells partition the lattice
        let total: u128 = (0..=4).map(|n| Shell::new(n, 2).unwrap().site_count()).sum();
        assert_eq!(total, 109u128.pow(2));
    }

    #[test]
    fn nu_rho_basic_cases() {
        assert_eq!(nu_rho(5, 1, &[], 0.5, CoverScheme::UnitLattice).unwrap(), 0.0);
        assert_relative_eq!(
            nu_rho(5, 1, &[100], 0.7, CoverScheme::GreedyDyadic).unwrap(),
            (-5.0f64 * 0.7).exp()
        );
        assert!(matches!(
            nu_rho(5, 1, &[3], 0.5, CoverScheme::UnitLattice),
            Err(Error::ShellMembership { .. })
        ));
    }

    #[test]
    fn dyadic_merges_full_blocks() {
        // 8..=15 is a full aligned block of side 8 inside shell 3
        let pts: Vec<i64> = (8..16).collect();
        let unit = nu_rho(3, 1, &pts, 0.5, CoverScheme::UnitLattice).unwrap();
        let dy = nu_rho(3, 1, &pts, 0.5, CoverScheme::GreedyDyadic).unwrap();
        assert_relative_eq!(unit, 8.0 * (-1.5f64).exp());
        assert_relative_eq!(dy, 8f64.sqrt() * (-1.5f64).exp(), max_relative = 1e-14);
    }

    /// Exact minimum over covers by aligned dyadic cubes contained in the
    /// shell, by brute-force enumeration of cube subsets.
    fn brute_force_dyadic_cover(n: u32, pts: &[i64], rho: f64) -> f64 {
        let hi = floor_exp(n);
        let lo = floor_exp(n - 1);
        let in_shell = |x: i64| x.abs() > lo && x.abs() <= hi;
        let mut cubes: Vec<(i64, i64)> = Vec::new();
        let mut side = 1i64;
        while side <= 2 * hi {
            let mut a = (-hi).div_euclid(side) * side;
            while a <= hi {
                if (a..a + side).all(in_shell) {
                    cubes.push((a, side));
                }
                a += side;
            }
            side *= 2;
        }
        // restrict to cubes meeting the set; the others never help
        cubes.retain(|&(a, s)| pts.iter().any(|&p| p >= a && p < a + s));
        assert!(cubes.len() <= 22, "{} cubes", cubes.len());
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << cubes.len()) {
            let covered = pts.iter().all(|&p| {
                cubes
                    .iter()
                    .enumerate()
                    .any(|(i, &(a, s))| mask >> i & 1 == 1 && p >= a && p < a + s)
            });
            if covered {
                let cost: f64 = cubes
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &(_, s))| (s as f64).powf(rho))
                    .sum();
                best = best.min(cost);
            }
        }
        best * (-(n as f64) * rho).exp()
    }

    #[test]
    fn dyadic_cover_against_exhaustive_search() {
        // full shell 2 (d = 1) at rho = d: every cover costs its total length
        let full2: Vec<i64> = (-7..=7).filter(|x: &i64| x.abs() >= 3).collect();
        let exact = brute_force_dyadic_cover(2, &full2, 1.0);
        let greedy = nu_rho(2, 1, &full2, 1.0, CoverScheme::GreedyDyadic).unwrap();
        assert_relative_eq!(exact, 10.0 * (-2.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(greedy, exact, max_relative = 1e-14);
        // most of the positive half of shell 3, at rho = d and below
        let half3: Vec<i64> = (8..=19).collect();
        for rho in [1.0, 0.6, 0.3] {
            let exact = brute_force_dyadic_cover(3, &half3, rho);
            let greedy = nu_rho(3, 1, &half3, rho, CoverScheme::GreedyDyadic).unwrap();
            let unit = nu_rho(3, 1, &half3, rho, CoverScheme::UnitLattice).unwrap();
            assert!(exact <= greedy + 1e-12 && greedy <= unit + 1e-12);
            assert!(greedy / exact < 2.0, "rho {rho}: gap {}", greedy / exact);
        }
        // the full-shell cost at rho = d does not grow with n
        for n in 3..=12 {
            let full: Vec<i64> = (floor_exp(n - 1) + 1..=floor_exp(n)).flat_map(|x| [x, -x]).collect();
            let v = nu_rho(n, 1, &full, 1.0, CoverScheme::GreedyDyadic).unwrap();
            assert!(v <= 2.0, "shell {n}: {v}");
        }
    }

    #[test]
    fn skeleton_examples() {
        let s = SkeletonSpec::new(0.5, 2, 1).unwrap();
        let e = std::f64::consts::E;
        let pts = skeleton(&s);
        assert_eq!(pts.len(), 3);
        for (p, want) in pts.iter().zip([e * e, e * e + e, e * e + 2.0 * e]) {
            assert_relative_eq!(p[0], want, max_relative = 1e-14);
        }
        assert_eq!(skeleton(&SkeletonSpec::new(0.4, 3, 2).unwrap()).len(), 49);
        assert_eq!(SkeletonSpec::new(0.999, 6, 1).unwrap().per_axis(), 2);
        assert!(SkeletonSpec::new(1.0, 3, 1).is_err());
        let set = skeleton_set(0.5, 3..=8, 2).unwrap();
        for n in 3..=8 {
            assert_eq!(set.count(n + 1), (SkeletonSpec::new(0.5, n, 2).unwrap().per_axis() as u64).pow(2));
        }
    }

    #[test]
    fn thickness_examples() {
        let full: Vec<i64> = (1..=1096).collect();
        let set = PeakSet::from_flat(1, &full, g(), "full").unwrap();
        assert!(is_theta_thick(&set, 0.3, 1).unwrap().thick);
        let empty = PeakSet::empty(1, g(), "empty");
        let t = is_theta_thick(&empty, 0.5, 4).unwrap();
        assert!(!t.thick);
        assert_eq!(t.witness.unwrap().0, 4);
        let sk = skeleton_set(0.5, 2..=9, 2).unwrap();
        assert!(is_theta_thick(&sk, 0.5, 2).unwrap().thick);
        // a coarser skeleton cannot hit every finer cube
        let coarse = skeleton_set(0.8, 2..=9, 1).unwrap();
        assert!(!is_theta_thick(&coarse, 0.3, 2).unwrap().thick);
    }

    #[test]
    fn dimension_of_full_lattice_and_skeletons() {
        let counts: Vec<(u32, u64)> = (5..=14)
            .map(|n| (n, Shell::new(n, 1).unwrap().site_count() as u64))
            .collect();
        let fit = estimate_dimension(&CoverReport::from_counts(1, &counts, &[1.0]), 5..=14).unwrap();
        assert!((fit.estimate - 1.0).abs() <= fit.band.max(0.01), "{fit:?}");
        let set = skeleton_set(0.5, 4..=13, 1).unwrap();
        let rep = cover_report(&set, 5..=14, &[0.5, 1.0], CoverScheme::UnitLattice).unwrap();
        let fit = estimate_dimension(&rep, 5..=14).unwrap();
        assert!((fit.estimate - 0.5).abs() <= fit.band, "{fit:?}");
        assert!(matches!(
            estimate_dimension(&CoverReport::from_counts(1, &[(5, 3), (6, 0), (7, 2)], &[1.0]), 5..=7),
            Err(Error::InsufficientShells { .. })
        ));
    }

    #[test]
    fn peak_extraction_gauges() {
        let q = ModelParams::new(1.5, 0.5, 1, 1.0).unwrap();
        let lattice = LatticeSpec::line(20.0, 1.0, 5).unwrap();
        let values = [-1.0, 0.5, 2.0, 10.0, 0.0];
        let all = extract_peaks(&lattice, &values, &q, Gauge::LinearShe, 0.0, "t").unwrap();
        assert_eq!(all.len(), 4);
        let none = extract_peaks(&lattice, &values, &q, Gauge::LinearShe, 1e9, "t").unwrap();
        assert!(none.is_empty());
        let mid = extract_peaks(&lattice, &values, &q, Gauge::LinearShe, 1.0, "t").unwrap();
        assert!(mid.is_subset_of(&all) && mid.contains(&[23]));
        let bad = LatticeSpec::line(20.0, 0.5, 5).unwrap();
        assert!(matches!(
            extract_peaks(&bad, &values, &q, Gauge::LinearShe, 1.0, "t"),
            Err(Error::Spacing(_))
        ));
        // PAM gauge: log+ u is at least 1, so a threshold below 1 keeps everything
        let pam = extract_peaks(&lattice, &[0.1, 1.0, 3.0, 50.0, 1e-3], &q, Gauge::Pam, 0.1, "t").unwrap();
        assert_eq!(pam.len(), 5);
    }

    #[test]
    fn peak_set_invariants() {
        let s = PeakSet::from_flat(2, &[9, 1, 9, 1, -3, 2], g(), "x").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.count(3), 1);
        assert!(PeakSet::from_tagged(1, &[(vec![9], 2)], g(), "x").is_err());
    }

    #[test]
    fn exponential_tail_fit() {
        use rand::Rng;
        let mut rng = crate::rng::stream(1, &[]);
        let xs: Vec<f64> = (0..200_000).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let fit = tail_exponent_fit(&xs, &[0.5, 1.0, 1.5, 2.0]).unwrap();
        assert!((fit.b_hat - 1.0).abs() < 0.1, "{fit:?}");
        assert_eq!(fit.b_used, 1.0);
        assert!(fit.c_lower <= 1.1 && fit.c_upper >= 0.9);
        assert!(tail_exponent_fit(&xs[..100], &[]).is_err());
    }
}
