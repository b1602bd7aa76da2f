//! Samplers for the stationary Gaussian solution `Z_t` of the linear equation.
//!
//! Three schemes are offered:
//!
//! * circulant-exact: circulant embedding of the true covariance (d = 1, 2);
//! * spectral-torus: periodic field whose Fourier weights are the spectral
//!   mass of each frequency cell (aliases folded in), so the one-point
//!   variance is exact and the covariance is the periodized one;
//! * block-independent: the lattice is cut into blocks that are sampled
//!   exactly and independently; the neglected cross-block correlation is
//!   bounded and recorded.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{riesz_constant, z_covariance_radial, z_variance, ModelParams, QUAD_TOL};
use crate::quadrature::{integrate_radial, PowerLaw, Radial};
use crate::rng;
use crate::special::GaussLegendre;

/// Largest circulant the embedding loop will try, in complex entries.
pub const MAX_EMBEDDING: usize = 1 << 24;

/// Uniform rectangular lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub d: usize,
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
}

impl LatticeSpec {
    pub fn new(origin: Vec<f64>, spacing: f64, shape: Vec<usize>) -> Result<Self> {
        if shape.is_empty() || origin.len() != shape.len() {
            return Err(Error::InvalidArgument(
                "origin and shape must have the same positive length".into(),
            ));
        }
        if shape.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument(format!("shape {shape:?} has an empty axis")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!("spacing {spacing} must be positive")));
        }
        Ok(Self {
            d: shape.len(),
            origin,
            spacing,
            shape,
        })
    }

    /// `n` sites on a line starting at `origin`.
    pub fn line(origin: f64, spacing: f64, n: usize) -> Result<Self> {
        Self::new(vec![origin], spacing, vec![n])
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of the row-major flat index `i`.
    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.d];
        for k in (0..self.d).rev() {
            idx[k] = i % self.shape[k];
            i /= self.shape[k];
        }
        idx
    }

    pub fn position(&self, i: usize) -> Vec<f64> {
        self.multi_index(i)
            .iter()
            .zip(&self.origin)
            .map(|(&k, &o)| o + k as f64 * self.spacing)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    CirculantExact,
    SpectralTorus,
    BlockIndependent,
}

impl Scheme {
    pub fn code(self) -> u8 {
        match self {
            Scheme::CirculantExact => 0,
            Scheme::SpectralTorus => 1,
            Scheme::BlockIndependent => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Scheme::CirculantExact),
            1 => Ok(Scheme::SpectralTorus),
            2 => Ok(Scheme::BlockIndependent),
            _ => Err(Error::Format(format!("unknown scheme code {c}"))),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::CirculantExact => "circulant-exact",
            Scheme::SpectralTorus => "spectral-torus",
            Scheme::BlockIndependent => "block-independent",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circulant-exact" | "exact" => Ok(Scheme::CirculantExact),
            "spectral-torus" | "spectral" => Ok(Scheme::SpectralTorus),
            "block-independent" | "block" => Ok(Scheme::BlockIndependent),
            _ => Err(Error::InvalidArgument(format!("unknown scheme '{s}'"))),
        }
    }
}

/// Sampler bookkeeping carried alongside the values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    /// Circulant sizes actually used, per axis.
    pub embedding: Vec<usize>,
    /// Sites per axis per block (block-independent scheme).
    pub block: Option<usize>,
    /// Upper bound on the correlation dropped between blocks.
    pub cross_block_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub lattice: LatticeSpec,
    pub values: Vec<f64>,
    pub params: ModelParams,
    pub seed: u64,
    pub scheme: Scheme,
    pub meta: SampleMeta,
}

impl FieldSample {
    /// Standard deviation of the one-point marginal.
    pub fn marginal_sd(&self) -> Result<f64> {
        Ok(z_variance(&self.params)?.sqrt())
    }
}

/// `Cov(Z_t(x), Z_t(x + lag))`.
pub fn z_covariance(lag: &[f64], params: &ModelParams) -> Result<f64> {
    if lag.len() != params.d {
        return Err(Error::InvalidArgument(format!(
            "lag has dimension {}, model has {}",
            lag.len(),
            params.d
        )));
    }
    let r = lag.iter().map(|v| v * v).sum::<f64>().sqrt();
    z_covariance_radial(r, params)
}

pub fn z_correlation(lag: f64, params: &ModelParams) -> Result<f64> {
    Ok(z_covariance_radial(lag, params)? / z_variance(params)?)
}

/// Limit of `Corr(h) h^beta` as `h -> inf`: `t c_{beta,d} / Var Z_t`.
pub fn asymptotic_decay_constant(params: &ModelParams) -> Result<f64> {
    Ok(params.t * riesz_constant(params) / z_variance(params)?)
}

/// `c3` with `Corr(h) <= c3 h^{-beta}` for all `h >= from`: the larger of the
/// asymptotic constant and `Corr(h) h^beta` sampled on geometric lags.
pub fn decay_constant(params: &ModelParams, from: f64) -> Result<f64> {
    let mut c3 = asymptotic_decay_constant(params)?;
    for k in 0..=18 {
        let h = from * 10f64.powf(k as f64 / 6.0);
        c3 = c3.max(z_correlation(h, params)? * h.powf(params.beta));
    }
    Ok(c3)
}

/// Lag at which the correlation falls to 0.05.
pub fn correlation_length(params: &ModelParams) -> Result<f64> {
    let target = 0.05;
    let (mut lo, mut hi) = (0.0, params.t.powf(1.0 / params.alpha));
    while z_correlation(hi, params)? > target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::QuadratureNonconvergence("correlation never reaches 0.05".into()));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if z_correlation(mid, params)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Hash, PartialEq, Eq, Clone, Copy)]
struct ModelKey([u64; 6]);

impl ModelKey {
    fn new(p: &ModelParams, spacing: f64) -> Self {
        ModelKey([
            p.alpha.to_bits(),
            p.beta.to_bits(),
            p.d as u64,
            p.t.to_bits(),
            spacing.to_bits(),
            0,
        ])
    }
}

/// Covariance at integer lags (in units of the spacing), memoized per model
/// and spacing; keyed by the squared lag so d = 1 and d = 2 share the table.
fn covariance_table() -> &'static Mutex<HashMap<ModelKey, Arc<Mutex<HashMap<u64, f64>>>>> {
    static T: OnceLock<Mutex<HashMap<ModelKey, Arc<Mutex<HashMap<u64, f64>>>>>> = OnceLock::new();
    T.get_or_init(|| Mutex::new(HashMap::new()))
}

fn lattice_covariances(params: &ModelParams, spacing: f64, squared_lags: &[u64]) -> Result<Vec<f64>> {
    let table = covariance_table()
        .lock()
        .unwrap()
        .entry(ModelKey::new(params, spacing))
        .or_default()
        .clone();
    let missing: Vec<u64> = {
        let t = table.lock().unwrap();
        let mut m: Vec<u64> = squared_lags.iter().copied().filter(|k| !t.contains_key(k)).collect();
        m.sort_unstable();
        m.dedup();
        m
    };
    let mut fresh = Vec::with_capacity(missing.len());
    for &k in &missing {
        fresh.push((k, z_covariance_radial(spacing * (k as f64).sqrt(), params)?));
    }
    let mut t = table.lock().unwrap();
    t.extend(fresh);
    Ok(squared_lags.iter().map(|k| t[k]).collect())
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static P: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    P.get_or_init(|| Mutex::new(FftPlanner::new()))
}

pub(crate) fn fft_forward(n: usize) -> Arc<dyn Fft<f64>> {
    planner().lock().unwrap().plan_fft_forward(n)
}

pub(crate) fn fft_inverse(n: usize) -> Arc<dyn Fft<f64>> {
    planner().lock().unwrap().plan_fft_inverse(n)
}

/// In-place d-dimensional FFT of a row-major array.
pub(crate) fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let d = shape.len();
    let total: usize = shape.iter().product();
    let mut buf = Vec::new();
    for axis in 0..d {
        let n = shape[axis];
        if n == 1 {
            continue;
        }
        let fft = if inverse { fft_inverse(n) } else { fft_forward(n) };
        let stride: usize = shape[axis + 1..].iter().product();
        if stride == 1 {
            fft.process(data);
            continue;
        }
        buf.resize(n, Complex64::new(0.0, 0.0));
        let outer = total / (n * stride);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * n * stride + s;
                for k in 0..n {
                    buf[k] = data[base + k * stride];
                }
                fft.process(&mut buf);
                for k in 0..n {
                    data[base + k * stride] = buf[k];
                }
            }
        }
    }
}

/// Square roots of the circulant eigenvalues, scaled for direct synthesis.
#[derive(Debug)]
struct Embedding {
    shape: Vec<usize>,
    sqrt_eig: Vec<f64>,
}

fn embeddings() -> &'static Mutex<HashMap<(ModelKey, Vec<usize>), Arc<Embedding>>> {
    static E: OnceLock<Mutex<HashMap<(ModelKey, Vec<usize>), Arc<Embedding>>>> = OnceLock::new();
    E.get_or_init(|| Mutex::new(HashMap::new()))
}

fn initial_size(n: usize) -> usize {
    if n <= 1 {
        1
    } else {
        (2 * (n - 1)).next_power_of_two()
    }
}

fn embedding(params: &ModelParams, spacing: f64, shape: &[usize]) -> Result<Arc<Embedding>> {
    if params.d > 2 || shape.len() != params.d {
        return Err(Error::InvalidArgument(format!(
            "exact sampling is offered for d = 1, 2 (lattice d = {}, model d = {})",
            shape.len(),
            params.d
        )));
    }
    let key = (ModelKey::new(params, spacing), shape.to_vec());
    if let Some(e) = embeddings().lock().unwrap().get(&key) {
        return Ok(e.clone());
    }
    let mut m: Vec<usize> = shape.iter().map(|&n| initial_size(n)).collect();
    loop {
        let total: usize = m.iter().product();
        if total > MAX_EMBEDDING {
            return Err(Error::EmbeddingFailure {
                min_eigenvalue: f64::NAN,
                size: total,
            });
        }
        let folded = |i: usize, mk: usize| i.min(mk - i) as u64;
        let lags: Vec<u64> = (0..total)
            .map(|flat| {
                if m.len() == 1 {
                    folded(flat, m[0]).pow(2)
                } else {
                    folded(flat / m[1], m[0]).pow(2) + folded(flat % m[1], m[1]).pow(2)
                }
            })
            .collect();
        let cov = lattice_covariances(params, spacing, &lags)?;
        let mut data: Vec<Complex64> = cov.iter().map(|&c| Complex64::new(c, 0.0)).collect();
        fft_nd(&mut data, &m, false);
        let max = data.iter().map(|z| z.re).fold(f64::MIN, f64::max);
        let min = data.iter().map(|z| z.re).fold(f64::MAX, f64::min);
        if min >= -1e-10 * max {
            let sqrt_eig = data
                .iter()
                .map(|z| (z.re.max(0.0) / total as f64).sqrt())
                .collect();
            let e = Arc::new(Embedding { shape: m, sqrt_eig });
            embeddings().lock().unwrap().insert(key, e.clone());
            return Ok(e);
        }
        if total * 2 > MAX_EMBEDDING {
            return Err(Error::EmbeddingFailure {
                min_eigenvalue: min,
                size: total,
            });
        }
        // grow the axis that is relatively smallest
        let axis = (0..m.len())
            .min_by(|&a, &b| (m[a] / shape[a].max(1)).cmp(&(m[b] / shape[b].max(1))))
            .unwrap();
        m[axis] *= 2;
    }
}

impl Embedding {
    /// Two independent draws (real and imaginary parts) on the embedding.
    fn synthesize<R: Rng>(&self, rng: &mut R) -> Vec<Complex64> {
        let mut w: Vec<Complex64> = self
            .sqrt_eig
            .iter()
            .map(|&s| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                Complex64::new(s * a, s * b)
            })
            .collect();
        fft_nd(&mut w, &self.shape, false);
        w
    }

    fn restrict(&self, full: &[Complex64], shape: &[usize], imag: bool) -> Vec<f64> {
        let total: usize = shape.iter().product();
        let pick = |z: &Complex64| if imag { z.im } else { z.re };
        (0..total)
            .map(|flat| {
                let idx = if shape.len() == 1 {
                    flat
                } else {
                    (flat / shape[1]) * self.shape[1] + flat % shape[1]
                };
                pick(&full[idx])
            })
            .collect()
    }
}

/// One realization of `Z_t` on the lattice with exactly the target
/// covariance, by circulant embedding (d = 1 or 2).
pub fn sample_field_exact(lattice: &LatticeSpec, params: &ModelParams, seed: u64) -> Result<FieldSample> {
    let emb = embedding(params, lattice.spacing, &lattice.shape)?;
    let mut rng = rng::stream(seed, &[0]);
    let full = emb.synthesize(&mut rng);
    let values = emb.restrict(&full, &lattice.shape, false);
    Ok(FieldSample {
        lattice: lattice.clone(),
        values,
        params: *params,
        seed,
        scheme: Scheme::CirculantExact,
        meta: SampleMeta {
            embedding: emb.shape.clone(),
            ..Default::default()
        },
    })
}

/// Block-independent sampler: contiguous blocks of `block` sites per axis,
/// each sampled exactly from its own stream.
pub fn sample_field_block_independent(
    lattice: &LatticeSpec,
    params: &ModelParams,
    block: usize,
    seed: u64,
) -> Result<FieldSample> {
    if block == 0 {
        return Err(Error::InvalidArgument("block must be positive".into()));
    }
    let reach = block as f64 * lattice.spacing;
    if reach <= 2.0 * params.t.powf(1.0 / params.alpha) {
        return Err(Error::InvalidArgument(format!(
            "block extent {reach} must exceed 2 t^(1/alpha) = {}",
            2.0 * params.t.powf(1.0 / params.alpha)
        )));
    }
    if lattice.d > 2 {
        return Err(Error::InvalidArgument("block sampler supports d = 1, 2".into()));
    }
    let counts: Vec<usize> = lattice.shape.iter().map(|&n| n.div_ceil(block)).collect();
    let n_blocks: usize = counts.iter().product();
    let mut values = vec![0.0; lattice.len()];
    let mut embedding_shape = Vec::new();
    for b in 0..n_blocks {
        let bidx: Vec<usize> = if lattice.d == 1 {
            vec![b]
        } else {
            vec![b / counts[1], b % counts[1]]
        };
        let starts: Vec<usize> = bidx.iter().map(|&k| k * block).collect();
        let bshape: Vec<usize> = starts
            .iter()
            .zip(&lattice.shape)
            .map(|(&s, &n)| block.min(n - s))
            .collect();
        let emb = embedding(params, lattice.spacing, &bshape)?;
        if embedding_shape.is_empty() {
            embedding_shape = emb.shape.clone();
        }
        let mut rng = rng::stream(seed, &[1, b as u64]);
        let full = emb.synthesize(&mut rng);
        let local = emb.restrict(&full, &bshape, false);
        for (li, v) in local.into_iter().enumerate() {
            let gi = if lattice.d == 1 {
                starts[0] + li
            } else {
                (starts[0] + li / bshape[1]) * lattice.shape[1] + starts[1] + li % bshape[1]
            };
            values[gi] = v;
        }
    }
    let c3 = decay_constant(params, reach)?;
    Ok(FieldSample {
        lattice: lattice.clone(),
        values,
        params: *params,
        seed,
        scheme: Scheme::BlockIndependent,
        meta: SampleMeta {
            embedding: embedding_shape,
            block: Some(block),
            cross_block_bound: Some(c3 * reach.powf(-params.beta)),
        },
    })
}

/// Smallest block (power of two, unit-free site count) whose recorded
/// cross-block bound is below `bound`.
pub fn block_for_bound(params: &ModelParams, spacing: f64, bound: f64) -> Result<usize> {
    let mut block = 16usize;
    loop {
        let reach = block as f64 * spacing;
        if reach > 2.0 * params.t.powf(1.0 / params.alpha)
            && decay_constant(params, reach)? * reach.powf(-params.beta) < bound
        {
            return Ok(block);
        }
        block *= 2;
        if block > 1 << 22 {
            return Err(Error::InvalidArgument(format!("no feasible block for bound {bound}")));
        }
    }
}

/// Mass of `S(|xi|)` over an axis-aligned frequency cell, aliases included.
fn spectral_weights(params: &ModelParams, spacing: f64, shape: &[usize]) -> Result<Vec<f64>> {
    let d = shape.len();
    let gl = GaussLegendre::new(6);
    let s = |r2: f64| -> f64 {
        let r = r2.sqrt();
        let x = 2.0 * params.t * r.powf(params.alpha);
        -(-x).exp_m1() * r.powf(params.beta - d as f64 - params.alpha) / 2.0
    };
    let cell: Vec<f64> = shape.iter().map(|&n| 2.0 * PI / (n as f64 * spacing)).collect();
    let period = 2.0 * PI / spacing;
    let aliases: i64 = 3;
    let freq = |k: usize, n: usize| -> f64 {
        let k = k as i64;
        let n = n as i64;
        (if k <= n / 2 { k } else { k - n }) as f64
    };
    let total: usize = shape.iter().product();
    let mut w = vec![0.0; total];
    let zero_cell = radial_cell_mass(params, &cell)?;
    for (flat, wk) in w.iter_mut().enumerate() {
        let idx: Vec<usize> = if d == 1 {
            vec![flat]
        } else {
            vec![flat / shape[1], flat % shape[1]]
        };
        let centre: Vec<f64> = idx.iter().zip(shape).zip(&cell).map(|((&k, &n), &c)| freq(k, n) * c).collect();
        let mut mass = 0.0;
        let alias_range = -aliases..=aliases;
        let combos: Vec<Vec<i64>> = if d == 1 {
            alias_range.map(|a| vec![a]).collect()
        } else {
            alias_range
                .clone()
                .flat_map(|a| (-aliases..=aliases).map(move |b| vec![a, b]))
                .collect()
        };
        for shift in combos {
            let c: Vec<f64> = centre.iter().zip(&shift).map(|(&c, &j)| c + j as f64 * period).collect();
            if c.iter().all(|&v| v == 0.0) {
                mass += zero_cell;
                continue;
            }
            if d == 1 {
                mass += gl.integrate(c[0] - cell[0] / 2.0, c[0] + cell[0] / 2.0, |x| s(x * x));
            } else {
                mass += gl.integrate(c[0] - cell[0] / 2.0, c[0] + cell[0] / 2.0, |x| {
                    gl.integrate(c[1] - cell[1] / 2.0, c[1] + cell[1] / 2.0, |y| s(x * x + y * y))
                });
            }
        }
        *wk = mass;
    }
    // Restore the exact one-point variance lost to the finite alias range.
    let var = z_variance(params)?;
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v *= var / sum);
    Ok(w)
}

/// Spectral mass of the cell centred at the origin; handles the integrable
/// `r^{beta - d}` singularity radially.
fn radial_cell_mass(params: &ModelParams, cell: &[f64]) -> Result<f64> {
    let d = cell.len();
    let radial = |cut: f64| -> Result<f64> {
        let g = |r: f64| {
            let x = 2.0 * params.t * r.powf(params.alpha);
            -(-x).exp_m1() * r.powf(params.beta - d as f64 - params.alpha) / 2.0 * r.powi(d as i32 - 1)
        };
        integrate_radial(
            &Radial {
                g: &g,
                small: PowerLaw {
                    coef: params.t,
                    exponent: params.beta - 1.0,
                    edge: (1e-13 / params.t).powf(1.0 / params.alpha).min(cut * 1e-6),
                },
                large: None,
                cutoff: Some(cut),
            },
            QUAD_TOL,
        )
    };
    if d == 1 {
        return Ok(2.0 * radial(cell[0] / 2.0)?);
    }
    // square cell in polar coordinates, split at the corner angle
    let (a, b) = (cell[0] / 2.0, cell[1] / 2.0);
    let corner = (b / a).atan();
    let gl = GaussLegendre::new(16);
    let mut err = None;
    let mut part = |lo: f64, hi: f64, edge: &dyn Fn(f64) -> f64| {
        gl.integrate(lo, hi, |phi| match radial(edge(phi)) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                0.0
            }
        })
    };
    let q1 = part(0.0, corner, &|phi: f64| a / phi.cos()) + part(corner, PI / 2.0, &|phi: f64| b / phi.sin());
    if let Some(e) = err {
        return Err(e);
    }
    Ok(4.0 * q1)
}

/// Periodic approximation on the lattice torus with cell-averaged spectrum.
pub fn sample_field_spectral_torus(lattice: &LatticeSpec, params: &ModelParams, seed: u64) -> Result<FieldSample> {
    if lattice.d != params.d || lattice.d > 2 {
        return Err(Error::InvalidArgument("spectral-torus sampler supports d = 1, 2".into()));
    }
    let w = spectral_weights(params, lattice.spacing, &lattice.shape)?;
    let mut rng = rng::stream(seed, &[2]);
    let mut z: Vec<Complex64> = w
        .iter()
        .map(|&m| {
            let s = m.sqrt();
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Complex64::new(s * a, s * b)
        })
        .collect();
    fft_nd(&mut z, &lattice.shape, true);
    Ok(FieldSample {
        lattice: lattice.clone(),
        values: z.iter().map(|c| c.re).collect(),
        params: *params,
        seed,
        scheme: Scheme::SpectralTorus,
        meta: SampleMeta {
            embedding: lattice.shape.clone(),
            ..Default::default()
        },
    })
}

/// Dispatches on the scheme; `block` is only read by the block sampler.
pub fn sample_field(
    lattice: &LatticeSpec,
    params: &ModelParams,
    scheme: Scheme,
    block: usize,
    seed: u64,
) -> Result<FieldSample> {
    match scheme {
        Scheme::CirculantExact => sample_field_exact(lattice, params, seed),
        Scheme::SpectralTorus => sample_field_spectral_torus(lattice, params, seed),
        Scheme::BlockIndependent => sample_field_block_independent(lattice, params, block, seed),
    }
}

/// `m` standard normals with common pairwise correlation `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquiCorrelatedSpec {
    pub m: usize,
    pub r: f64,
}

impl EquiCorrelatedSpec {
    pub fn new(m: usize, r: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::InvalidArgument(format!("correlation {r} outside [0, 1)")));
        }
        Ok(Self { m, r })
    }
}

/// `Y + U_i` with a common factor `Y ~ N(0, r)` and independent `U_i ~ N(0, 1 - r)`.
pub fn sample_equicorrelated(spec: &EquiCorrelatedSpec, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, &[3]);
    equicorrelated_with(spec, &mut rng)
}

pub fn equicorrelated_with<R: Rng>(spec: &EquiCorrelatedSpec, rng: &mut R) -> Vec<f64> {
    let y: f64 = rng.sample::<f64, _>(StandardNormal) * spec.r.sqrt();
    let u = (1.0 - spec.r).sqrt();
    (0..spec.m)
        .map(|_| y + u * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Estimated exceedance probability of the box supremum at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub lambda: f64,
    pub probability: f64,
    pub stderr: f64,
}

/// `P{sup over the meshed box [0, side]^d of Z_t / sd > lambda}` by
/// independent exact samples. The mesh misses excursions between sites, so
/// the estimate is biased low.
pub fn sup_box_tail(
    params: &ModelParams,
    box_side: f64,
    lambda_grid: &[f64],
    replicas: usize,
    mesh: f64,
    seed: u64,
) -> Result<Vec<TailPoint>> {
    if !(mesh > 0.0 && box_side >= 0.0) {
        return Err(Error::InvalidArgument("mesh must be positive and box side nonnegative".into()));
    }
    let n = (box_side / mesh).floor() as usize + 1;
    let lattice = LatticeSpec::new(vec![0.0; params.d], mesh, vec![n; params.d])?;
    let emb = embedding(params, mesh, &lattice.shape)?;
    let sd = z_variance(params)?.sqrt();
    let mut counts = vec![0usize; lambda_grid.len()];
    let mut done = 0;
    let mut rep = 0u64;
    while done < replicas {
        let mut rng = rng::stream(seed, &[4, rep]);
        rep += 1;
        let full = emb.synthesize(&mut rng);
        for imag in [false, true] {
            if done == replicas {
                break;
            }
            let v = emb.restrict(&full, &lattice.shape, imag);
            let sup = v.iter().fold(f64::MIN, |a, &b| a.max(b)) / sd;
            for (c, &l) in counts.iter_mut().zip(lambda_grid) {
                if sup > l {
                    *c += 1;
                }
            }
            done += 1;
        }
    }
    Ok(lambda_grid
        .iter()
        .zip(counts)
        .map(|(&lambda, c)| {
            let p = c as f64 / replicas as f64;
            TailPoint {
                lambda,
                probability: p,
                stderr: (p * (1.0 - p) / replicas as f64).sqrt(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{correlation, ks_critical_1pct, ks_statistic_normal, Moments};
    use approx::assert_relative_eq;

    fn p(a: f64, b: f64, d: usize, t: f64) -> ModelParams {
        ModelParams::new(a, b, d, t).unwrap()
    }

    #[test]
    fn lattice_indexing() {
        let l = LatticeSpec::new(vec![1.0, -2.0], 0.5, vec![3, 4]).unwrap();
        assert_eq!(l.len(), 12);
        assert_eq!(l.multi_index(7), vec![1, 3]);
        assert_eq!(l.position(7), vec![1.5, -0.5]);
        assert!(LatticeSpec::new(vec![0.0], 0.0, vec![3]).is_err());
        assert!(LatticeSpec::new(vec![0.0], 1.0, vec![0]).is_err());
    }

    #[test]
    fn covariance_is_even_and_matches_variance_at_zero() {
        let q = p(1.5, 0.5, 1, 1.0);
        assert_eq!(z_covariance(&[3.5], &q).unwrap(), z_covariance(&[-3.5], &q).unwrap());
        assert_relative_eq!(z_covariance(&[0.0], &q).unwrap(), z_variance(&q).unwrap(), max_relative = 1e-12);
        let q2 = p(2.0, 0.5, 2, 1.0);
        assert_relative_eq!(
            z_covariance(&[3.0, 4.0], &q2).unwrap(),
            z_covariance(&[5.0, 0.0], &q2).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn correlation_at_lag_100_below_decay_bound() {
        let q = p(1.5, 0.5, 1, 1.0);
        // mpmath: Corr(100) = 0.058991228731887634
        let c = z_correlation(100.0, &q).unwrap();
        assert_relative_eq!(c, 0.058_991_228_731_887_634, max_relative = 1e-7);
        let c3 = decay_constant(&q, 10.0).unwrap();
        assert!(c <= c3 * 100f64.powf(-0.5) + 1e-12);
        assert_relative_eq!(asymptotic_decay_constant(&q).unwrap(), 0.589_441_244_461_735_3, max_relative = 1e-8);
    }

    #[test]
    fn exact_sampler_is_deterministic() {
        let q = p(1.5, 0.5, 1, 1.0);
        let l = LatticeSpec::line(0.0, 1.0, 50).unwrap();
        let a = sample_field_exact(&l, &q, 9).unwrap();
        let b = sample_field_exact(&l, &q, 9).unwrap();
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, sample_field_exact(&l, &q, 10).unwrap().values);
        assert!(a.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn embedding_reproduces_covariance() {
        // eigen-decomposition round trip: the embedded first row must equal the table
        let q = p(2.0, 1.0, 2, 0.7);
        let l = LatticeSpec::new(vec![0.0, 0.0], 0.25, vec![5, 6]).unwrap();
        let e = embedding(&q, l.spacing, &l.shape).unwrap();
        let mut row: Vec<Complex64> = e.sqrt_eig.iter().map(|s| Complex64::new(s * s, 0.0)).collect();
        fft_nd(&mut row, &e.shape, true);
        let c = z_covariance(&[0.25 * 2.0, 0.25 * 3.0], &q).unwrap();
        assert_relative_eq!(row[2 * e.shape[1] + 3].re, c, max_relative = 1e-9);
    }

    #[test]
    fn marginals_are_normal_for_every_scheme() {
        let q = p(1.5, 0.5, 1, 1.0);
        let sd = z_variance(&q).unwrap().sqrt();
        let l = LatticeSpec::line(0.0, 1.0, 40).unwrap();
        for scheme in [Scheme::CirculantExact, Scheme::SpectralTorus, Scheme::BlockIndependent] {
            let mut xs = Vec::new();
            for s in 0..2500u64 {
                let f = sample_field(&l, &q, scheme, 8, s).unwrap();
                xs.extend([0, 13, 26, 39].iter().map(|&i| f.values[i] / sd));
            }
            // sites 13 apart are nearly independent; KS at the 1% level on 10^4 draws
            let ks = ks_statistic_normal(&xs);
            assert!(ks < ks_critical_1pct(xs.len()) * 1.25, "{scheme:?}: KS {ks}");
        }
    }

    #[test]
    fn block_sampler_records_bound_and_is_independent_across_blocks() {
        let q = p(1.5, 0.5, 1, 1.0);
        let l = LatticeSpec::line(0.0, 1.0, 200).unwrap();
        let f = sample_field_block_independent(&l, &q, 100, 1).unwrap();
        let c3 = decay_constant(&q, 100.0).unwrap();
        assert_relative_eq!(f.meta.cross_block_bound.unwrap(), c3 * 0.1, max_relative = 1e-12);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for s in 0..3000 {
            let f = sample_field_block_independent(&l, &q, 100, s).unwrap();
            a.push(f.values[99]);
            b.push(f.values[100]);
        }
        assert!(correlation(&a, &b).abs() < 3.0 / (3000f64).sqrt());
        assert!(sample_field_block_independent(&l, &q, 1, 1).is_err());
    }

    #[test]
    fn equicorrelated_sampler() {
        let spec = EquiCorrelatedSpec::new(2, 0.5).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for s in 0..20000 {
            let v = sample_equicorrelated(&spec, s);
            a.push(v[0]);
            b.push(v[1]);
        }
        let r = correlation(&a, &b);
        // SE of r near 0.5 is (1 - r^2)/sqrt(n)
        assert!((r - 0.5).abs() < 3.0 * 0.75 / (20000f64).sqrt(), "r = {r}");
        let m = Moments::from_slice(&a);
        assert!(m.mean().abs() < 3.0 * m.stderr());
        assert!(EquiCorrelatedSpec::new(3, 1.0).is_err());
    }

    #[test]
    fn sup_tail_is_one_at_low_levels_and_monotone() {
        let q = p(1.5, 0.5, 1, 1.0);
        let tail = sup_box_tail(&q, 4.0, &[-10.0, 0.0, 1.0, 2.0], 2000, 0.25, 5).unwrap();
        assert_eq!(tail[0].probability, 1.0);
        for w in tail.windows(2) {
            assert!(w[1].probability <= w[0].probability);
        }
    }

    #[test]
    fn correlation_length_hits_five_percent() {
        let q = p(2.0, 1.0, 2, 1.0);
        let h = correlation_length(&q).unwrap();
        assert_relative_eq!(z_correlation(h, &q).unwrap(), 0.05, max_relative = 1e-6);
    }
}
