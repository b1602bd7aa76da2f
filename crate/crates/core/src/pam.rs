//! Parabolic Anderson model `du = -(-Delta)^{alpha/2} u dt + u F(dt, dx)`,
//! `u_0 = 1`, Itô: a time stepper on a periodic lattice, the localized
//! Picard iterates driven by a shared white noise, and a Feynman-Kac Monte
//! Carlo for moments.
//!
//! The torus `[0, L)^d` has `N` sites per axis at spacing `a = L / N`. The
//! semigroup uses the lattice symbol `(sum_i (2/a)^2 sin^2(xi_i a / 2))^{alpha/2}`
//! (a fractional power of the lattice Laplacian, so the step kernel is a
//! probability kernel). Over one step the noise increment is
//! `dF = sqrt(dt a^d) (h ⊛ eta)` with `eta` iid standard normal per site and
//! the torus factor `h` defined by its DFT `sqrt(fhat) / a^d`, where
//! `fhat(xi) = (2 pi)^d |xi|^{beta-d}` on the torus frequencies and the zero
//! mode is replaced by the average of `fhat` over its frequency cell.
//!
//! One step is `u <- P_dt [u (1 + dF)]`: the product at the left endpoint,
//! then smoothing.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Exp1, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_field::fft_nd;
use crate::kernels::{riesz_constant, z_covariance_radial, ModelParams};
use crate::rng::{derive_seed, stream, StreamRng};
use crate::special::GaussLegendre;
use crate::stats::Moments;

/// Per-step noise standard deviation targeted by [`PamConfig::new`].
pub const DEFAULT_STEP_SD: f64 = 0.125;
/// Largest per-step noise standard deviation accepted.
pub const MAX_STEP_SD: f64 = 0.25;
/// Magnitude beyond which a step reports a blowup.
pub const BLOWUP: f64 = 1e300;

const NOISE_LABEL: u64 = 0x6e6f;
const STEP_LABEL: u64 = 0x7374;
const FK_LABEL: u64 = 0x666b;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PamConfig {
    pub params: ModelParams,
    pub torus_side: f64,
    /// Sites per axis, a power of two.
    pub grid_n: usize,
    pub dt: f64,
    pub steps: usize,
    /// Largest `dt` with per-step noise sd at most [`MAX_STEP_SD`].
    pub stability_dt: f64,
    /// Multiplies the noise covariance; 0 switches the noise off.
    pub noise_amplitude: f64,
    pub seed: u64,
}

fn steps_for(t: f64, dt: f64) -> usize {
    ((t / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

impl PamConfig {
    /// Chooses `dt = t / steps` so the per-step noise sd is at most
    /// [`DEFAULT_STEP_SD`].
    pub fn new(params: ModelParams, torus_side: f64, grid_n: usize, seed: u64) -> Result<Self> {
        Self::with_amplitude(params, torus_side, grid_n, 1.0, seed)
    }

    pub fn with_amplitude(
        params: ModelParams,
        torus_side: f64,
        grid_n: usize,
        noise_amplitude: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(torus_side > 0.0 && torus_side.is_finite()) {
            return Err(Error::InvalidArgument(format!("torus side {torus_side} must be positive")));
        }
        if grid_n < 2 || !grid_n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("grid_n = {grid_n} must be a power of two >= 2")));
        }
        if params.d > 2 {
            return Err(Error::InvalidArgument("the PAM solver supports d = 1, 2".into()));
        }
        if !(noise_amplitude >= 0.0 && noise_amplitude.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise amplitude {noise_amplitude} < 0")));
        }
        let spectrum = torus_spectrum(&params, torus_side, grid_n, noise_amplitude);
        let rate = site_noise_rate(&spectrum, torus_side, params.d);
        let (stability_dt, target) = if rate > 0.0 {
            (MAX_STEP_SD.powi(2) / rate, DEFAULT_STEP_SD.powi(2) / rate)
        } else {
            (f64::INFINITY, params.t)
        };
        let steps = steps_for(params.t, target);
        Ok(Self {
            params,
            torus_side,
            grid_n,
            dt: params.t / steps as f64,
            steps,
            stability_dt,
            noise_amplitude,
            seed,
        })
    }

    /// Same configuration with the step rounded to `t / ceil(t / dt)`.
    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        let steps = steps_for(self.params.t, dt);
        let dt = self.params.t / steps as f64;
        if dt > self.stability_dt * (1.0 + 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "dt = {dt:e} exceeds the stability bound {:e}",
                self.stability_dt
            )));
        }
        Ok(Self { dt, steps, ..*self })
    }

    pub fn spacing(&self) -> f64 {
        self.torus_side / self.grid_n as f64
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.grid_n; self.params.d]
    }

    pub fn sites(&self) -> usize {
        self.grid_n.pow(self.params.d as u32)
    }

    /// Per-step standard deviation of `dF` at a site.
    pub fn step_sd(&self) -> f64 {
        let spectrum = torus_spectrum(&self.params, self.torus_side, self.grid_n, self.noise_amplitude);
        (self.dt * site_noise_rate(&spectrum, self.torus_side, self.params.d)).sqrt()
    }
}

fn signed_freq(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Frequency vectors of a row-major grid with `n` points per axis.
fn frequencies(d: usize, n: usize, side: f64) -> Vec<Vec<f64>> {
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut i| {
            let mut xi = vec![0.0; d];
            for axis in (0..d).rev() {
                xi[axis] = 2.0 * PI * signed_freq(i % n, n) / side;
                i /= n;
            }
            xi
        })
        .collect()
}

/// Average of `(2 pi)^d |xi|^{beta-d}` over the frequency cell `[-pi/L, pi/L]^d`.
fn zero_mode_average(params: &ModelParams, side: f64) -> f64 {
    let d = params.d;
    let tp = (2.0 * PI).powi(d as i32);
    if params.is_white_noise() {
        return tp;
    }
    let b = params.beta;
    let h = PI / side;
    match d {
        1 => tp * 2.0 * h.powf(b) / b / (2.0 * h),
        _ => {
            // 8 triangles of the square; radial part in closed form
            let gl = GaussLegendre::new(32);
            let ang = gl.integrate(0.0, PI / 4.0, |phi| phi.cos().powf(-b));
            tp * 8.0 * h.powf(b) / b * ang / (2.0 * h).powi(2)
        }
    }
}

/// `fhat` on the torus frequencies, row-major in FFT order.
fn torus_spectrum(params: &ModelParams, side: f64, n: usize, amplitude: f64) -> Vec<f64> {
    let d = params.d;
    let tp = (2.0 * PI).powi(d as i32);
    let mut s: Vec<f64> = frequencies(d, n, side)
        .iter()
        .map(|xi| {
            let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r == 0.0 {
                0.0
            } else {
                amplitude * tp * r.powf(params.beta - d as f64)
            }
        })
        .collect();
    s[0] = amplitude * zero_mode_average(params, side);
    s
}

/// Noise variance per unit time at a site, `L^{-d} sum_k fhat_k`.
fn site_noise_rate(spectrum: &[f64], side: f64, d: usize) -> f64 {
    spectrum.iter().sum::<f64>() / side.powi(d as i32)
}

fn lattice_symbol(xi: &[f64], a: f64, alpha: f64) -> f64 {
    let s: f64 = xi.iter().map(|&x| (2.0 / a * (x * a / 2.0).sin()).powi(2)).sum();
    s.powf(alpha / 2.0)
}

fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Precomputed spectral multipliers of one configuration.
#[derive(Debug, Clone)]
pub struct TorusOps {
    pub cfg: PamConfig,
    shape: Vec<usize>,
    spectrum: Vec<f64>,
    /// `e^{-dt symbol}`.
    semigroup: Vec<f64>,
    /// `sqrt(dt fhat / a^d)`: `dF = IDFT(noise * DFT(eta))`.
    noise: Vec<f64>,
}

/// Final field of one replica plus diagnostics.
#[derive(Debug, Clone)]
pub struct PamRun {
    pub u: Vec<f64>,
    /// Number of site-steps with `1 + dF <= 0`.
    pub negative_factors: u64,
    pub steps: usize,
}

impl TorusOps {
    pub fn new(cfg: &PamConfig) -> Result<Self> {
        let d = cfg.params.d;
        let n = cfg.grid_n;
        let a = cfg.spacing();
        let spectrum = torus_spectrum(&cfg.params, cfg.torus_side, n, cfg.noise_amplitude);
        let semigroup = frequencies(d, n, cfg.torus_side)
            .iter()
            .map(|xi| (-cfg.dt * lattice_symbol(xi, a, cfg.params.alpha)).exp())
            .collect();
        let noise = spectrum
            .iter()
            .map(|&f| (cfg.dt * f / a.powi(d as i32)).sqrt())
            .collect();
        Ok(Self {
            cfg: *cfg,
            shape: cfg.shape(),
            spectrum,
            semigroup,
            noise,
        })
    }

    pub fn sites(&self) -> usize {
        self.spectrum.len()
    }

    /// Generator of the white-noise array sequence for `noise_seed`.
    pub fn eta_stream(noise_seed: u64) -> StreamRng {
        stream(noise_seed, &[NOISE_LABEL])
    }

    pub fn draw_eta(&self, rng: &mut StreamRng) -> Vec<f64> {
        (0..self.sites()).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// Applies the real multiplier `m` in frequency space to two real arrays at once.
    fn filter_pair(&self, m: &[f64], x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = x.len() as f64;
        let mut z: Vec<Complex64> = x.iter().zip(y).map(|(&a, &b)| Complex64::new(a, b)).collect();
        fft_nd(&mut z, &self.shape, false);
        for (v, &w) in z.iter_mut().zip(m) {
            *v *= w;
        }
        fft_nd(&mut z, &self.shape, true);
        (z.iter().map(|v| v.re / n).collect(), z.iter().map(|v| v.im / n).collect())
    }

    fn filter(&self, m: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len() as f64;
        let mut z = to_complex(x);
        fft_nd(&mut z, &self.shape, false);
        for (v, &w) in z.iter_mut().zip(m) {
            *v *= w;
        }
        fft_nd(&mut z, &self.shape, true);
        z.iter().map(|v| v.re / n).collect()
    }

    pub fn noise_increment(&self, eta: &[f64]) -> Vec<f64> {
        self.filter(&self.noise, eta)
    }

    /// One step driven by a given `dF`.
    fn advance(&self, u: &mut Vec<f64>, df: &[f64], step: usize, negative: &mut u64) -> Result<()> {
        for (v, &f) in u.iter_mut().zip(df) {
            if 1.0 + f <= 0.0 {
                *negative += 1;
            }
            *v *= 1.0 + f;
        }
        *u = self.filter(&self.semigroup, u);
        if u.iter().any(|v| !(v.abs() <= BLOWUP)) {
            return Err(Error::Blowup { step });
        }
        Ok(())
    }

    pub fn step(&self, u: &mut Vec<f64>, eta: &[f64], negative: &mut u64) -> Result<()> {
        let df = self.noise_increment(eta);
        self.advance(u, &df, 0, negative)
    }

    /// Runs from `u_0 = 1` to time `t`.
    pub fn run(&self, noise_seed: u64) -> Result<PamRun> {
        let mut rng = Self::eta_stream(noise_seed);
        let mut u = vec![1.0; self.sites()];
        let mut negative = 0;
        let steps = self.cfg.steps;
        let mut j = 0;
        while j < steps {
            let e1 = self.draw_eta(&mut rng);
            if j + 1 < steps {
                let e2 = self.draw_eta(&mut rng);
                let (d1, d2) = self.filter_pair(&self.noise, &e1, &e2);
                self.advance(&mut u, &d1, j, &mut negative)?;
                self.advance(&mut u, &d2, j + 1, &mut negative)?;
                j += 2;
            } else {
                let d1 = self.noise_increment(&e1);
                self.advance(&mut u, &d1, j, &mut negative)?;
                j += 1;
            }
        }
        Ok(PamRun {
            u,
            negative_factors: negative,
            steps,
        })
    }

    /// Real-space torus factor `h` (DFT `sqrt(fhat) / a^d`), by site.
    pub fn factor(&self) -> Vec<f64> {
        let ad = self.cfg.spacing().powi(self.cfg.params.d as i32);
        let m: Vec<f64> = self.spectrum.iter().map(|f| f.sqrt() / ad).collect();
        let mut delta = vec![0.0; self.sites()];
        delta[0] = 1.0;
        self.filter(&m, &delta)
    }

    /// Noise covariance per unit time, `C(z) = L^{-d} sum_k fhat_k e^{i xi z}`, by site offset.
    pub fn noise_covariance(&self) -> Vec<f64> {
        let n = self.sites() as f64;
        let scale = n / self.cfg.torus_side.powi(self.cfg.params.d as i32);
        let mut delta = vec![0.0; self.sites()];
        delta[0] = 1.0;
        let c = self.filter(&self.spectrum, &delta);
        // filter divides by n; the inverse sum needs L^{-d} instead
        c.iter().map(|v| v * scale).collect()
    }

    /// Minimal-image offset of site `i` from the origin, in sites per axis.
    fn offset(&self, mut i: usize) -> Vec<i64> {
        let n = self.cfg.grid_n;
        let d = self.cfg.params.d;
        let mut z = vec![0; d];
        for axis in (0..d).rev() {
            z[axis] = signed_freq(i % n, n) as i64;
            i /= n;
        }
        z
    }
}

/// One step `u_{t+dt}` from `u_t`, with the white noise drawn from `noise_seed`.
pub fn step_pam(state: &[f64], cfg: &PamConfig, noise_seed: u64) -> Result<Vec<f64>> {
    if state.len() != cfg.sites() {
        return Err(Error::InvalidArgument("state size does not match the grid".into()));
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("state has non-finite entries".into()));
    }
    let ops = TorusOps::new(cfg)?;
    let mut rng = stream(noise_seed, &[STEP_LABEL]);
    let eta = ops.draw_eta(&mut rng);
    let mut u = state.to_vec();
    let mut negative = 0;
    ops.step(&mut u, &eta, &mut negative)?;
    Ok(u)
}

/// Replica-averaged first and second moments, from spatial averages per replica.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PamMoments {
    pub replicas: usize,
    pub mean: f64,
    pub mean_stderr: f64,
    pub second: f64,
    pub second_stderr: f64,
    pub negative_factors: u64,
}

pub fn replica_seed(master: u64, replica: usize) -> u64 {
    derive_seed(master, &[replica as u64])
}

pub fn pam_moments(cfg: &PamConfig, replicas: usize, workers: usize) -> Result<PamMoments> {
    let ops = TorusOps::new(cfg)?;
    let per: Vec<Result<(f64, f64, u64)>> = crate::par::map(replicas, workers, |r| {
        let run = ops.run(replica_seed(cfg.seed, r))?;
        let n = run.u.len() as f64;
        let m1 = run.u.iter().sum::<f64>() / n;
        let m2 = run.u.iter().map(|v| v * v).sum::<f64>() / n;
        Ok((m1, m2, run.negative_factors))
    });
    let (mut a, mut b, mut neg) = (Moments::new(), Moments::new(), 0);
    for r in per {
        let (m1, m2, ng) = r?;
        a.push(m1);
        b.push(m2);
        neg += ng;
    }
    Ok(PamMoments {
        replicas,
        mean: a.mean(),
        mean_stderr: a.stderr(),
        second: b.mean(),
        second_stderr: b.stderr(),
        negative_factors: neg,
    })
}

/// `E u_t(x)^2` of the discrete scheme, exactly: with `G_n(z) = E u_n(x) u_n(x+z)`,
/// `G_{n+1} = P_dt^2 ⊛ [G_n (1 + dt C)]`.
pub fn two_point_discrete(cfg: &PamConfig) -> Result<f64> {
    let ops = TorusOps::new(cfg)?;
    let c = ops.noise_covariance();
    let p2: Vec<f64> = ops.semigroup.iter().map(|p| p * p).collect();
    let mut g = vec![1.0; ops.sites()];
    for _ in 0..cfg.steps {
        for (v, &cz) in g.iter_mut().zip(&c) {
            *v *= 1.0 + cfg.dt * cz;
        }
        g = ops.filter(&p2, &g);
    }
    Ok(g[0])
}

/// `E exp(int_0^t f(Y_s) ds)` for the pair difference `Y` (symbol `2|xi|^alpha`)
/// started at 0, by Strang splitting on a fine periodic grid (d = 1). This is
/// the continuum second moment `E u_t(x)^2`.
pub fn two_point_continuum(params: &ModelParams, side: f64, n: usize, steps: usize) -> Result<f64> {
    if params.d != 1 || params.is_white_noise() {
        return Err(Error::InvalidArgument("continuum two-point solver is for d = 1, beta < 1".into()));
    }
    let a = side / n as f64;
    let c = riesz_constant(params);
    let b = params.beta;
    let dt = params.t / steps as f64;
    let shape = [n];
    let pot: Vec<f64> = (0..n)
        .map(|i| {
            let z = signed_freq(i, n).abs() * a;
            let f = if i == 0 {
                c * (a / 2.0).powf(-b) / (1.0 - b)
            } else {
                c * z.powf(-b)
            };
            (dt * f).exp()
        })
        .collect();
    let half: Vec<f64> = frequencies(1, n, side)
        .iter()
        .map(|xi| (-dt * xi[0].abs().powf(params.alpha)).exp())
        .collect();
    let mut w = vec![Complex64::new(1.0, 0.0); n];
    let nf = n as f64;
    let smooth = |w: &mut Vec<Complex64>| {
        fft_nd(w, &shape, false);
        for (v, &m) in w.iter_mut().zip(&half) {
            *v *= m / nf;
        }
        fft_nd(w, &shape, true);
    };
    for _ in 0..steps {
        smooth(&mut w);
        for (v, &p) in w.iter_mut().zip(&pot) {
            *v *= p;
        }
        smooth(&mut w);
    }
    Ok(w[0].re)
}

/// Continuum second moment at three grid levels with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumReference {
    pub value: f64,
    pub error: f64,
    pub levels: [f64; 3],
}

pub fn second_moment_reference(params: &ModelParams) -> Result<ContinuumReference> {
    let side = 64.0 * params.t.powf(1.0 / params.alpha).max(1.0);
    let mut levels = [0.0; 3];
    for (i, lv) in levels.iter_mut().enumerate() {
        let n = 4096usize << i;
        *lv = two_point_continuum(params, side, n, 2000 << i)?;
    }
    let d1 = levels[1] - levels[0];
    let d2 = levels[2] - levels[1];
    // geometric tail of the remaining differences, ratio clamped to [0.05, 0.85]
    let r = if d1 != 0.0 && d2 / d1 > 0.0 {
        (d2 / d1).clamp(0.05, 0.85)
    } else {
        0.85
    };
    Ok(ContinuumReference {
        value: levels[2],
        error: d2.abs() * r / (1.0 - r),
        levels,
    })
}

/// Known bias of the simulator's second moment relative to the continuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentAllowance {
    pub discrete: f64,
    pub reference: f64,
    pub reference_error: f64,
    /// `|discrete - reference| + reference_error`.
    pub value: f64,
}

pub fn second_moment_allowance(cfg: &PamConfig) -> Result<SecondMomentAllowance> {
    let discrete = two_point_discrete(cfg)?;
    let r = second_moment_reference(&cfg.params)?;
    Ok(SecondMomentAllowance {
        discrete,
        reference: r.value,
        reference_error: r.error,
        value: (discrete - r.value).abs() + r.error,
    })
}

/// Truncation radius and iteration count of the localized Picard scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardSpec {
    pub ell: f64,
    pub m: usize,
    pub params: ModelParams,
}

/// `2 m (l t^{1/alpha} + l)`: beyond this sup-norm distance the iterates are independent.
pub fn independence_range(spec: &PicardSpec) -> Result<f64> {
    if !(spec.ell > 1.0) || spec.m < 1 {
        return Err(Error::InvalidArgument(format!(
            "independence needs ell > 1 and m >= 1 (ell = {}, m = {})",
            spec.ell, spec.m
        )));
    }
    let l = spec.ell;
    Ok(2.0 * spec.m as f64 * (l * spec.params.t.powf(1.0 / spec.params.alpha) + l))
}

fn smooth_length(n: usize) -> usize {
    let mut k = n.max(1);
    loop {
        let mut r = k;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return k;
        }
        k += 1;
    }
}

/// Localized Picard iterates `u^{(l,m)}` on the grid of a [`PamConfig`].
///
/// The integration box around each target site is the sup-norm ball of
/// radius `l t^{1/alpha}` with `t` the final time, used at every inner time.
/// The noise is `F^{(h_l)}`: the same `eta` as [`TorusOps::run`] convolved
/// with the torus factor restricted to `|z| <= l`.
pub struct PicardSolver {
    ops: TorusOps,
    pub ell: f64,
    pub box_radius: f64,
    pub whole_torus: bool,
    noise_ell: Vec<f64>,
    tshape: Vec<usize>,
    kernel_hat: Vec<Complex64>,
}

impl PicardSolver {
    pub fn new(cfg: &PamConfig, ell: f64) -> Result<Self> {
        if !(ell > 0.0) {
            return Err(Error::InvalidArgument(format!("ell = {ell} must be positive")));
        }
        let ops = TorusOps::new(cfg)?;
        let p = &cfg.params;
        let l = cfg.torus_side;
        let a = cfg.spacing();
        let box_radius = ell * p.t.powf(1.0 / p.alpha);
        let whole_torus = ell >= l * (p.d as f64).sqrt() / 2.0 && box_radius >= l / 2.0;
        if !whole_torus && box_radius + ell > l / 2.0 {
            return Err(Error::Geometry(format!(
                "Picard box radius {box_radius} plus margin {ell} exceeds half the torus side {l}"
            )));
        }
        let sites = ops.sites();
        let offsets: Vec<Vec<i64>> = (0..sites).map(|i| ops.offset(i)).collect();
        let noise_ell = if whole_torus {
            ops.noise.clone()
        } else {
            let h = ops.factor();
            let scale = (cfg.dt * a.powi(p.d as i32)).sqrt();
            let hl: Vec<f64> = h
                .iter()
                .zip(&offsets)
                .map(|(&v, z)| {
                    let r = z.iter().map(|&k| (k as f64 * a).powi(2)).sum::<f64>().sqrt();
                    if r <= ell * (1.0 + 1e-12) {
                        v * scale
                    } else {
                        0.0
                    }
                })
                .collect();
            let mut z = to_complex(&hl);
            fft_nd(&mut z, &ops.shape, false);
            z.iter().map(|v| v.re).collect()
        };
        let nt = cfg.steps;
        let t2 = smooth_length(2 * nt + 2);
        let mut tshape = vec![t2];
        tshape.extend_from_slice(&ops.shape);
        // K_k(z) = P_k(z) 1{|z|_inf <= R} for k = 1..=nt
        let inside: Vec<bool> = offsets
            .iter()
            .map(|z| whole_torus || z.iter().all(|&k| (k as f64 * a).abs() <= box_radius * (1.0 + 1e-12)))
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); t2 * sites];
        let mut pk = ops.semigroup.clone();
        let mut delta = vec![0.0; sites];
        delta[0] = 1.0;
        for k in 1..=nt {
            let row = ops.filter(&pk, &delta);
            for (s, (&v, &ins)) in row.iter().zip(&inside).enumerate() {
                if ins {
                    kernel[k * sites + s] = Complex64::new(v, 0.0);
                }
            }
            for (q, &s) in pk.iter_mut().zip(&ops.semigroup) {
                *q *= s;
            }
        }
        fft_nd(&mut kernel, &tshape, false);
        Ok(Self {
            ops,
            ell,
            box_radius,
            whole_torus,
            noise_ell,
            tshape,
            kernel_hat: kernel,
        })
    }

    pub fn config(&self) -> &PamConfig {
        &self.ops.cfg
    }

    /// Increments `dF^{(l)}_j` for every step, from the shared noise.
    fn increments(&self, noise_seed: u64) -> Vec<Vec<f64>> {
        let mut rng = TorusOps::eta_stream(noise_seed);
        (0..self.ops.cfg.steps)
            .map(|_| {
                let eta = self.ops.draw_eta(&mut rng);
                self.ops.filter(&self.noise_ell, &eta)
            })
            .collect()
    }

    /// Final-time fields of `u^{(l,k)}` for `k = 0..=m`.
    pub fn iterates(&self, noise_seed: u64, m: usize) -> Result<Vec<Vec<f64>>> {
        let sites = self.ops.sites();
        let nt = self.ops.cfg.steps;
        let t2 = self.tshape[0];
        let df = self.increments(noise_seed);
        // u[n] for n = 0..=nt, all sites
        let mut u = vec![vec![1.0; sites]; nt + 1];
        let mut out = vec![vec![1.0; sites]];
        let norm = (t2 * sites) as f64;
        for _ in 0..m {
            let mut v = vec![Complex64::new(0.0, 0.0); t2 * sites];
            for j in 0..nt {
                for s in 0..sites {
                    v[j * sites + s] = Complex64::new(u[j][s] * df[j][s], 0.0);
                }
            }
            fft_nd(&mut v, &self.tshape, false);
            for (x, k) in v.iter_mut().zip(&self.kernel_hat) {
                *x *= k;
            }
            fft_nd(&mut v, &self.tshape, true);
            for (n, row) in u.iter_mut().enumerate() {
                for s in 0..sites {
                    row[s] = 1.0 + v[n * sites + s].re / norm;
                }
            }
            if u[nt].iter().any(|x| !(x.abs() <= BLOWUP)) {
                return Err(Error::Blowup { step: nt });
            }
            out.push(u[nt].clone());
        }
        Ok(out)
    }
}

/// `u^{(l,m)}_t` at the given grid sites (multi-indices), driven by the noise
/// of `seed` (the same noise as [`TorusOps::run`] with that seed).
pub fn picard_iterate(spec: &PicardSpec, cfg: &PamConfig, x_set: &[Vec<usize>], seed: u64) -> Result<Vec<f64>> {
    if spec.params != cfg.params {
        return Err(Error::InvalidArgument("Picard spec and PAM config disagree on the model".into()));
    }
    let solver = PicardSolver::new(cfg, spec.ell)?;
    let last = solver.iterates(seed, spec.m)?.pop().unwrap_or_default();
    x_set
        .iter()
        .map(|x| {
            if x.len() != cfg.params.d || x.iter().any(|&k| k >= cfg.grid_n) {
                return Err(Error::Geometry(format!("site {x:?} is off the grid")));
            }
            let flat = x.iter().fold(0, |acc, &k| acc * cfg.grid_n + k);
            Ok(last[flat])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingGap {
    pub mean_square: f64,
    pub stderr: f64,
    pub replicas: usize,
}

/// `E |u_t(x) - u^{(l,m)}_t(x)|^2` under the shared-noise coupling, averaged
/// over sites within each replica.
pub fn coupling_error(spec: &PicardSpec, cfg: &PamConfig, replicas: usize, seed: u64) -> Result<CouplingGap> {
    let solver = PicardSolver::new(cfg, spec.ell)?;
    coupling_error_with(&solver, spec.m, replicas, seed, crate::par::workers())
}

pub fn coupling_error_with(
    solver: &PicardSolver,
    m: usize,
    replicas: usize,
    seed: u64,
    workers: usize,
) -> Result<CouplingGap> {
    let ops = &solver.ops;
    let per: Vec<Result<f64>> = crate::par::map(replicas, workers, |r| {
        let s = replica_seed(seed, r);
        let full = ops.run(s)?.u;
        let pic = solver.iterates(s, m)?.pop().unwrap_or_default();
        Ok(full.iter().zip(&pic).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / full.len() as f64)
    });
    let mut mo = Moments::new();
    for v in per {
        mo.push(v?);
    }
    Ok(CouplingGap {
        mean_square: mo.mean(),
        stderr: mo.stderr(),
        replicas,
    })
}

/// Coupling gaps of every iterate `u^{(l,k)}`, `k = 0..=m_max`, from one
/// paired run per replica.
pub fn coupling_profile(solver: &PicardSolver, m_max: usize, replicas: usize, seed: u64, workers: usize) -> Result<Vec<CouplingGap>> {
    let ops = &solver.ops;
    let per: Vec<Result<Vec<f64>>> = crate::par::map(replicas, workers, |r| {
        let s = replica_seed(seed, r);
        let full = ops.run(s)?.u;
        let its = solver.iterates(s, m_max)?;
        Ok(its
            .iter()
            .map(|pic| full.iter().zip(pic).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / full.len() as f64)
            .collect())
    });
    let mut mo = vec![Moments::new(); m_max + 1];
    for v in per {
        for (m, g) in mo.iter_mut().zip(v?) {
            m.push(g);
        }
    }
    Ok(mo
        .iter()
        .map(|m| CouplingGap {
            mean_square: m.mean(),
            stderr: m.stderr(),
            replicas,
        })
        .collect())
}

/// Exceedance estimate for `log u_t >= z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub z: f64,
    pub probability: f64,
    pub stderr: f64,
    pub exceedances: usize,
    /// Fewer than 20 exceedances.
    pub censored: bool,
}

/// `log u_t` at `sites_per_replica` equally spaced sites of each replica.
/// Sites should be spaced beyond the correlation range of `log u`.
pub fn sample_log_u(cfg: &PamConfig, replicas: usize, sites_per_replica: usize, workers: usize) -> Result<Vec<f64>> {
    let ops = TorusOps::new(cfg)?;
    let n = cfg.grid_n;
    let per_axis = sites_per_replica.max(1).min(n);
    if cfg.params.d != 1 && per_axis != 1 {
        return Err(Error::InvalidArgument("several sites per replica are supported in d = 1".into()));
    }
    let stride = n / per_axis;
    let per: Vec<Result<Vec<f64>>> = crate::par::map(replicas, workers, |r| {
        let run = ops.run(replica_seed(cfg.seed, r))?;
        Ok((0..per_axis).map(|i| run.u[i * stride].max(f64::MIN_POSITIVE).ln()).collect())
    });
    let mut out = Vec::with_capacity(replicas * per_axis);
    for v in per {
        out.extend(v?);
    }
    Ok(out)
}

/// Empirical `P{log u >= z}` on `z_grid`.
pub fn tail_probability(log_u: &[f64], z_grid: &[f64]) -> Vec<TailEstimate> {
    let n = log_u.len() as f64;
    z_grid
        .iter()
        .map(|&z| {
            let k = log_u.iter().filter(|&&v| v >= z).count();
            let p = k as f64 / n;
            TailEstimate {
                z,
                probability: p,
                stderr: (p * (1.0 - p) / n).sqrt(),
                exceedances: k,
                censored: k < 20,
            }
        })
        .collect()
}

/// Pair interaction used by the Feynman-Kac estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FkKernel {
    /// `f(z) = c_{beta,d} |z|^{-beta}`.
    Riesz,
    /// A constant interaction (diagnostic).
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkSpec {
    pub k: usize,
    pub params: ModelParams,
    pub n_paths: usize,
    pub dt_path: f64,
    pub cap: f64,
    pub seed: u64,
    pub kernel: FkKernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub k: usize,
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
    /// Step actually used, `t / ceil(t / dt_path)`.
    pub dt_path: f64,
    pub cap: f64,
    /// Fraction of pair-steps where the cap was active.
    pub capped_fraction: f64,
    /// Relative standard error above 50%.
    pub heavy_tail_warning: bool,
}

/// Tabulated `k(r) = Cov(Z_1(0), Z_1(r))`. The integral of the pair kernel over
/// one step of length `dt`, given the separation `y` at the step start, is
/// `E int_0^dt f(y + Y_{2s}) ds = dt^{(alpha-beta)/alpha} k(|y| dt^{-1/alpha})`.
struct StepKernel {
    ln_r: Vec<f64>,
    vals: Vec<f64>,
    k0: f64,
    h: f64,
    beta: f64,
}

const STEP_TABLE_MIN: f64 = 1e-3;
const STEP_TABLE_MAX: f64 = 1e3;
const STEP_TABLE_POINTS: usize = 241;

impl StepKernel {
    fn build(params: &ModelParams) -> Result<Self> {
        let unit = params.with_t(1.0)?;
        let (l0, l1) = (STEP_TABLE_MIN.ln(), STEP_TABLE_MAX.ln());
        let ln_r: Vec<f64> = (0..STEP_TABLE_POINTS)
            .map(|i| l0 + (l1 - l0) * i as f64 / (STEP_TABLE_POINTS - 1) as f64)
            .collect();
        let vals = ln_r
            .iter()
            .map(|&l| z_covariance_radial(l.exp(), &unit))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            ln_r,
            vals,
            k0: z_covariance_radial(0.0, &unit)?,
            h: params.alpha - params.beta,
            beta: params.beta,
        })
    }

    fn eval(&self, r: f64) -> f64 {
        if r <= STEP_TABLE_MIN {
            return self.k0 - (self.k0 - self.vals[0]) * (r / STEP_TABLE_MIN).powf(self.h);
        }
        if r >= STEP_TABLE_MAX {
            return self.vals[STEP_TABLE_POINTS - 1] * (STEP_TABLE_MAX / r).powf(self.beta);
        }
        let l = r.ln();
        let step = self.ln_r[1] - self.ln_r[0];
        let x = (l - self.ln_r[0]) / step;
        let i = (x.floor() as usize).min(STEP_TABLE_POINTS - 2);
        let w = x - i as f64;
        self.vals[i] * (1.0 - w) + self.vals[i + 1] * w
    }
}

fn step_kernel(params: &ModelParams) -> Result<Arc<StepKernel>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64, usize), Arc<StepKernel>>>> = OnceLock::new();
    let key = (params.alpha.to_bits(), params.beta.to_bits(), params.d);
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(k) = cache.lock().unwrap().get(&key) {
        return Ok(k.clone());
    }
    let k = Arc::new(StepKernel::build(params)?);
    cache.lock().unwrap().insert(key, k.clone());
    Ok(k)
}

/// Isotropic stable increment with `E e^{i xi.X} = e^{-|xi|^alpha}`:
/// Chambers-Mallows-Stuck in d = 1, Brownian subordination otherwise.
pub fn stable_increment<R: Rng>(rng: &mut R, alpha: f64, out: &mut [f64]) {
    if out.len() == 1 {
        let v = PI * (rng.sample::<f64, _>(Open01) - 0.5);
        let w: f64 = rng.sample(Exp1);
        out[0] = if alpha == 2.0 {
            2.0 * v.sin() * w.sqrt()
        } else {
            (alpha * v).sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
        };
        return;
    }
    let a = alpha / 2.0;
    let sub = if a == 1.0 {
        1.0
    } else {
        // positive a-stable with Laplace transform e^{-lambda^a} (Kanter)
        let u = PI * rng.sample::<f64, _>(Open01);
        let w: f64 = rng.sample(Exp1);
        (a * u).sin() / u.sin().powf(1.0 / a) * (((1.0 - a) * u).sin() / w).powf((1.0 - a) / a)
    };
    let s = (2.0 * sub).sqrt();
    for x in out.iter_mut() {
        *x = s * rng.sample::<f64, _>(StandardNormal);
    }
}

/// `E u_t(x)^k = E exp(sum_{i<j} int_0^t f(X^i_s - X^j_s) ds)` by Monte Carlo
/// over `k` independent stable paths from a common start. Each step adds the
/// conditional mean of the pair integral over the step given the positions at
/// its start, capped at rate `cap` (`(f ∧ cap) dt`).
pub fn fk_moment(k: usize, params: &ModelParams, n_paths: usize, dt_path: f64, cap: f64, seed: u64) -> Result<MomentEstimate> {
    fk_moment_with(
        &FkSpec {
            k,
            params: *params,
            n_paths,
            dt_path,
            cap,
            seed,
            kernel: FkKernel::Riesz,
        },
        crate::par::workers(),
    )
}

const FK_CHUNK: usize = 2000;

pub fn fk_moment_with(spec: &FkSpec, workers: usize) -> Result<MomentEstimate> {
    let p = spec.params;
    if spec.k < 2 {
        return Err(Error::InvalidArgument(format!("moment order k = {} must be >= 2", spec.k)));
    }
    if !(spec.dt_path > 0.0 && spec.cap > 0.0) || spec.n_paths < 2 {
        return Err(Error::InvalidArgument("need dt_path > 0, cap > 0 and at least 2 paths".into()));
    }
    if matches!(spec.kernel, FkKernel::Riesz) && p.is_white_noise() {
        return Err(Error::InvalidArgument("white-noise interaction is not a function".into()));
    }
    let steps = steps_for(p.t, spec.dt_path);
    let dt = p.t / steps as f64;
    let table = match spec.kernel {
        FkKernel::Riesz => Some(step_kernel(&p)?),
        FkKernel::Constant(_) => None,
    };
    let d = p.d;
    let k = spec.k;
    let rate_scale = dt.powf(-p.beta / p.alpha);
    let r_scale = dt.powf(-1.0 / p.alpha);
    let step_len = dt.powf(1.0 / p.alpha);
    let chunks = spec.n_paths.div_ceil(FK_CHUNK);
    let per: Vec<(Moments, u64)> = crate::par::map(chunks, workers, |c| {
        let mut rng = stream(spec.seed, &[FK_LABEL, c as u64]);
        let count = FK_CHUNK.min(spec.n_paths - c * FK_CHUNK);
        let mut mo = Moments::new();
        let mut capped = 0u64;
        let mut x = vec![0.0f64; k * d];
        let mut inc = vec![0.0; d];
        for _ in 0..count {
            x.iter_mut().for_each(|v| *v = 0.0);
            let mut total = 0.0;
            for _ in 0..steps {
                for i in 0..k {
                    for j in i + 1..k {
                        let rate = match (&table, spec.kernel) {
                            (Some(tab), _) => {
                                let r = (0..d)
                                    .map(|q| (x[i * d + q] - x[j * d + q]).powi(2))
                                    .sum::<f64>()
                                    .sqrt();
                                rate_scale * tab.eval(r * r_scale)
                            }
                            (None, FkKernel::Constant(c)) => c,
                            (None, FkKernel::Riesz) => unreachable!(),
                        };
                        if rate > spec.cap {
                            capped += 1;
                        }
                        total += dt * rate.min(spec.cap);
                    }
                }
                for i in 0..k {
                    stable_increment(&mut rng, p.alpha, &mut inc);
                    for q in 0..d {
                        x[i * d + q] += step_len * inc[q];
                    }
                }
            }
            mo.push(total.exp());
        }
        (mo, capped)
    });
    let mut mo = Moments::new();
    let mut capped = 0;
    for (m, c) in &per {
        mo.merge(m);
        capped += c;
    }
    let value = mo.mean();
    let stderr = mo.stderr();
    let pair_steps = (spec.n_paths * steps * k * (k - 1) / 2) as f64;
    Ok(MomentEstimate {
        k,
        value,
        stderr,
        n_paths: spec.n_paths,
        dt_path: dt,
        cap: spec.cap,
        capped_fraction: capped as f64 / pair_steps,
        heavy_tail_warning: stderr > 0.5 * value.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn q() -> ModelParams {
        ModelParams::new(1.5, 0.5, 1, 0.5).unwrap()
    }

    #[test]
    fn config_dt_rule() {
        let cfg = PamConfig::new(q(), 32.0, 256, 1).unwrap();
        assert!(cfg.step_sd() <= DEFAULT_STEP_SD + 1e-12);
        assert_relative_eq!(cfg.dt * cfg.steps as f64, 0.5, max_relative = 1e-12);
        let four = cfg.with_dt(4.0 * cfg.dt).unwrap();
        assert!(four.step_sd() <= MAX_STEP_SD + 1e-9);
        assert!(cfg.with_dt(20.0 * cfg.dt).is_err());
        assert!(PamConfig::new(q(), 32.0, 100, 1).is_err());
    }

    #[test]
    fn noise_covariance_approximates_riesz_kernel() {
        let cfg = PamConfig::new(q(), 32.0, 256, 1).unwrap();
        let ops = TorusOps::new(&cfg).unwrap();
        let c = ops.noise_covariance();
        let f1 = riesz_constant(&q());
        // lag 1 is 8 sites
        assert!((c[8] / f1 - 1.0).abs() < 0.03, "{} vs {f1}", c[8]);
        // the factor squares to the covariance
        let h = ops.factor();
        let a = cfg.spacing();
        let n = h.len();
        let hh: f64 = (0..n).map(|i| h[i] * h[(i + 8) % n]).sum::<f64>() * a;
        assert_relative_eq!(hh, c[8], max_relative = 1e-9);
    }

    #[test]
    fn zero_noise_keeps_constants() {
        let cfg = PamConfig::with_amplitude(q(), 16.0, 64, 0.0, 3).unwrap();
        let run = TorusOps::new(&cfg).unwrap().run(9).unwrap();
        assert!(run.u.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let s = step_pam(&vec![1.0; 64], &cfg, 4).unwrap();
        assert!(s.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn runs_are_reproducible_and_positive() {
        let cfg = PamConfig::new(q(), 16.0, 64, 3).unwrap();
        let ops = TorusOps::new(&cfg).unwrap();
        let a = ops.run(5).unwrap();
        let b = ops.run(5).unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.negative_factors, 0);
        assert!(a.u.iter().all(|&v| v > 0.0));
        assert_ne!(ops.run(6).unwrap().u, a.u);
    }

    #[test]
    fn discrete_second_moment_matches_unit_recursion() {
        // with a single step, E u^2 = sum_z P(z)^2 ... computed two ways
        let cfg = PamConfig::new(q(), 8.0, 32, 1).unwrap().with_dt(0.5).unwrap_or_else(|_| {
            PamConfig::new(q(), 8.0, 32, 1).unwrap()
        });
        let g = two_point_discrete(&cfg).unwrap();
        assert!(g > 1.0 && g.is_finite());
    }

    #[test]
    fn independence_range_formula() {
        let p = ModelParams::new(1.3, 0.4, 1, 1.0).unwrap();
        let s = |ell, m| PicardSpec { ell, m, params: p };
        assert_relative_eq!(independence_range(&s(2.0, 1)).unwrap(), 8.0);
        assert_relative_eq!(independence_range(&s(5.0, 3)).unwrap(), 60.0);
        assert!(independence_range(&s(1.0, 3)).is_err());
        assert!(independence_range(&s(2.0, 0)).is_err());
    }

    #[test]
    fn picard_zero_and_whole_torus_limit() {
        let cfg = PamConfig::new(q(), 4.0, 16, 1).unwrap();
        let solver = PicardSolver::new(&cfg, 100.0).unwrap();
        assert!(solver.whole_torus);
        let its = solver.iterates(11, cfg.steps).unwrap();
        assert!(its[0].iter().all(|&v| v == 1.0));
        let full = TorusOps::new(&cfg).unwrap().run(11).unwrap().u;
        // Volterra iteration is exact after `steps` iterations
        for (a, b) in its[cfg.steps].iter().zip(&full) {
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
        let spec = PicardSpec { ell: 100.0, m: 0, params: q() };
        assert_eq!(picard_iterate(&spec, &cfg, &[vec![3]], 11).unwrap(), vec![1.0]);
        assert!(matches!(PicardSolver::new(&cfg, 1.5), Err(Error::Geometry(_))));
    }

    #[test]
    fn stable_increments_have_the_right_law() {
        let mut rng = stream(1, &[]);
        let mut x = [0.0];
        // E cos(xi X) = e^{-|xi|^alpha}
        for alpha in [1.5, 2.0] {
            let n = 200_000;
            let xi = 0.7;
            let m: f64 = (0..n)
                .map(|_| {
                    stable_increment(&mut rng, alpha, &mut x);
                    (xi * x[0]).cos()
                })
                .sum::<f64>()
                / n as f64;
            assert!((m - (-xi.powf(alpha)).exp()).abs() < 0.006, "alpha {alpha}: {m}");
        }
        let mut y = [0.0; 2];
        let n = 200_000;
        let m: f64 = (0..n)
            .map(|_| {
                stable_increment(&mut rng, 1.5, &mut y);
                (0.5 * y[0] + 0.5 * y[1]).cos()
            })
            .sum::<f64>()
            / n as f64;
        assert!((m - (-(0.5f64).powf(0.75)).exp()).abs() < 0.006, "{m}");
    }

    #[test]
    fn fk_constant_kernel_is_deterministic() {
        let spec = FkSpec {
            k: 4,
            params: q(),
            n_paths: 100,
            dt_path: 0.01,
            cap: 1e4,
            seed: 1,
            kernel: FkKernel::Constant(0.3),
        };
        let e = fk_moment_with(&spec, 1).unwrap();
        assert_relative_eq!(e.value, (0.3f64 * 6.0 * 0.5).exp(), max_relative = 1e-12);
        assert!(e.stderr < 1e-12);
    }

    #[test]
    fn step_kernel_limits() {
        let tab = step_kernel(&q()).unwrap();
        let c = riesz_constant(&q());
        assert_relative_eq!(tab.eval(5e3), c * 5e3f64.powf(-0.5), max_relative = 1e-3);
        assert!(tab.eval(1e-6) <= tab.k0 && tab.eval(1e-6) > 0.99 * tab.k0);
    }
}
