//! Deterministic functions and constants of the model.
//!
//! Fourier convention, fixed for the whole crate: the forward transform is
//! `f^(xi) = int f(x) e^{-i xi.x} dx` with no prefactor and the inverse
//! carries `(2 pi)^{-d}`.
//!
//! Under this convention the Riesz covariance `f(z) = c_{beta,d} |z|^{-beta}`
//! has transform `(2 pi)^d |xi|^{beta-d}`, so in every Plancherel identity the
//! `(2 pi)^{-d}` cancels and
//!
//! ```text
//! Var Z_t = int_0^t int_{R^d} e^{-2 s |xi|^alpha} |xi|^{beta-d} dxi ds
//!         = int_{R^d} S(|xi|) dxi,
//! S(r)    = (1 - e^{-2 t r^alpha}) r^{beta-d-alpha} / 2 .
//! ```
//!
//! The angular part of `dxi` contributes the sphere area `|S^{d-1}|`, which is
//! why [`variance_constant`] differs from [`riesz_form_variance_constant`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_radial_fourier, PowerLaw, Radial};
use crate::special::{gamma, sphere_area};

/// Relative tolerance used by the spectral quadratures.
pub const QUAD_TOL: f64 = 1e-9;

/// Stability index `alpha`, noise index `beta`, dimension `d` and time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub d: usize,
    pub t: f64,
}

impl ModelParams {
    /// Accepts exactly `0 < beta < min(alpha, d) <= min(2, d)`, `t > 0`, `d >= 1`.
    pub fn new(alpha: f64, beta: f64, d: usize, t: f64) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if d == 0 {
            return bad("dimension must be at least 1".into());
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return bad(format!("alpha = {alpha} outside (0, 2]"));
        }
        if !(beta > 0.0 && beta < alpha.min(d as f64)) {
            return bad(format!("need 0 < beta < min(alpha, d); got beta = {beta}, alpha = {alpha}, d = {d}"));
        }
        if !(t > 0.0 && t.is_finite()) {
            return bad(format!("t = {t} must be positive"));
        }
        Ok(Self { alpha, beta, d, t })
    }

    /// The endpoint `beta = d < alpha` of the admissible range: the Riesz
    /// covariance degenerates to a point mass (space-time white noise) while
    /// every spectral quantity keeps its formula with `|xi|^{beta-d} = 1`.
    /// Only spectral functions accept it; the Riesz kernel itself rejects it.
    pub fn white_noise(alpha: f64, d: usize, t: f64) -> Result<Self> {
        if !(d >= 1 && (d as f64) < alpha && alpha <= 2.0) {
            return Err(Error::InvalidParams(format!(
                "white-noise endpoint needs d < alpha <= 2; got alpha = {alpha}, d = {d}"
            )));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParams(format!("t = {t} must be positive")));
        }
        Ok(Self { alpha, beta: d as f64, d, t })
    }

    pub fn is_white_noise(&self) -> bool {
        self.beta == self.d as f64
    }

    pub fn with_t(&self, t: f64) -> Result<Self> {
        if self.is_white_noise() {
            return Self::white_noise(self.alpha, self.d, t);
        }
        Self::new(self.alpha, self.beta, self.d, t)
    }

    /// `(alpha - beta) / alpha`, the time exponent of the variance.
    pub fn variance_exponent(&self) -> f64 {
        (self.alpha - self.beta) / self.alpha
    }

    /// `(2 alpha - beta) / (alpha - beta)`, the moment-growth exponent.
    pub fn intermittency_exponent(&self) -> f64 {
        (2.0 * self.alpha - self.beta) / (self.alpha - self.beta)
    }

    /// `(2 alpha - beta) / alpha`, the stretched-exponential tail order of `log u_t`.
    pub fn tail_exponent(&self) -> f64 {
        (2.0 * self.alpha - self.beta) / self.alpha
    }

    fn check_radial_dim(&self) -> Result<()> {
        if self.d > 3 {
            return Err(Error::InvalidArgument(format!(
                "radial Fourier transforms are implemented for d <= 3, got {}",
                self.d
            )));
        }
        Ok(())
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Levy exponent `psi(xi) = |xi|^alpha`.
pub fn levy_exponent(xi: &[f64], params: &ModelParams) -> f64 {
    let r = norm(xi);
    if r == 0.0 {
        0.0
    } else {
        r.powf(params.alpha)
    }
}

/// Transition density `p_s(x)` of the isotropic alpha-stable process with
/// `E e^{i xi.X_s} = e^{-s |xi|^alpha}`.
pub fn stable_density(x: &[f64], s: f64, params: &ModelParams) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("time s = {s} must be positive")));
    }
    let d = params.d;
    let r = norm(x);
    let df = d as f64;
    if params.alpha == 2.0 {
        return Ok((4.0 * PI * s).powf(-df / 2.0) * (-r * r / (4.0 * s)).exp());
    }
    if params.alpha == 1.0 {
        let c = gamma((df + 1.0) / 2.0) / PI.powf((df + 1.0) / 2.0);
        return Ok(c * s / (s * s + r * r).powf((df + 1.0) / 2.0));
    }
    params.check_radial_dim()?;
    let alpha = params.alpha;
    // e^{-s r_max^alpha} = 1e-12
    let r_max = (12.0 * 10f64.ln() / s).powf(1.0 / alpha);
    let g = |k: f64| (-s * k.powf(alpha)).exp() * k.powi(d as i32 - 1);
    let spec = Radial {
        g: &g,
        small: PowerLaw {
            coef: 1.0,
            exponent: df - 1.0,
            edge: r_max * 1e-12,
        },
        large: None,
        cutoff: Some(r_max),
    };
    let radial = integrate_radial_fourier(&spec, d, r, 1e-7)?;
    Ok(sphere_area(d) * radial / (2.0 * PI).powi(d as i32))
}

/// `c_{beta,d} = 2^beta pi^{d/2} Gamma(beta/2) / Gamma((d - beta)/2)`.
/// Zero at the white-noise endpoint, where `1/Gamma(0)` vanishes.
pub fn riesz_constant(params: &ModelParams) -> f64 {
    if params.is_white_noise() {
        return 0.0;
    }
    let (b, d) = (params.beta, params.d as f64);
    2f64.powf(b) * PI.powf(d / 2.0) * gamma(b / 2.0) / gamma((d - b) / 2.0)
}

/// Riesz covariance `f(z) = c_{beta,d} |z|^{-beta}`.
pub fn riesz_kernel(z: &[f64], params: &ModelParams) -> Result<f64> {
    if params.is_white_noise() {
        return Err(Error::InvalidParams("white-noise covariance is a point mass, not a function".into()));
    }
    let r = norm(z);
    if r == 0.0 {
        return Err(Error::SingularInput("Riesz kernel is singular at z = 0".into()));
    }
    Ok(riesz_constant(params) * r.powf(-params.beta))
}

/// Time-integrated spectral density of `Z_t`,
/// `S(r) = (1 - e^{-2 t r^alpha}) r^{beta - d - alpha} / 2` for `r > 0`.
pub fn z_spectral_density(r: f64, params: &ModelParams) -> Result<f64> {
    if r == 0.0 {
        return Err(Error::SingularInput(
            "spectral density is singular at r = 0; integrate it radially".into(),
        ));
    }
    if r < 0.0 {
        return Err(Error::InvalidArgument(format!("radial frequency {r} < 0")));
    }
    Ok(spectral_unchecked(r, params))
}

fn spectral_unchecked(r: f64, p: &ModelParams) -> f64 {
    let x = 2.0 * p.t * r.powf(p.alpha);
    // 1 - e^{-x} without cancellation
    -(-x).exp_m1() * r.powf(p.beta - p.d as f64 - p.alpha) / 2.0
}

/// Radial integrand `|S^{d-1}| S(r) r^{d-1}` with its power-law ends.
fn covariance_radial(p: &ModelParams) -> (impl Fn(f64) -> f64 + '_, PowerLaw, PowerLaw) {
    let area = sphere_area(p.d);
    let g = move |r: f64| area * spectral_unchecked(r, p) * r.powi(p.d as i32 - 1);
    // S r^{d-1} ~ t r^{beta-1} (1 - t r^alpha + ...)
    let small = PowerLaw {
        coef: area * p.t,
        exponent: p.beta - 1.0,
        edge: (1e-13 / p.t).powf(1.0 / p.alpha),
    };
    // S r^{d-1} ~ r^{beta-alpha-1}/2 once e^{-2 t r^alpha} < 1e-17
    let large = PowerLaw {
        coef: area / 2.0,
        exponent: p.beta - p.alpha - 1.0,
        edge: (20.0 / p.t).powf(1.0 / p.alpha),
    };
    (g, small, large)
}

/// `Cov(Z_t(x), Z_t(x + lag))`, by radial spectral quadrature.
pub fn z_covariance_radial(lag: f64, params: &ModelParams) -> Result<f64> {
    params.check_radial_dim()?;
    let (g, small, large) = covariance_radial(params);
    let spec = Radial {
        g: &g,
        small,
        large: Some(large),
        cutoff: None,
    };
    integrate_radial_fourier(&spec, params.d, lag.abs(), QUAD_TOL)
}

/// Prefactor `v` with `Var Z_t = v t^{(alpha - beta)/alpha}`, obtained by
/// quadrature of the full spectral integral at `t = 1`.
pub fn variance_constant(params: &ModelParams) -> Result<f64> {
    let unit = params.with_t(1.0)?;
    z_covariance_radial(0.0, &unit)
}

/// `Var Z_t` for the time stored in `params`.
pub fn z_variance(params: &ModelParams) -> Result<f64> {
    Ok(variance_constant(params)? * params.t.powf(params.variance_exponent()))
}

/// The closed form `c_{beta,d} Gamma(beta/alpha) / ((alpha - beta) 2^{beta/alpha})`,
/// with the Riesz constant where the sphere area belongs; kept for comparison only.
pub fn riesz_form_variance_constant(params: &ModelParams) -> f64 {
    let (a, b) = (params.alpha, params.beta);
    riesz_constant(params) * gamma(b / a) / ((a - b) * 2f64.powf(b / a))
}

/// Ratio between the implementation's variance prefactor and the Riesz-constant form.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VarianceConvention {
    pub quadrature: f64,
    pub riesz_form: f64,
    pub ratio: f64,
}

pub fn variance_convention(params: &ModelParams) -> Result<VarianceConvention> {
    let quadrature = variance_constant(params)?;
    let riesz_form = riesz_form_variance_constant(params);
    Ok(VarianceConvention {
        quadrature,
        riesz_form,
        ratio: quadrature / riesz_form,
    })
}

/// Square-root factorization of the Riesz covariance: `h * h = f` with
/// `h(x) = kappa |x|^{-(d+beta)/2}`, optionally truncated to `|x| <= cutoff`.
#[derive(Debug, Clone, Copy)]
pub struct KernelFactorization {
    pub params: ModelParams,
    pub cutoff: f64,
}

impl KernelFactorization {
    pub fn new(params: ModelParams, cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0) {
            return Err(Error::InvalidArgument(format!("cutoff {cutoff} must be positive")));
        }
        Ok(Self { params, cutoff })
    }

    pub fn untruncated(params: ModelParams) -> Self {
        Self {
            params,
            cutoff: f64::INFINITY,
        }
    }

    /// Exponent `(d + beta) / 2`.
    pub fn decay(&self) -> f64 {
        (self.params.d as f64 + self.params.beta) / 2.0
    }

    /// `kappa` such that `h * h = f` exactly: `kappa = (2 pi)^{d/2} / C_a`
    /// where `|x|^{-a}` transforms to `C_a |xi|^{a-d}`.
    pub fn prefactor(&self) -> f64 {
        let d = self.params.d as f64;
        let a = self.decay();
        let c_a = PI.powf(d / 2.0) * 2f64.powf(d - a) * gamma((d - a) / 2.0) / gamma(a / 2.0);
        (2.0 * PI).powf(d / 2.0) / c_a
    }

    /// Untruncated factor `h(x)`.
    pub fn full(&self, x: &[f64]) -> Result<f64> {
        let r = norm(x);
        if r == 0.0 {
            return Err(Error::SingularInput("factor h is singular at 0".into()));
        }
        Ok(self.prefactor() * r.powf(-self.decay()))
    }

    /// Truncated factor `h_l(x) = h(x) 1{|x| <= l}`.
    pub fn truncated(&self, x: &[f64]) -> Result<f64> {
        if norm(x) > self.cutoff {
            return Ok(0.0);
        }
        self.full(x)
    }

    /// Tail part `h(x) - h_l(x)`.
    pub fn remainder(&self, x: &[f64]) -> Result<f64> {
        Ok(self.full(x)? - self.truncated(x)?)
    }
}
