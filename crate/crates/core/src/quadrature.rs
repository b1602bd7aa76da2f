//! Radial quadrature for the spectral integrals of the model.
//!
//! Every radial integrand handled here behaves like a power law near the
//! origin (possibly integrably singular) and either decays like a power law
//! or is cut off at a finite radius. The smooth bulk is integrated on a
//! logarithmic scale; the power-law ends are integrated in closed form.
//! Oscillatory integrals against the angular average of a plane wave are
//! split at the zeros of the oscillating factor and the partial sums are
//! accelerated with Wynn's epsilon algorithm.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::special::{angular_average, GaussLegendre};

/// `coef * r^exponent`, valid below (near 0) or above (near infinity) `edge`.
#[derive(Debug, Clone, Copy)]
pub struct PowerLaw {
    pub coef: f64,
    pub exponent: f64,
    pub edge: f64,
}

impl PowerLaw {
    /// Integral over `[0, edge]`; requires `exponent > -1`.
    fn integral_to_edge(&self) -> f64 {
        self.coef * self.edge.powf(self.exponent + 1.0) / (self.exponent + 1.0)
    }

    /// Integral over `[edge, inf)`; requires `exponent < -1`.
    fn integral_from_edge(&self) -> f64 {
        -self.coef * self.edge.powf(self.exponent + 1.0) / (self.exponent + 1.0)
    }
}

/// Description of a radial integrand `g` on `(0, inf)`.
pub struct Radial<'a> {
    pub g: &'a dyn Fn(f64) -> f64,
    /// Behaviour near the origin.
    pub small: PowerLaw,
    /// Behaviour near infinity; ignored when `cutoff` is set.
    pub large: Option<PowerLaw>,
    /// Hard upper limit of integration (integrand negligible beyond).
    pub cutoff: Option<f64>,
}

fn rules() -> &'static (GaussLegendre, GaussLegendre) {
    static RULES: OnceLock<(GaussLegendre, GaussLegendre)> = OnceLock::new();
    RULES.get_or_init(|| (GaussLegendre::new(20), GaussLegendre::new(12)))
}

const LOG_PANEL: f64 = 0.5;

/// Integrates `f` over `[a, b]` with panels of width at most `LOG_PANEL` in
/// `ln r`; returns (high-order, low-order) estimates.
fn log_scale(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    if b <= a {
        return (0.0, 0.0);
    }
    let (hi, lo) = rules();
    let (la, lb) = (a.ln(), b.ln());
    let panels = ((lb - la) / LOG_PANEL).ceil().max(1.0) as usize;
    let w = (lb - la) / panels as f64;
    let mut s_hi = 0.0;
    let mut s_lo = 0.0;
    for p in 0..panels {
        let u0 = la + p as f64 * w;
        let u1 = u0 + w;
        let g = |u: f64| {
            let r = u.exp();
            f(r) * r
        };
        s_hi += hi.integrate(u0, u1, g);
        s_lo += lo.integrate(u0, u1, g);
    }
    (s_hi, s_lo)
}

fn linear(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let (hi, lo) = rules();
    (hi.integrate(a, b, f), lo.integrate(a, b, f))
}

/// `int_0^inf g(r) dr` (or up to the cutoff).
pub fn integrate_radial(spec: &Radial<'_>, tol: f64) -> Result<f64> {
    let lower = spec.small.edge;
    let (upper, tail) = match (spec.cutoff, spec.large) {
        (Some(c), _) => (c, 0.0),
        (None, Some(large)) => (large.edge, large.integral_from_edge()),
        (None, None) => {
            return Err(Error::InvalidArgument(
                "radial integral needs a cutoff or a large-r power law".into(),
            ))
        }
    };
    let head = spec.small.integral_to_edge();
    let (hi, lo) = log_scale(spec.g, lower, upper);
    let value = head + hi + tail;
    let err = (hi - lo).abs();
    if !value.is_finite() || err > tol * value.abs().max(1e-300) {
        return Err(Error::QuadratureNonconvergence(format!(
            "radial integral {value:e} with rule discrepancy {err:e}"
        )));
    }
    Ok(value)
}

/// Zeros of the angular average in dimension `d`, approximately for d = 2.
fn oscillation_zero(d: usize, k: usize) -> f64 {
    let k = k as f64;
    match d {
        1 => (k - 0.5) * PI,
        2 => {
            // McMahon expansion of the k-th zero of J0.
            let b = (k - 0.25) * PI;
            b + 1.0 / (8.0 * b) - 124.0 / (3.0 * (8.0 * b).powi(3))
        }
        _ => k * PI,
    }
}

/// Wynn epsilon extrapolation of a sequence of partial sums.
pub fn wynn_epsilon(s: &[f64]) -> f64 {
    let n = s.len();
    if n < 3 {
        return *s.last().unwrap_or(&0.0);
    }
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = s.to_vec();
    let mut best = *s.last().unwrap();
    let mut col = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            let v = if diff.abs() < 1e-300 {
                f64::INFINITY
            } else {
                prev[i + 1] + 1.0 / diff
            };
            next.push(v);
        }
        col += 1;
        prev = cur;
        cur = next;
        if col % 2 == 0 {
            if let Some(v) = cur.last() {
                if v.is_finite() {
                    best = *v;
                }
            }
        }
        if cur.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    best
}

/// `int_0^inf g(r) A_d(r h) dr` where `A_d` is the angular average of the
/// plane wave in dimension `d` and `h > 0`.
pub fn integrate_radial_fourier(spec: &Radial<'_>, d: usize, h: f64, tol: f64) -> Result<f64> {
    if h == 0.0 {
        return integrate_radial(spec, tol);
    }
    // u = r h
    let g = |u: f64| (spec.g)(u / h) * angular_average(d, u) / h;
    let z1 = oscillation_zero(d, 1);
    // below u_lo the small-r law holds and the oscillation factor is ~1
    let u_lo = (spec.small.edge * h).min(1e-6 * z1);
    let head = PowerLaw {
        coef: spec.small.coef * h.powf(-spec.small.exponent - 1.0),
        exponent: spec.small.exponent,
        edge: u_lo,
    }
    .integral_to_edge();
    let (first_hi, first_lo) = log_scale(&g, u_lo, z1);
    let mut total = head + first_hi;
    let mut discrepancy = (first_hi - first_lo).abs();
    let mut l1 = first_hi.abs() + head.abs();

    if let Some(cut) = spec.cutoff {
        let u_max = cut * h;
        let mut k = 1;
        let mut a = z1;
        while a < u_max {
            let b = oscillation_zero(d, k + 1).min(u_max);
            let (s_hi, s_lo) = linear(&g, a, b);
            total += s_hi;
            discrepancy += (s_hi - s_lo).abs();
            l1 += s_hi.abs();
            a = b;
            k += 1;
            if k > 5_000_000 {
                return Err(Error::QuadratureNonconvergence(
                    "too many oscillation periods before cutoff".into(),
                ));
            }
        }
        let scale = total.abs().max(1e-13 * l1);
        if discrepancy > tol * scale {
            return Err(Error::QuadratureNonconvergence(format!(
                "cut-off Fourier integral {total:e}, rule discrepancy {discrepancy:e}"
            )));
        }
        return Ok(total);
    }

    let mut partial = vec![total];
    let mut last_estimate = f64::NAN;
    let mut k = 1;
    let max_segments = 4000;
    while k < max_segments {
        let a = oscillation_zero(d, k);
        let b = oscillation_zero(d, k + 1);
        let (s_hi, s_lo) = linear(&g, a, b);
        total += s_hi;
        discrepancy += (s_hi - s_lo).abs();
        l1 += s_hi.abs();
        partial.push(total);
        k += 1;
        if k >= 24 && k % 8 == 0 {
            let window = &partial[partial.len() - 21..];
            let est = wynn_epsilon(window);
            let scale = est.abs().max(1e-13 * l1);
            if (est - last_estimate).abs() < tol * scale && discrepancy < tol * scale {
                return Ok(est);
            }
            last_estimate = est;
        }
    }
    Err(Error::QuadratureNonconvergence(format!(
        "oscillatory integral did not settle after {max_segments} periods (last {last_estimate:e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 - 1/2 + 1/3 - ...
        let mut s = 0.0;
        let partial: Vec<f64> = (1..=15)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        assert_relative_eq!(wynn_epsilon(&partial), 2f64.ln(), max_relative = 1e-9);
    }

    #[test]
    fn log_scale_with_power_tails() {
        // int_0^inf r^{-1/2} / (1 + r) dr = pi
        let g = |r: f64| r.powf(-0.5) / (1.0 + r);
        let spec = Radial {
            g: &g,
            small: PowerLaw { coef: 1.0, exponent: -0.5, edge: 1e-16 },
            large: Some(PowerLaw { coef: 1.0, exponent: -1.5, edge: 1e16 }),
            cutoff: None,
        };
        assert_relative_eq!(integrate_radial(&spec, 1e-10).unwrap(), PI, max_relative = 1e-9);
    }

    #[test]
    fn fourier_of_singular_power_law_with_damping() {
        // int_0^inf r^{-1/2} e^{-r} cos(r h) dr = Gamma(1/2) Re (1 - i h)^{-1/2}
        let h = 3.0;
        let g = |r: f64| r.powf(-0.5) * (-r).exp();
        let spec = Radial {
            g: &g,
            small: PowerLaw { coef: 1.0, exponent: -0.5, edge: 1e-14 },
            large: None,
            cutoff: Some(40.0),
        };
        let z = num_complex::Complex64::new(1.0, -h).powf(-0.5);
        let exact = PI.sqrt() * z.re;
        let v = integrate_radial_fourier(&spec, 1, h, 1e-9).unwrap();
        assert_relative_eq!(v, exact, max_relative = 1e-8);
    }

    #[test]
    fn fourier_of_slow_power_law() {
        // int_0^inf r^{p} cos(r h) dr = Gamma(p+1) cos(pi (p+1)/2) h^{-(p+1)},  -1 < p < 0
        let p = -0.5;
        let h: f64 = 7.0;
        let g = |r: f64| r.powf(p);
        let spec = Radial {
            g: &g,
            small: PowerLaw { coef: 1.0, exponent: p, edge: 1e-12 },
            large: None,
            cutoff: None,
        };
        let exact = crate::special::gamma(p + 1.0) * (PI * (p + 1.0) / 2.0).cos() * h.powf(-(p + 1.0));
        let v = integrate_radial_fourier(&spec, 1, h, 1e-9).unwrap();
        assert_relative_eq!(v, exact, max_relative = 1e-7);
    }
}
