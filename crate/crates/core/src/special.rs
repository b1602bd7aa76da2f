//! Special functions used by the kernel constants and the radial transforms.

use std::f64::consts::PI;

/// Gamma function (Lanczos approximation, ~15 significant digits).
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Surface area of the unit sphere in `d` dimensions, `2 pi^{d/2} / Gamma(d/2)`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

/// Bessel function of the first kind, order zero.
///
/// Power series below 8, the periodic trapezoid rule on Bessel's integral up
/// to 30, Hankel asymptotic expansion above; absolute error stays below 1e-13.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < 8.0 {
        let q = -0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-3) {
                break;
            }
            k += 1.0;
        }
        sum
    } else if x < 30.0 {
        // (1/pi) int_0^pi cos(x cos s) ds; the trapezoid rule converges
        // geometrically for this periodic analytic integrand.
        let n = (x as usize) + 40;
        let h = PI / n as f64;
        let mut sum = 0.5 * (x.cos() + x.cos());
        for j in 1..n {
            sum += (x * (j as f64 * h).cos()).cos();
        }
        sum / n as f64
    } else {
        // P and Q series with mu = 4 nu^2 = 0; term k is a_k / x^k.
        let z = 8.0 * x;
        let mut p = 1.0;
        let mut q = 0.0;
        let mut term = 1.0;
        let mut k = 1usize;
        let mut last = f64::INFINITY;
        loop {
            let a = (2 * k - 1) as f64;
            term *= a * a / (k as f64 * z);
            if term > last {
                break;
            }
            last = term;
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if k % 2 == 1 {
                q += sign * term;
            } else {
                p += sign * term;
            }
            if term < 1e-17 {
                break;
            }
            k += 1;
        }
        let chi = x - PI / 4.0;
        (2.0 / (PI * x)).sqrt() * (p * chi.cos() + q * chi.sin())
    }
}

/// Angular average of the plane wave `e^{i xi . h}` over the unit sphere,
/// as a function of `x = |xi| |h|`.
pub fn angular_average(d: usize, x: f64) -> f64 {
    match d {
        1 => x.cos(),
        2 => bessel_j0(x),
        3 => {
            if x.abs() < 1e-4 {
                1.0 - x * x / 6.0
            } else {
                x.sin() / x
            }
        }
        _ => panic!("angular average implemented for d <= 3"),
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let mut p0 = 1.0;
                let mut p1 = 0.0;
                for j in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
                }
                dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
                let dz = p0 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_reference_values() {
        assert_relative_eq!(gamma(0.5), PI.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(gamma(0.25), 3.625_609_908_221_908_3, max_relative = 1e-12);
        assert_relative_eq!(gamma(5.0 / 3.0), 0.902_745_292_950_933_6, max_relative = 1e-12);
        assert_relative_eq!(gamma(0.05), 19.470_085_311_255_513, max_relative = 1e-12);
    }

    #[test]
    fn j0_matches_reference() {
        // mpmath besselj(0, .)
        assert_relative_eq!(bessel_j0(1.0), 0.765_197_686_557_966_6, epsilon = 1e-12);
        assert_relative_eq!(bessel_j0(20.0), 0.167_024_664_340_583_15, epsilon = 1e-11);
        assert_relative_eq!(bessel_j0(0.0), 1.0);
        // continuity across the branch switch
        assert_relative_eq!(bessel_j0(8.0), 0.171_650_807_137_553_9, epsilon = 1e-13);
        assert_relative_eq!(bessel_j0(30.0), -0.086_367_983_581_040_2, epsilon = 1e-13);
        assert_relative_eq!(bessel_j0(12.0), 0.047_689_310_796_833_5, epsilon = 1e-13);
        assert_relative_eq!(bessel_j0(45.0), 0.115_818_670_673_255_9, epsilon = 1e-13);
    }

    #[test]
    fn gauss_legendre_polynomials_exact() {
        let gl = GaussLegendre::new(8);
        let v = gl.integrate(0.0, 2.0, |x| x.powi(15));
        assert_relative_eq!(v, 2f64.powi(16) / 16.0, max_relative = 1e-13);
        assert_relative_eq!(gl.weights.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1), 2.0, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(2), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(3), 4.0 * PI, max_relative = 1e-14);
    }
}
