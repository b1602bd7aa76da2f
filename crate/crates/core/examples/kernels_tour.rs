//! Stable density, Riesz kernel, the variance constant under both
//! normalizations, and the covariance of the linear solution.

use mfshe::kernels::{
    riesz_constant, stable_density, variance_constant, variance_convention, z_covariance_radial, z_variance,
    KernelFactorization, ModelParams,
};

fn main() -> mfshe::Result<()> {
    let p = ModelParams::new(1.5, 0.5, 1, 1.0)?;
    println!("alpha={} beta={} d={} t={}", p.alpha, p.beta, p.d, p.t);
    println!("Riesz constant c = {:.6}", riesz_constant(&p));
    for x in [0.0, 0.5, 1.0, 2.0, 4.0] {
        println!("p_1({x:>3}) = {:.6}", stable_density(&[x], 1.0, &p)?);
    }
    let conv = variance_convention(&p)?;
    println!("variance constant {:.6} (Riesz-constant form {:.6})", conv.quadrature, conv.riesz_form);
    println!("Var Z_1 = {:.6}, Var Z_4 = {:.6}", z_variance(&p)?, variance_constant(&p)? * 4f64.powf(p.variance_exponent()));
    for lag in [0.1, 1.0, 10.0, 100.0] {
        println!("Cov(Z(0), Z({lag:>5})) = {:.6}", z_covariance_radial(lag, &p)?);
    }
    let h = KernelFactorization::new(p, 4.0)?;
    println!("factor h at 1: {:.6}, truncated at 4 -> h(5) = {}", h.full(&[1.0])?, h.truncated(&[5.0])?);
    Ok(())
}
