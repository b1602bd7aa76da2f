//! Tail order of log u_t from torus replicas.

use mfshe::fractal::tail_exponent_fit;
use mfshe::kernels::ModelParams;
use mfshe::pam::{sample_log_u, tail_probability, PamConfig};

fn main() -> mfshe::Result<()> {
    let p = ModelParams::new(1.5, 0.5, 1, 0.5)?;
    let cfg = PamConfig::new(p, 32.0, 128, 21)?;
    let log_u = sample_log_u(&cfg, 1250, 8, mfshe::par::workers())?;
    for e in tail_probability(&log_u, &[0.0, 0.5, 1.0, 1.5, 2.0]) {
        println!("P(log u >= {:.1}) = {:.4} ({} exceedances)", e.z, e.probability, e.exceedances);
    }
    let fit = tail_exponent_fit(&log_u, &[p.tail_exponent()])?;
    println!(
        "slope {:.3} +- {:.3} over {} levels; asymptotic order {:.3}",
        fit.b_hat,
        fit.b_se,
        fit.levels.len(),
        p.tail_exponent()
    );
    Ok(())
}
