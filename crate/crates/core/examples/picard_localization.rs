//! Localized Picard iterates: the independence range and the decay of the
//! coupling gap with the iteration count and the truncation radius.

use mfshe::kernels::ModelParams;
use mfshe::pam::{coupling_profile, independence_range, PamConfig, PicardSolver, PicardSpec, MAX_STEP_SD};

fn main() -> mfshe::Result<()> {
    let p = ModelParams::new(1.5, 0.5, 1, 0.5)?;
    let base = PamConfig::new(p, 32.0, 128, 9)?;
    // coarsest legal step keeps the space-time FFT small
    let cfg = base.with_dt(base.dt * (MAX_STEP_SD / base.step_sd()).powi(2))?;
    for (ell, m) in [(1.5, 1), (2.0, 2), (4.0, 3)] {
        println!("range of u^(ell={ell}, m={m}): {:.2}", independence_range(&PicardSpec { ell, m, params: p })?);
    }

    let whole = PicardSolver::new(&cfg, 1e3)?;
    let gaps = coupling_profile(&whole, 6, 100, 1, mfshe::par::workers())?;
    println!("whole torus, E|u^(m) - u^(m-1)|^2:");
    for (m, g) in gaps.iter().enumerate().skip(1) {
        println!("  m={m}: {:.4} +- {:.4}", g.mean_square, g.stderr);
    }

    let solver = PicardSolver::new(&cfg, 2.0)?;
    let u = solver.iterates(3, 4)?;
    println!("ell=2 box radius {:.2}, u^(4)(0) = {:.4}", solver.box_radius, u[4][0]);
    Ok(())
}
