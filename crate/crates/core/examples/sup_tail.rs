//! Tail of the box supremum of the linear solution against the Gaussian
//! one-point tail, and the equi-correlated surrogate used for lower bounds.

use mfshe::gaussian_field::{sample_equicorrelated, sup_box_tail, EquiCorrelatedSpec};
use mfshe::kernels::ModelParams;
use mfshe::stats::normal_cdf;

fn main() -> mfshe::Result<()> {
    let p = ModelParams::new(1.5, 0.5, 1, 1.0)?;
    let grid = [1.0, 2.0, 2.5, 3.0];
    let tail = sup_box_tail(&p, 16.0, &grid, 4000, 0.25, 3)?;
    println!("{:>6} {:>10} {:>10} {:>10}", "lambda", "P(sup>l)", "stderr", "P(Z>l)");
    for pt in tail {
        println!("{:>6.2} {:>10.4} {:>10.4} {:>10.4}", pt.lambda, pt.probability, pt.stderr, 1.0 - normal_cdf(pt.lambda));
    }

    let spec = EquiCorrelatedSpec::new(200, 0.3)?;
    let maxima: Vec<f64> = (0..2000)
        .map(|s| sample_equicorrelated(&spec, s).into_iter().fold(f64::MIN, f64::max))
        .collect();
    let mean = maxima.iter().sum::<f64>() / maxima.len() as f64;
    println!("max of 200 equi-correlated (r = 0.3) normals: mean {mean:.3}");
    Ok(())
}
