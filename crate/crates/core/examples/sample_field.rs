//! Samples the linear solution with each scheme, checks the empirical
//! variance and round-trips a field through the binary dump.

use mfshe::gaussian_field::{block_for_bound, sample_field, LatticeSpec, Scheme};
use mfshe::io::{load_field, save_field};
use mfshe::kernels::{z_variance, ModelParams};

fn main() -> mfshe::Result<()> {
    let p = ModelParams::new(2.0, 0.5, 1, 1.0)?;
    let lattice = LatticeSpec::line(0.0, 1.0, 1 << 14)?;
    let block = block_for_bound(&p, 1.0, 0.01)?;
    println!("Var Z_t = {:.4}; block for a 0.01 correlation bound: {block}", z_variance(&p)?);
    for scheme in [Scheme::CirculantExact, Scheme::SpectralTorus, Scheme::BlockIndependent] {
        let f = sample_field(&lattice, &p, scheme, block, 11)?;
        let n = f.values.len() as f64;
        let mean = f.values.iter().sum::<f64>() / n;
        let var = f.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        println!("{:<18} mean {mean:+.4}  var {var:.4}", scheme.tag());
    }

    let square = LatticeSpec::new(vec![0.0, 0.0], 1.0, vec![64, 64])?;
    let f = sample_field(&square, &ModelParams::new(2.0, 0.5, 2, 1.0)?, Scheme::CirculantExact, 0, 5)?;
    let path = std::env::temp_dir().join("mfshe_example_field.mfshe");
    save_field(&path, &f)?;
    let back = load_field(&path)?;
    println!("2d field round trip identical: {}", back.values == f.values);
    std::fs::remove_file(path)?;
    Ok(())
}
