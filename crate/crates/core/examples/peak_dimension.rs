//! Tall peaks of the linear solution: per-shell extraction, cube covers and
//! the dimension estimate for several gauges.

use mfshe::fractal::{cover_report, estimate_dimension, extract_field_peaks, CoverScheme, GaugeRecord, PeakSet, Shell};
use mfshe::gaussian_field::{block_for_bound, sample_field_block_independent};
use mfshe::kernels::ModelParams;

fn main() -> mfshe::Result<()> {
    let p = ModelParams::new(2.0, 0.5, 1, 1.0)?;
    let block = block_for_bound(&p, 1.0, 0.01)?;
    let shells = 6..=13u32;
    let fields = shells
        .clone()
        .map(|n| sample_field_block_independent(&Shell::new(n, 1)?.patch_lattice()?, &p, block, 100 + n as u64))
        .collect::<mfshe::Result<Vec<_>>>()?;
    println!("{:>6} {:>9} {:>7} {:>7} {:>8}", "gamma", "estimate", "band", "target", "points");
    for gamma in [0.25, 0.5, 0.75] {
        let mut points = Vec::new();
        for f in &fields {
            let set = extract_field_peaks(f, gamma)?;
            points.extend(set.points().map(|(x, _)| x.to_vec()));
        }
        let set = PeakSet::from_points(1, &points, GaugeRecord::new("linear-she", gamma), "example")?;
        let report = cover_report(&set, shells.clone(), &[0.5, 1.0], CoverScheme::UnitLattice)?;
        let fit = estimate_dimension(&report, shells.clone())?;
        println!("{gamma:>6} {:>9.3} {:>7.3} {:>7.3} {:>8}", fit.estimate, fit.band, 1.0 - gamma, set.len());
    }
    Ok(())
}
