//! Skeleton sets: the dimension estimator recovers d(1 - theta), and
//! thickness separates a skeleton from a sparser set.

use mfshe::fractal::{cover_report, estimate_dimension, is_theta_thick, skeleton_set, CoverScheme};
use mfshe::io::{load_peaks, save_peaks};

fn main() -> mfshe::Result<()> {
    for d in [1usize, 2] {
        let shells = if d == 1 { 5..=14 } else { 5..=9 };
        for theta in [0.25, 0.5, 0.75] {
            let set = skeleton_set(theta, shells.clone(), d)?;
            let rep = cover_report(&set, shells.clone(), &[d as f64], CoverScheme::UnitLattice)?;
            let fit = estimate_dimension(&rep, shells.clone())?;
            println!(
                "d={d} theta={theta}: estimate {:.3} +- {:.3} (exact {:.3}), {} points",
                fit.estimate,
                fit.band,
                d as f64 * (1.0 - theta),
                set.len()
            );
        }
    }

    let half = skeleton_set(0.5, 5..=12, 1)?;
    let sparse = skeleton_set(0.75, 5..=12, 1)?;
    println!("theta=0.5 skeleton is 0.5-thick: {}", is_theta_thick(&half, 0.5, 5)?.thick);
    let th = is_theta_thick(&sparse, 0.5, 5)?;
    println!("theta=0.75 skeleton is 0.5-thick: {} (witness {:?})", th.thick, th.witness);

    let path = std::env::temp_dir().join("mfshe_example.mfpeaks");
    save_peaks(&path, &half)?;
    println!("peak file round trip identical: {}", load_peaks(&path)? == half);
    std::fs::remove_file(path)?;
    Ok(())
}
