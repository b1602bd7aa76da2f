//! Statistical and structural properties of the PAM simulators.

use mfshe::kernels::{z_variance, ModelParams};
use mfshe::pam::{
    coupling_profile, fk_moment, pam_moments, sample_log_u, tail_probability, PamConfig, PicardSolver, TorusOps,
    MAX_STEP_SD,
};
use mfshe::stats::Moments;

fn params() -> ModelParams {
    ModelParams::new(1.5, 0.5, 1, 0.5).unwrap()
}

/// `a = 1/4` grid at the largest legal step.
fn coarse(side: f64, seed: u64) -> PamConfig {
    let base = PamConfig::new(params(), side, (side * 4.0) as usize, seed).unwrap();
    base.with_dt(base.dt * (MAX_STEP_SD / base.step_sd()).powi(2)).unwrap()
}

#[test]
fn step_above_the_stability_bound_is_rejected() {
    let cfg = PamConfig::new(params(), 16.0, 64, 1).unwrap();
    assert!(cfg.with_dt(cfg.stability_dt * 1.5).is_err());
    let ok = cfg.with_dt(cfg.stability_dt).unwrap();
    assert!(ok.step_sd() <= MAX_STEP_SD + 1e-12);
    assert!((ok.dt * ok.steps as f64 - cfg.params.t).abs() < 1e-12);
}

#[test]
fn torus_mean_is_one() {
    let cfg = PamConfig::new(params(), 16.0, 64, 3).unwrap();
    let m = pam_moments(&cfg, 400, 1).unwrap();
    assert!((m.mean - 1.0).abs() < 3.0 * m.mean_stderr, "{} +- {}", m.mean, m.mean_stderr);
    assert_eq!(m.negative_factors, 0);
    assert!(m.second > 1.0);
}

#[test]
fn first_picard_iterate_is_gaussian_with_at_most_the_linear_variance() {
    let cfg = coarse(32.0, 5);
    let solver = PicardSolver::new(&cfg, 4.0).unwrap();
    let mut m = Moments::new();
    let mut third = 0.0;
    let reps = 600;
    for r in 0..reps {
        let u = solver.iterates(1000 + r, 1).unwrap();
        assert_eq!(u[0], vec![1.0; u[0].len()]);
        let x = u[1][0] - 1.0;
        m.push(x);
        third += x.powi(3);
    }
    let var = m.variance();
    assert!(m.mean().abs() < 4.0 * m.stderr(), "mean {}", m.mean());
    assert!(var > 0.0 && var <= z_variance(&params()).unwrap() * 1.1, "var {var}");
    // skewness of a Gaussian sample
    let skew = third / reps as f64 / var.powf(1.5);
    assert!(skew.abs() < 4.0 * (6.0 / reps as f64).sqrt(), "skewness {skew}");
}

#[test]
fn picard_iterates_are_reproducible_and_share_the_noise() {
    let cfg = coarse(32.0, 8);
    let a = PicardSolver::new(&cfg, 2.0).unwrap();
    assert_eq!(a.iterates(42, 3).unwrap(), a.iterates(42, 3).unwrap());
    assert_ne!(a.iterates(42, 3).unwrap(), a.iterates(43, 3).unwrap());
    // with the same noise, larger truncation radius approaches the whole torus
    let whole = PicardSolver::new(&cfg, 1e3).unwrap();
    let w = whole.iterates(42, 1).unwrap();
    let gap = |ell: f64| {
        let u = PicardSolver::new(&cfg, ell).unwrap().iterates(42, 1).unwrap();
        u[1].iter().zip(&w[1]).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
    };
    assert!(gap(8.0) < gap(1.0));
}

#[test]
fn successive_picard_differences_contract() {
    let cfg = coarse(32.0, 13);
    let solver = PicardSolver::new(&cfg, 8.0).unwrap();
    let gaps = coupling_profile(&solver, 6, 120, 77, 1).unwrap();
    for m in 4..=6 {
        let r = gaps[m].mean_square / gaps[m - 1].mean_square;
        assert!(r <= 0.7, "m = {m}: ratio {r}");
    }
}

#[test]
fn capping_the_rate_only_lowers_the_moment() {
    let p = ModelParams::new(1.5, 0.5, 1, 0.25).unwrap();
    let mut last = 0.0;
    for cap in [1.0, 10.0, 100.0, 1e4] {
        let e = fk_moment(2, &p, 2000, p.t / 40.0, cap, 9).unwrap();
        assert!(e.value >= last, "cap {cap}: {} < {last}", e.value);
        last = e.value;
    }
}

#[test]
fn moments_grow_with_k() {
    let p = ModelParams::new(1.5, 0.5, 1, 0.25).unwrap();
    assert!(fk_moment(1, &p, 10, 0.01, 1e4, 2).is_err());
    let m: Vec<f64> = (2..=4)
        .map(|k| fk_moment(k, &p, 4000, p.t / 40.0, 1e4, 2).unwrap().value)
        .collect();
    assert!(m[0] > 1.0 && m[1] > m[0] && m[2] > m[1]);
}

#[test]
fn exceedance_curve_is_nonincreasing() {
    let cfg = PamConfig::new(params(), 16.0, 64, 4).unwrap();
    let log_u = sample_log_u(&cfg, 200, 4, 1).unwrap();
    assert_eq!(log_u.len(), 800);
    let grid: Vec<f64> = (0..20).map(|i| -3.0 + 0.3 * i as f64).collect();
    let t = tail_probability(&log_u, &grid);
    assert!(t.windows(2).all(|w| w[1].probability <= w[0].probability));
    assert_eq!(t[0].probability, log_u.iter().filter(|&&v| v >= -3.0).count() as f64 / 800.0);
}

#[test]
fn runs_do_not_depend_on_the_worker_count() {
    let cfg = PamConfig::new(params(), 8.0, 32, 6).unwrap();
    assert_eq!(pam_moments(&cfg, 16, 1).unwrap(), pam_moments(&cfg, 16, 3).unwrap());
    let ops = TorusOps::new(&cfg).unwrap();
    assert_eq!(ops.run(1).unwrap().u, ops.run(1).unwrap().u);
}
