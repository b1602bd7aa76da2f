//! Property tests of structural invariants across modules.

use mfshe::fractal::{
    extract_peaks, floor_exp, nu_rho, shell_of, CoverScheme, Gauge, GaugeRecord, PeakSet, Shell,
};
use mfshe::gaussian_field::{sample_field, z_covariance, LatticeSpec, Scheme};
use mfshe::harness::ExperimentConfig;
use mfshe::io::{read_field_dump, read_peaks, write_field_dump, write_peaks, DumpKind, FieldDump};
use mfshe::kernels::{levy_exponent, stable_density, z_variance, ModelParams};
use proptest::prelude::*;

fn model() -> impl Strategy<Value = ModelParams> {
    (1.1f64..2.0, 0.1f64..0.9, 1usize..=2, 0.25f64..4.0).prop_filter_map("admissible", |(a, b, d, t)| {
        ModelParams::new(a, b.min(a - 0.05), d, t).ok()
    })
}

/// Points of shell `n` in `d` dimensions: one coordinate pinned to the shell's
/// outer band, the others anywhere inside.
fn shell_points(n: u32, d: usize, count: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    let outer = floor_exp(n);
    let inner = floor_exp(n - 1);
    prop::collection::vec(
        (0..d, inner + 1..=outer, any::<bool>(), prop::collection::vec(-outer..=outer, d)),
        1..count,
    )
    .prop_map(move |raw| {
        raw.into_iter()
            .map(|(axis, v, neg, mut rest)| {
                rest[axis] = if neg { -v } else { v };
                rest
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn levy_exponent_is_homogeneous(p in model(), x in -5.0f64..5.0, c in 0.1f64..10.0) {
        let mut xi = vec![x; p.d];
        let base = levy_exponent(&xi, &p);
        xi.iter_mut().for_each(|v| *v *= c);
        let scaled = levy_exponent(&xi, &p);
        prop_assert!((scaled - c.powf(p.alpha) * base).abs() <= 1e-10 * scaled.max(1e-300));
    }

    #[test]
    fn stable_density_self_similar(p in model(), x in -3.0f64..3.0, s in 0.2f64..5.0) {
        let mut pt = vec![0.0; p.d];
        pt[0] = x;
        let lhs = stable_density(&pt, s, &p).unwrap();
        let scaled: Vec<f64> = pt.iter().map(|v| v * s.powf(-1.0 / p.alpha)).collect();
        let rhs = s.powf(-(p.d as f64) / p.alpha) * stable_density(&scaled, 1.0, &p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-6 * rhs.max(1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn covariance_even_and_bounded(p in model(), lag in 0.0f64..50.0) {
        let mut h = vec![0.0; p.d];
        h[0] = lag;
        let c = z_covariance(&h, &p).unwrap();
        let neg: Vec<f64> = h.iter().map(|v| -v).collect();
        prop_assert_eq!(c, z_covariance(&neg, &p).unwrap());
        prop_assert!(c.abs() <= z_variance(&p).unwrap() * (1.0 + 1e-9));
    }

    #[test]
    fn shell_index_is_consistent(n in 1u32..20, d in 1usize..=3, seed in any::<u64>()) {
        let outer = floor_exp(n);
        let inner = floor_exp(n - 1);
        let mut x = vec![(seed % (inner as u64 + 1)) as i64; d];
        x[(seed as usize) % d] = outer;
        prop_assert_eq!(shell_of(&x).unwrap(), n);
        prop_assert!(Shell::new(n, d).unwrap().contains(&x));
        x[(seed as usize) % d] = outer + 1;
        prop_assert_eq!(shell_of(&x).unwrap(), n + 1);
    }

    #[test]
    fn dyadic_cover_never_costs_more_than_unit_boxes(
        pts in shell_points(4, 2, 200),
        rho in 0.1f64..2.0,
    ) {
        let flat = pts.concat();
        let unit = nu_rho(4, 2, &flat, rho, CoverScheme::UnitLattice).unwrap();
        let dyadic = nu_rho(4, 2, &flat, rho, CoverScheme::GreedyDyadic).unwrap();
        prop_assert!(dyadic > 0.0 && dyadic <= unit * (1.0 + 1e-12));
    }

    #[test]
    fn unit_cover_cost_is_monotone_in_the_set(pts in shell_points(5, 2, 100), keep in 1usize..100) {
        let sub: Vec<i64> = pts[..keep.min(pts.len())].concat();
        let all = pts.concat();
        let a = nu_rho(5, 2, &sub, 1.0, CoverScheme::UnitLattice).unwrap();
        let b = nu_rho(5, 2, &all, 1.0, CoverScheme::UnitLattice).unwrap();
        prop_assert!(a <= b);
    }

    #[test]
    fn peak_sets_shrink_as_gamma_grows(seed in any::<u64>(), g1 in 0.05f64..1.5, dg in 0.0f64..1.0) {
        let p = ModelParams::new(2.0, 0.5, 1, 1.0).unwrap();
        let lattice = Shell::new(6, 1).unwrap().patch_lattice().unwrap();
        let f = sample_field(&lattice, &p, Scheme::CirculantExact, 0, seed).unwrap();
        for gauge in [Gauge::LinearShe, Gauge::Pam] {
            let values: Vec<f64> = match gauge {
                Gauge::LinearShe => f.values.clone(),
                Gauge::Pam => f.values.iter().map(|v| (2.0 * v).exp()).collect(),
            };
            let lo = extract_peaks(&lattice, &values, &p, gauge, g1, "t").unwrap();
            let hi = extract_peaks(&lattice, &values, &p, gauge, g1 + dg, "t").unwrap();
            prop_assert!(hi.is_subset_of(&lo));
        }
    }

    #[test]
    fn peak_files_round_trip(pts in shell_points(6, 2, 60), gamma in 0.0f64..2.0) {
        let set = PeakSet::from_points(2, &pts, GaugeRecord::new("pam", gamma), "prop").unwrap();
        let mut buf = Vec::new();
        write_peaks(&mut buf, &set).unwrap();
        let back = read_peaks(buf.as_slice()).unwrap();
        prop_assert!(back.is_subset_of(&set) && set.is_subset_of(&back));
        prop_assert_eq!(back.gauge.gamma, gamma);
    }

    #[test]
    fn field_dumps_round_trip(
        p in model(),
        n in 1usize..12,
        spacing in 0.01f64..4.0,
        origin in -100.0f64..100.0,
        seed in any::<u64>(),
        values in prop::collection::vec(-1e6f64..1e6, 144),
    ) {
        let shape = vec![n; p.d];
        let lattice = LatticeSpec::new(vec![origin; p.d], spacing, shape).unwrap();
        let len = lattice.len();
        let dump = FieldDump { lattice, values: values[..len].to_vec(), params: p, seed, kind: DumpKind::PamSnapshot };
        let mut buf = Vec::new();
        write_field_dump(&mut buf, &dump).unwrap();
        prop_assert_eq!(&buf[..6], b"MFSHE1");
        prop_assert_eq!(read_field_dump(&mut buf.as_slice()).unwrap(), dump);
    }

    #[test]
    fn configs_round_trip_through_toml(
        alpha in 1.1f64..2.0,
        seed in any::<u64>(),
        lo in 1u32..8,
        span in 0u32..6,
        gammas in prop::collection::vec(0.01f64..1.0, 1..6),
    ) {
        let text = format!(
            "[model]\nalpha = {alpha:?}\nbeta = 0.5\nd = 1\nt = 1.0\n[sampler]\nseed = {seed}\n\
             [shells]\nmin = {lo}\nmax = {}\n[gauge]\ngamma = {gammas:?}\n",
            lo + span
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.hash().unwrap(), cfg.hash().unwrap());
    }
}
