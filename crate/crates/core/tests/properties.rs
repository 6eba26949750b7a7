use proptest::prelude::*;

use gyration::analysis::{fit_power_law, fit_run, Fitter};
use gyration::lace::{estimate_c_alpha, invert_lace_saw, round_trip_error, LaceSeries};
use gyration::lattice::{
    absolute_moment, convolve, euclidean_moment, fractional_moment_via_integral, AxisMode, LatticeField, MomentSeries,
};
use gyration::site::{self, Site, ORIGIN};
use gyration::stepdist::{build_kac_distribution, fourier_transform, StepDistribution};
use gyration::walkers::{enumerate_saw, evolve_rw, sample_saw_mc, SawMcConfig};

fn kac() -> impl Strategy<Value = StepDistribution> {
    (1usize..=2, 0.3f64..4.0, 1.0f64..4.0, 0usize..20).prop_map(|(d, alpha, l, extra)| {
        let r = (2.0 * l).ceil() as i64 + extra as i64;
        build_kac_distribution(d, alpha, l, r).unwrap()
    })
}

fn point(d: usize, r: i64) -> impl Strategy<Value = Site> {
    prop::collection::vec(-r..=r, d).prop_map(move |v| {
        let mut x = ORIGIN;
        x[..v.len()].copy_from_slice(&v);
        x
    })
}

/// A field symmetric under signed permutations, built by symmetrising random mass.
fn symmetric_field(d: usize, b: i64) -> impl Strategy<Value = LatticeField> {
    prop::collection::vec((point(d, b), 0.0f64..1.0), 1..12).prop_map(move |entries| {
        let mut f = LatticeField::zeros(d, b).unwrap();
        for (x, v) in entries {
            let orbit = site::signed_permutations(&x, d);
            let share = v / orbit.len() as f64;
            for y in orbit {
                f.add(&y, share).unwrap();
            }
        }
        f
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kac_normalised_and_symmetric(dist in kac()) {
        let total: f64 = dist.support().unwrap().iter().map(|(_, w)| w).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (x, w) in dist.support().unwrap() {
            for y in site::signed_permutations(x, dist.dim()) {
                prop_assert_eq!(dist.weight(&y), *w);
            }
        }
    }

    #[test]
    fn kac_tail_monotone(dist in kac()) {
        let l = dist.scale().ceil() as i64;
        let mut prev = f64::INFINITY;
        for x1 in l..=dist.truncation_radius() {
            let w = dist.weight(&[x1, 0, 0, 0]);
            prop_assert!(w <= prev);
            prev = w;
        }
    }

    #[test]
    fn fourier_symmetric(dist in kac(), k1 in -3.0f64..3.0, k2 in -3.0f64..3.0) {
        let k: Vec<f64> = if dist.dim() == 1 { vec![k1] } else { vec![k1, k2] };
        let neg: Vec<f64> = k.iter().map(|v| -v).collect();
        let a = fourier_transform(&dist, &k).unwrap();
        prop_assert!((a - fourier_transform(&dist, &neg).unwrap()).abs() < 1e-13);
        if dist.dim() == 2 {
            prop_assert!((a - fourier_transform(&dist, &[k2, k1]).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn convolution_conserves_mass(dist in kac(), steps in 1usize..4) {
        let b = 3 * dist.truncation_radius();
        let mut f = LatticeField::delta(dist.dim(), b).unwrap();
        for _ in 0..steps {
            f = convolve(&f, &dist).unwrap();
            prop_assert!((f.total() + f.escaped_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sandwich(f in (1usize..=3).prop_flat_map(|d| symmetric_field(d, 6)), r in 0.1f64..3.0) {
        let d = f.dim() as f64;
        let (first, _) = absolute_moment(&f, r).unwrap();
        let (eucl, _) = euclidean_moment(&f, r).unwrap();
        let slack = 1e-12 * eucl.max(1e-300);
        prop_assert!(first <= eucl + slack);
        prop_assert!(eucl <= d.powf(r / 2.0) * d * first + slack);
    }

    #[test]
    fn integral_matches_direct(f in (1usize..=2).prop_flat_map(|d| symmetric_field(d, 30)), qi in 0usize..4) {
        let q = [0.25, 0.5, 1.0, 1.5][qi];
        let (direct, _) = absolute_moment(&f, q).unwrap();
        let via = fractional_moment_via_integral(&f, q, 64.0, 200).unwrap();
        prop_assert!((via.value - direct).abs() <= 1e-6 * direct.max(1e-12), "{} vs {}", via.value, direct);
    }

    #[test]
    fn fit_argmin_invariance(theta in 0.1f64..2.0, c in 0.1f64..10.0, scale in 0.01f64..100.0,
                             noise in prop::collection::vec(-0.05f64..0.05, 40)) {
        let build = |k: f64| {
            let mut s = MomentSeries::new(1.0, AxisMode::FirstCoordinate);
            for (i, e) in noise.iter().enumerate() {
                let t = i + 5;
                s.push(t, k * c * (t as f64).powf(theta) * e.exp(), 1.0, None, true).unwrap();
            }
            s
        };
        let a = fit_power_law(&build(1.0), 2.0, (5, 44)).unwrap();
        let b = fit_power_law(&build(scale), 2.0, (5, 44)).unwrap();
        prop_assert!((a.exponent - b.exponent).abs() < 1e-12);
        prop_assert!((b.amplitude / a.amplitude / scale - 1.0).abs() < 1e-12);
    }
}

#[test]
fn exact_log_linear_recovered() {
    let mut s = MomentSeries::new(1.0, AxisMode::FirstCoordinate);
    for t in 1..=60 {
        s.push(t, 0.37 * (t as f64).powf(1.3), 1.0, None, true).unwrap();
    }
    let f = fit_power_law(&s, 2.0, (10, 60)).unwrap();
    assert!((f.exponent - 1.3).abs() < 1e-10 && (f.amplitude - 0.37).abs() < 1e-10);
}

#[test]
fn window_shift_within_standard_error() {
    let dist = StepDistribution::nearest_neighbor(1).unwrap();
    let mut run = evolve_rw(&dist, 220, 220).unwrap();
    run.ensure_series(&[1.0]).unwrap();
    for (w, shifted) in [((20, 100), (22, 110)), ((50, 200), (55, 220))] {
        let a = fit_run(&run, 1.0, AxisMode::FirstCoordinate, w, Fitter::PowerLaw).unwrap();
        let b = fit_run(&run, 1.0, AxisMode::FirstCoordinate, shifted, Fitter::PowerLaw).unwrap();
        assert!((a.exponent - b.exponent).abs() < a.exponent_se, "{w:?}: {} vs se {}", (a.exponent - b.exponent).abs(), a.exponent_se);
    }
}

#[test]
fn saw_dominated_by_random_walk() {
    for d in [1, 2, 3] {
        let dist = StepDistribution::nearest_neighbor(d).unwrap();
        let t = [10, 7, 5][d - 1];
        let saw = enumerate_saw(&dist, t).unwrap();
        let rw = evolve_rw(&dist, t, t as i64).unwrap();
        for s in 0..=t {
            saw.fields[s].for_each_nonzero(|x, v| assert!(v <= rw.fields[s].get(&x) * (1.0 + 1e-14)));
        }
    }
    let dist = build_kac_distribution(1, 1.0, 1.0, 3).unwrap();
    let saw = enumerate_saw(&dist, 5).unwrap();
    let rw = evolve_rw(&dist, 5, 15).unwrap();
    for s in 0..=5 {
        saw.fields[s].for_each_nonzero(|x, v| assert!(v <= rw.fields[s].get(&x) * (1.0 + 1e-14)));
    }
}

#[test]
fn saw_lace_round_trip_and_sign() {
    for (d, t) in [(1, 10), (2, 8)] {
        let dist = StepDistribution::nearest_neighbor(d).unwrap();
        let run = enumerate_saw(&dist, t).unwrap();
        let series = invert_lace_saw(&run, &dist).unwrap();
        assert!(round_trip_error(&series).unwrap() < 1e-12);
        let pi2 = series.pi[2].nonzero();
        assert_eq!(pi2.len(), 1);
        assert_eq!(pi2[0].0, ORIGIN);
        assert!(pi2[0].1 < 0.0);
        assert!(series.flags.is_empty(), "{:?}", series.flags);
    }
}

#[test]
fn random_walk_constant_is_one() {
    // exact up to rounding of the two sums that define it
    let nn = LaceSeries::random_walk(&StepDistribution::nearest_neighbor(2).unwrap(), 6).unwrap();
    assert!((estimate_c_alpha(&nn, 1.0, 0.1, 8).unwrap().c_alpha - 1.0).abs() <= 4.0 * f64::EPSILON);
    let lr = LaceSeries::random_walk(&build_kac_distribution(1, 1.2, 1.0, 20).unwrap(), 4).unwrap();
    assert!((estimate_c_alpha(&lr, 1.0, 0.1, 8).unwrap().c_alpha - 1.0).abs() <= 4.0 * f64::EPSILON);
}

#[test]
fn monte_carlo_is_deterministic() {
    let dist = build_kac_distribution(2, 0.7, 1.0, 30).unwrap();
    let cfg = SawMcConfig {
        horizon: 12,
        n_trials: 4000,
        seed: 99,
        n_batches: 8,
        orders: vec![0.3, 1.0],
        field_box: Some(40),
    };
    let a = sample_saw_mc(&dist, &cfg).unwrap();
    let b = sample_saw_mc(&dist, &cfg).unwrap();
    assert_eq!(a.fields, b.fields);
    for (x, y) in a.series.iter().zip(&b.series) {
        assert_eq!(x.to_csv(None), y.to_csv(None));
    }
    let other = sample_saw_mc(&dist, &SawMcConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(a.fields, other.fields);
}
