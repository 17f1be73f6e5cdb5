use proptest::prelude::*;

use kbl_core::fixedpoint::{sample_theta, solve_fixed_point, FixedPointOptions};
use kbl_core::sim::{entropy_exp, run_system, ControlSpec, DriftPolicy, ParticleSystem, RunOptions, ThresholdLaw};
use kbl_core::variational::log_mean_exp_estimate;
use kbl_core::{KillingFunction, TimeGrid};

fn zeta(kind: u8, param: f64) -> KillingFunction {
    match kind {
        0 => KillingFunction::constant(param).unwrap(),
        _ => KillingFunction::abs_power(param.min(1.9)).unwrap(),
    }
}

fn any_control() -> impl Strategy<Value = ControlSpec> {
    (-1.5f64..1.5, 0.2f64..4.0, prop::bool::ANY).prop_map(|(u, rate, piecewise)| {
        let threshold = if piecewise {
            ThresholdLaw::PiecewiseHazard { breakpoints: vec![0.0, 0.5], rates: vec![rate, 1.0] }
        } else {
            ThresholdLaw::ExpRate { rate }
        };
        ControlSpec::new(DriftPolicy::TimeDependent { values: vec![vec![u]] }, threshold)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn particle_runs_are_consistent(
        n in 1usize..400,
        steps in 1usize..40,
        kind in 0u8..2,
        param in 0.0f64..3.0,
        control in any_control(),
        seed in any::<u64>(),
    ) {
        let grid = TimeGrid::new(1.0, steps).unwrap();
        let sys = ParticleSystem::new(n, 1, grid, zeta(kind, param)).unwrap();
        let out = run_system(&sys, &control, seed, 0, RunOptions::default()).unwrap();
        let p = &out.path;
        prop_assert_eq!(p.mass[0], 1.0);
        prop_assert!(p.mass.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(p.mass.iter().all(|&m| (0.0..=1.0).contains(&m)));
        prop_assert!(p.hazard.values.windows(2).all(|w| w[1] >= w[0]));
        let e = &out.ensemble;
        for k in 0..grid.len() {
            let alive = (0..n).filter(|&i| e.is_alive(i, k)).count();
            prop_assert_eq!(alive, (p.mass[k] * n as f64).round() as usize);
        }
        for i in 0..n {
            let survived = e.is_alive(i, steps);
            prop_assert_eq!(survived, e.kill_times[i].is_infinite());
            prop_assert_eq!(e.thresholds[i] > p.hazard.values[steps], survived);
        }
        prop_assert!(out.cost.entropy_cost >= 0.0);
        prop_assert!(out.cost.drift_cost >= 0.0);
    }

    #[test]
    fn exponential_entropy_is_nonnegative(rate in 1e-3f64..1e3) {
        let h = entropy_exp(rate).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert_eq!(h == 0.0, rate == 1.0);
    }

    #[test]
    fn laplace_estimate_is_bracketed(values in prop::collection::vec(-2.0f64..2.0, 2..50), n in 1usize..5000) {
        let est = log_mean_exp_estimate(&values, n);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(est.estimate >= lo - 1e-12 && est.estimate <= hi + 1e-12);
        prop_assert!(est.se >= 0.0);
    }

    #[test]
    fn laplace_estimate_is_monotone_in_f(values in prop::collection::vec(-2.0f64..2.0, 2..50), shift in 0.0f64..1.0, n in 1usize..500) {
        let lifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        let a = log_mean_exp_estimate(&values, n).estimate;
        let b = log_mean_exp_estimate(&lifted, n).estimate;
        prop_assert!((b - a - shift).abs() < 1e-9);
    }

    #[test]
    fn fixed_point_mass_is_monotone(c in 0.1f64..3.0, seed in any::<u64>()) {
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let theta = sample_theta(&ControlSpec::zero(), 1, grid, 2000, seed, 0).unwrap();
        let r = solve_fixed_point(&theta, &KillingFunction::constant(c).unwrap(), &FixedPointOptions::default()).unwrap();
        prop_assert!(r.mass.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(r.hazard.values.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn higher_killing_leaves_less_mass() {
    let grid = TimeGrid::new(1.0, 50).unwrap();
    let mut last = f64::INFINITY;
    for c in [0.5, 1.0, 2.0, 4.0] {
        let sys = ParticleSystem::new(20_000, 1, grid, KillingFunction::constant(c).unwrap()).unwrap();
        let m = run_system(&sys, &ControlSpec::zero(), 3, 0, RunOptions::default()).unwrap().path.terminal_mass();
        assert!(m < last, "c = {c}: {m} >= {last}");
        // Constant rate c gives mass 1/(1 + c t).
        assert!((m - 1.0 / (1.0 + c)).abs() < 0.015, "c = {c}: {m}");
        last = m;
    }
}
