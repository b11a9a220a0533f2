use nv_readout::levels::{
    apply_pi_pulse, evolve, evolve_rk4, fluorescence_rate, generator_matrix, readout_pair, steady_state, InitMode,
    LevelPopulations, MixingVariant, Propagator, RateSet,
};
use proptest::prelude::*;

fn variant() -> impl Strategy<Value = MixingVariant> {
    prop_oneof![Just(MixingVariant::RadiativeMixing), Just(MixingVariant::NonRadiativeExcitedMixing)]
}

fn any_rates() -> impl Strategy<Value = RateSet> {
    (prop::array::uniform5(0.0..200.0f64), variant())
        .prop_map(|(r, v)| RateSet::new(r[0], r[1], r[2], r[3], r[4], v).unwrap())
}

/// Rates with every channel open, so the steady state is unique.
fn pumped_rates() -> impl Strategy<Value = RateSet> {
    (prop::array::uniform5(0.1..200.0f64), variant())
        .prop_map(|(r, v)| RateSet::new(r[0], r[1], r[2], r[3], r[4], v).unwrap())
}

fn population() -> impl Strategy<Value = LevelPopulations> {
    prop::array::uniform5(0.0..1.0f64)
        .prop_filter("nonzero", |w| w.iter().sum::<f64>() > 1e-3)
        .prop_map(|w| {
            let s: f64 = w.iter().sum();
            LevelPopulations::new(w[0] / s, w[1] / s, w[2] / s, w[3] / s, w[4] / s).unwrap()
        })
}

proptest! {
    #[test]
    fn generator_columns_sum_to_zero(rates in any_rates()) {
        let m = generator_matrix(&rates).unwrap();
        for j in 0..5 {
            let sum: f64 = m.column(j).iter().sum();
            prop_assert!(sum.abs() <= 8.0 * f64::EPSILON * rates.max_rate().max(1.0), "column {} sums to {}", j, sum);
        }
    }

    #[test]
    fn evolution_stays_on_the_simplex(rates in any_rates(), p in population(), t in 0.0..1e5f64) {
        let v = evolve(&p, &rates, t).unwrap().to_array();
        prop_assert!(v.iter().all(|x| (-1e-9..=1.0 + 1e-9).contains(x)), "{:?}", v);
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn eigen_and_stepper_agree(rates in any_rates(), p in population(), t in 0.0..3000.0f64) {
        let a = evolve(&p, &rates, t).unwrap().to_array();
        let b = evolve_rk4(&p, &rates, t).unwrap().to_array();
        for i in 0..5 {
            let scale = a[i].abs().max(1e-12);
            prop_assert!((a[i] - b[i]).abs() <= 1e-6 * scale.max(1e-3), "level {}: {} vs {}", i, a[i], b[i]);
        }
    }

    #[test]
    fn steady_state_is_a_fixed_point(rates in pumped_rates(), k in 0usize..3) {
        let ss = steady_state(&rates).unwrap();
        let t = [1000.0, 10_000.0, 100_000.0][k];
        let v = evolve(&ss, &rates, t).unwrap().to_array();
        for (a, b) in v.iter().zip(ss.to_array()) {
            prop_assert!((a - b).abs() <= 1e-8, "{} vs {}", a, b);
        }
    }

    #[test]
    fn pi_pulse_is_an_involution(p in population()) {
        prop_assert_eq!(apply_pi_pulse(&apply_pi_pulse(&p)), p);
    }

    #[test]
    fn common_rate_scale_rescales_time(rates in any_rates(), p in population(), s in 0.1..10.0f64, t in 0.0..2000.0f64) {
        let a = evolve(&p, &rates.scaled(s), t).unwrap().to_array();
        let b = evolve(&p, &rates, s * t).unwrap().to_array();
        for i in 0..5 {
            prop_assert!((a[i] - b[i]).abs() <= 1e-8, "{} vs {}", a[i], b[i]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn readout_traces_reach_steady_state(
        k_f in 50.0..200.0f64, k_s in 0.5..20.0f64, k_0 in 1.0..50.0f64, k_m in 0.5..5.0f64, v in variant(),
    ) {
        let rates = RateSet::new(k_f, k_f, k_s, k_0, k_m, v).unwrap();
        let target = fluorescence_rate(&steady_state(&rates).unwrap(), &rates, false).unwrap();
        let slowest = slowest_relaxation_rate(&rates);
        // within 0.5 % after eight slowest relaxation times, and by five
        // mixing times whenever that is the later of the two
        let horizon = (8.0 / slowest).max(5.0 / k_m) * 1000.0;
        let (t0, t1) = readout_pair(&rates, InitMode::Ideal, horizon, horizon / 50.0).unwrap();
        for t in [t0, t1] {
            let last = t.last_value().unwrap();
            prop_assert!((last - target).abs() <= 0.005 * target, "{} vs {}", last, target);
        }
    }
}

/// Smallest nonzero relaxation rate of the laser-on generator, MHz.
fn slowest_relaxation_rate(rates: &RateSet) -> f64 {
    let p = Propagator::new(rates).unwrap();
    let mut decay: Vec<f64> = p.eigenvalues().iter().map(|z| -z.re).collect();
    decay.sort_by(f64::total_cmp);
    decay[1]
}

#[test]
fn slow_deshelving_outlasts_five_mixing_times() {
    let rates = RateSet::new(50.0, 50.0, 0.5, 1.0, 4.365, MixingVariant::RadiativeMixing).unwrap();
    assert!(slowest_relaxation_rate(&rates) < rates.k_m);
    let target = fluorescence_rate(&steady_state(&rates).unwrap(), &rates, false).unwrap();
    let horizon = 5.0 / rates.k_m * 1000.0;
    let (t0, _) = readout_pair(&rates, InitMode::Ideal, horizon, horizon / 50.0).unwrap();
    assert!((t0.last_value().unwrap() - target).abs() > 0.005 * target);
}
