//! Properties of the fitting engine over randomized parameters.
//!
//! Documented ranges per family (abscissa grid in brackets):
//! - Lorentzian / Gaussian [−10, 10]: center ∈ [−1, 1], fwhm ∈ [0.5, 3], area ∈ [1, 10], offset ∈ [0.1, 2]
//! - GaussianPair [−10, 10]: centers ∈ [−4, −2] and [2, 4], fwhm ∈ [1, 2.5], areas ∈ [1, 10]
//! - OdmrDoublet [−5, 5]: centers ∈ [−2.5, −1.5] and [1.5, 2.5], depth ∈ [0.02, 0.2], fwhm ∈ [0.8, 1.5]
//! - DampedCosine [0, 10]: amplitude ∈ [0.5, 2], period ∈ [3, 5], phase ∈ [−1, 1], decay ∈ [5, 20]
//! - DoubleExponential [0, 60]: tau1 ∈ [5, 12], tau2 ∈ [0.5, 2], amplitudes ∈ [0.5, 2]
//! - Saturation [0.05, 5]: i_inf ∈ [5, 50], p_sat ∈ [0.2, 2], background_slope ∈ [0.1, 3]

use nv_readout::fitkit::*;
use nv_readout::levels::{readout_pair, InitMode, MixingVariant, RateSet};
use nv_readout::{AbscissaUnit, Spectrum};
use proptest::prelude::*;
use proptest::test_runner::Config;

fn grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
        .collect()
}

fn domain(family: CurveFamily) -> Vec<f64> {
    match family {
        CurveFamily::Lorentzian | CurveFamily::Gaussian | CurveFamily::GaussianPair => {
            grid(-10.0, 10.0, 201)
        }
        CurveFamily::OdmrDoublet => grid(-5.0, 5.0, 201),
        CurveFamily::DampedCosine => grid(0.0, 10.0, 201),
        CurveFamily::DoubleExponential => grid(0.0, 60.0, 301),
        CurveFamily::Saturation => grid(0.05, 5.0, 30),
    }
}

fn params(family: CurveFamily) -> BoxedStrategy<Vec<f64>> {
    let v = |ranges: Vec<(f64, f64)>| {
        ranges
            .into_iter()
            .map(|(a, b)| a..b)
            .collect::<Vec<_>>()
            .prop_map(|v| v)
            .boxed()
    };
    match family {
        CurveFamily::Lorentzian | CurveFamily::Gaussian => {
            v(vec![(-1.0, 1.0), (0.5, 3.0), (1.0, 10.0), (0.1, 2.0)])
        }
        CurveFamily::GaussianPair => v(vec![
            (-4.0, -2.0),
            (1.0, 2.5),
            (1.0, 10.0),
            (2.0, 4.0),
            (1.0, 2.5),
            (1.0, 10.0),
            (0.1, 2.0),
        ]),
        CurveFamily::OdmrDoublet => v(vec![
            (-2.5, -1.5),
            (1.5, 2.5),
            (0.02, 0.2),
            (0.02, 0.2),
            (0.8, 1.5),
            (0.8, 1.5),
            (0.5, 2.0),
        ]),
        CurveFamily::DampedCosine => {
            v(vec![(0.5, 2.0), (3.0, 5.0), (-1.0, 1.0), (5.0, 20.0), (0.1, 2.0)])
        }
        CurveFamily::DoubleExponential => {
            v(vec![(0.5, 2.0), (5.0, 12.0), (0.5, 2.0), (0.5, 2.0), (0.1, 2.0)])
        }
        CurveFamily::Saturation => v(vec![(5.0, 50.0), (0.2, 2.0), (0.1, 3.0)]),
    }
}

fn synth(family: CurveFamily, x: &[f64], p: &[f64]) -> Vec<f64> {
    x.iter().map(|xi| family.value(*xi, p)).collect()
}

fn named(family: CurveFamily, p: &[f64]) -> NamedValues {
    NamedValues::from_pairs(family.param_names().iter().copied().zip(p.iter().copied()))
}

/// Deterministic pseudo-noise in [−1, 1].
fn wiggle(i: usize) -> f64 {
    ((i as f64 * 12.9898).sin() * 43758.5453).fract()
}

fn round_trip(family: CurveFamily, truth: &[f64]) -> Result<(), TestCaseError> {
    let x = domain(family);
    let y = synth(family, &x, truth);
    let guess: Vec<f64> = truth.iter().map(|v| 1.2 * v).collect();
    let fit = fit_least_squares(family, &x, &y, &named(family, &guess))
        .map_err(|e| TestCaseError::fail(format!("{family:?} {truth:?}: {e}")))?;
    for (name, want) in family.param_names().iter().zip(truth) {
        let got = fit.param(name);
        prop_assert!(
            (got - want).abs() <= 1e-6 * want.abs().max(1.0),
            "{family:?} {name}: {got} vs {want}"
        );
    }
    Ok(())
}

fn jacobian_agrees(family: CurveFamily, p: &[f64]) -> Result<(), TestCaseError> {
    let x = domain(family);
    let y = vec![0.0; x.len()];
    let prob = CurveProblem::new(family, &x, &y).unwrap();
    let d = jacobian_discrepancy(&prob, p, 1e-6).unwrap();
    prop_assert!(d < 1e-4, "{family:?} at {p:?}: {d}");
    Ok(())
}

fn reorder_invariant(family: CurveFamily, truth: &[f64], seed: u64) -> Result<(), TestCaseError> {
    let x = domain(family);
    let scale = synth(family, &x, truth)
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()));
    let y: Vec<f64> = synth(family, &x, truth)
        .iter()
        .enumerate()
        .map(|(i, v)| v + 0.01 * scale * wiggle(i))
        .collect();
    let guess = named(family, &truth.iter().map(|v| 1.1 * v).collect::<Vec<_>>());
    let a = fit_least_squares(family, &x, &y, &guess).unwrap();

    let mut order: Vec<usize> = (0..x.len()).collect();
    // Fisher-Yates driven by the seed
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
    for i in (1..order.len()).rev() {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let j = (state >> 33) as usize % (i + 1);
        order.swap(i, j);
    }
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let b = fit_least_squares(family, &xs, &ys, &guess).unwrap();
    for name in family.param_names() {
        let (pa, pb) = (a.param(name), b.param(name));
        prop_assert!(
            (pa - pb).abs() <= 1e-8 * pa.abs().max(1.0),
            "{family:?} {name}: {pa} vs {pb}"
        );
    }
    Ok(())
}

macro_rules! family_props {
    ($modname:ident, $family:expr) => {
        mod $modname {
            use super::*;

            proptest! {
                #![proptest_config(Config::with_cases(100))]

                #[test]
                fn jacobian_check(p in params($family)) {
                    jacobian_agrees($family, &p)?;
                }
            }

            proptest! {
                #![proptest_config(Config::with_cases(32))]

                #[test]
                fn noiseless_round_trip(p in params($family)) {
                    round_trip($family, &p)?;
                }

                #[test]
                fn reordering_leaves_fit_unchanged(p in params($family), seed in any::<u64>()) {
                    reorder_invariant($family, &p, seed)?;
                }
            }
        }
    };
}

family_props!(lorentzian, CurveFamily::Lorentzian);
family_props!(gaussian, CurveFamily::Gaussian);
family_props!(gaussian_pair, CurveFamily::GaussianPair);
family_props!(odmr, CurveFamily::OdmrDoublet);
family_props!(damped_cosine, CurveFamily::DampedCosine);
family_props!(double_exponential, CurveFamily::DoubleExponential);
family_props!(saturation, CurveFamily::Saturation);

proptest! {
    #![proptest_config(Config::with_cases(16))]

    #[test]
    fn nanometer_to_picometer_rescaling(
        center in 636.0f64..639.0,
        fwhm in 0.1f64..0.8,
        area in 0.5f64..5.0,
    ) {
        let x = grid(635.0, 640.0, 251);
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, xi)| {
                CurveFamily::Lorentzian.value(*xi, &[center, fwhm, area, 0.2]) + 0.01 * wiggle(i)
            })
            .collect();
        let nm = Spectrum::new(AbscissaUnit::Nanometer, x, y).unwrap();
        let pm = nm.rescaled(1000.0, AbscissaUnit::Picometer).unwrap();
        let a = fit_lorentzian(&nm).unwrap();
        let b = fit_lorentzian(&pm).unwrap();
        let rel = |u: f64, v: f64| (u - v).abs() / v.abs();
        prop_assert!(rel(b.param("center"), 1000.0 * a.param("center")) < 1e-8);
        prop_assert!(rel(b.param("fwhm"), 1000.0 * a.param("fwhm")) < 1e-8);
        let ra = a.param("center") / a.param("fwhm");
        let rb = b.param("center") / b.param("fwhm");
        prop_assert!(rel(rb, ra) < 1e-8, "{ra} vs {rb}");
    }
}

proptest! {
    #![proptest_config(Config::with_cases(100))]

    #[test]
    fn rate_model_jacobian_check(
        k0 in 0.5f64..50.0,
        ks in 0.2f64..20.0,
        km in 0.2f64..20.0,
        nonradiative in any::<bool>(),
    ) {
        let rates = RateSet::fitted_off_resonance();
        let (a, b) = readout_pair(&rates, InitMode::Ideal, 3000.0, 25.0).unwrap();
        let variant = if nonradiative {
            MixingVariant::NonRadiativeExcitedMixing
        } else {
            MixingVariant::RadiativeMixing
        };
        let opts = RatesFitOptions { variant, ..RatesFitOptions::new(111.0) };
        let d = rates_jacobian_discrepancy(&a, &b, &opts, [k0, ks, km]).unwrap();
        prop_assert!(d < 1e-4, "{d}");
    }
}
