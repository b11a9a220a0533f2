use nv_readout::fitkit::*;
use nv_readout::levels::{readout_pair, InitMode, MixingVariant, RateSet};
use nv_readout::{AbscissaUnit, Error, Spectrum, TimeTrace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Multiplicative Gaussian noise with relative standard deviation `rel`.
fn noisy(values: &[f64], rel: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let n = Normal::new(0.0, 1.0).unwrap();
    values.iter().map(|v| v * (1.0 + rel * n.sample(&mut r))).collect()
}

/// Additive noise scaled to `rel` of the largest value.
fn noisy_abs(values: &[f64], rel: f64, seed: u64) -> Vec<f64> {
    let scale = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut r = rng(seed);
    let n = Normal::new(0.0, rel * scale).unwrap();
    values.iter().map(|v| v + n.sample(&mut r)).collect()
}

fn grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
        .collect()
}

fn eval(family: CurveFamily, x: &[f64], p: &[f64]) -> Vec<f64> {
    x.iter().map(|xi| family.value(*xi, p)).collect()
}

#[test]
fn lorentzian_center_recovered_at_one_percent_noise() {
    let x = grid(635.0, 640.0, 401);
    let clean = eval(CurveFamily::Lorentzian, &x, &[637.4, 0.49, 2.0, 0.3]);
    let y = noisy_abs(&clean, 0.01, 1);
    let s = Spectrum::new(AbscissaUnit::Nanometer, x, y).unwrap();
    let fit = fit_lorentzian(&s).unwrap();
    assert!((fit.param("center") - 637.4).abs() < 0.005, "{}", fit.params);
    assert!((fit.param("fwhm") - 0.49).abs() / 0.49 < 0.03);
}

#[test]
fn narrow_line_in_wide_window() {
    // cavity mode: fwhm ~ 0.08 nm inside a 15 nm window
    let x = grid(630.0, 645.0, 301);
    let clean = eval(CurveFamily::Lorentzian, &x, &[637.4, 0.3154, 335.0, 100.0]);
    let s = Spectrum::new(AbscissaUnit::Nanometer, x, clean).unwrap();
    let fit = fit_lorentzian(&s).unwrap();
    assert!((fit.param("fwhm") - 0.3154).abs() < 1e-6, "{}", fit.params);
}

#[test]
fn flat_or_noise_only_spectrum_has_no_peak() {
    let x = grid(635.0, 640.0, 100);
    let flat = Spectrum::new(AbscissaUnit::Nanometer, x.clone(), vec![3.0; 100]).unwrap();
    assert!(matches!(fit_lorentzian(&flat), Err(Error::NoPeakFound(_))));
    assert!(matches!(fit_gaussian(&flat), Err(Error::NoPeakFound(_))));
    let zero = Spectrum::new(AbscissaUnit::Nanometer, x.clone(), vec![0.0; 100]).unwrap();
    assert!(matches!(fit_lorentzian(&zero), Err(Error::NoPeakFound(_))));
    let noise = noisy_abs(&vec![1.0; 100], 0.01, 5);
    let s = Spectrum::new(AbscissaUnit::Nanometer, x, noise).unwrap();
    assert!(matches!(fit_lorentzian(&s), Err(Error::NoPeakFound(_))), "{:?}", fit_lorentzian(&s));
}

#[test]
fn gaussian_round_trip_at_one_percent_noise() {
    let x = grid(-10.0, 10.0, 401);
    let truth = [0.7, 3.0, 5.0, 0.2];
    let clean = eval(CurveFamily::Gaussian, &x, &truth);
    let y = noisy_abs(&clean, 0.01, 2);
    let s = Spectrum::new(AbscissaUnit::Gigahertz, x, y).unwrap();
    let fit = fit_gaussian(&s).unwrap();
    for (name, v) in ["center", "fwhm", "area"].iter().zip([0.7, 3.0, 5.0]) {
        let got = fit.param(name);
        assert!((got - v).abs() / v < 1e-2, "{name}: {got}");
    }
}

#[test]
fn gaussian_pair_widths() {
    let x = grid(469_000.0, 470_800.0, 361);
    let truth = [469_746.0, 370.0, 600.0, 470_041.0, 200.0, 500.0, 0.05];
    let clean = eval(CurveFamily::GaussianPair, &x, &truth);
    let y = noisy_abs(&clean, 0.01, 3);
    let s = Spectrum::new(AbscissaUnit::Gigahertz, x, y).unwrap();
    let fit = fit_gaussian_pair(&s).unwrap();
    assert!(fit.param("center1") < fit.param("center2"));
    assert!((fit.param("fwhm1") - 370.0).abs() / 370.0 < 0.03, "{}", fit.params);
    assert!((fit.param("fwhm2") - 200.0).abs() / 200.0 < 0.03, "{}", fit.params);
}

#[test]
fn odmr_doublet_centers_within_one_megahertz() {
    let x = grid(2.78, 2.96, 361);
    let truth = [2.823, 2.917, 0.04, 0.04, 0.008, 0.008, 1.0];
    let clean = eval(CurveFamily::OdmrDoublet, &x, &truth);
    let y = noisy_abs(&clean, 0.01, 4);
    let s = Spectrum::new(AbscissaUnit::Gigahertz, x, y).unwrap();
    let fit = fit_odmr(&s).unwrap();
    assert!((fit.param("center1") - 2.823).abs() < 1e-3, "{}", fit.params);
    assert!((fit.param("center2") - 2.917).abs() < 1e-3, "{}", fit.params);
}

#[test]
fn odmr_single_dip_is_not_a_doublet() {
    let x = grid(2.78, 2.96, 361);
    let single: Vec<f64> = x
        .iter()
        .map(|xi| 1.0 - 0.04 * 0.008f64.powi(2) / (4.0 * (xi - 2.87).powi(2) + 0.008f64.powi(2)))
        .collect();
    for y in [single.clone(), noisy_abs(&single, 0.01, 6)] {
        let s = Spectrum::new(AbscissaUnit::Gigahertz, x.clone(), y).unwrap();
        let r = fit_odmr(&s);
        assert!(matches!(r, Err(Error::NoPeakFound(_))), "{r:?}");
    }
}

fn rabi_trace(times: &[f64], amplitude: f64, seed: Option<u64>) -> TimeTrace {
    let clean = eval(CurveFamily::DampedCosine, times, &[amplitude, 1100.0, 0.0, 1500.0, 1.0]);
    let y = match seed {
        Some(s) => noisy_abs(&clean, 0.01, s),
        None => clean,
    };
    TimeTrace::new(times.to_vec(), y).unwrap()
}

#[test]
fn rabi_pi_time() {
    let t = grid(0.0, 5000.0, 251);
    let fit = fit_rabi(&rabi_trace(&t, 0.1, Some(7))).unwrap();
    let pi = fit.derived.value("pi_time");
    assert!((pi - 550.0).abs() / 550.0 < 0.01, "{pi}");
}

#[test]
fn rabi_without_oscillation() {
    let t = grid(0.0, 5000.0, 251);
    assert!(matches!(fit_rabi(&rabi_trace(&t, 0.0, None)), Err(Error::NoPeakFound(_))));
    let r = fit_rabi(&rabi_trace(&t, 0.0, Some(8)));
    assert!(matches!(r, Err(Error::NoPeakFound(_))), "{r:?}");
}

#[test]
fn rabi_time_doubling_doubles_period_exactly() {
    let t = grid(0.0, 5000.0, 251);
    let a = fit_rabi(&rabi_trace(&t, 0.1, Some(9))).unwrap();
    let doubled = rabi_trace(&t, 0.1, Some(9));
    let t2: Vec<f64> = t.iter().map(|v| 2.0 * v).collect();
    let b = fit_rabi(&TimeTrace::new(t2, doubled.values().to_vec()).unwrap()).unwrap();
    assert_eq!(b.param("period"), 2.0 * a.param("period"));
}

#[test]
fn rabi_needs_two_periods() {
    let t = grid(0.0, 1500.0, 151);
    let clean = eval(CurveFamily::DampedCosine, &t, &[0.1, 1100.0, 0.0, 1500.0, 1.0]);
    let r = fit_rabi(&TimeTrace::new(t, clean).unwrap());
    assert!(matches!(r, Err(Error::InvalidInput(_))), "{r:?}");
}

fn decay(tau1: f64, seed: u64) -> TimeTrace {
    let t = grid(0.0, 60.0, 1201);
    let clean = eval(CurveFamily::DoubleExponential, &t, &[1000.0, tau1, 1500.0, 1.0, 5.0]);
    TimeTrace::new(t, noisy(&clean, 0.01, seed)).unwrap()
}

#[test]
fn lifetimes_recovered_within_two_percent() {
    for (tau1, seed) in [(9.0, 10), (8.0, 11)] {
        let fit = fit_double_exponential(&decay(tau1, seed)).unwrap();
        assert!((fit.param("tau1") - tau1).abs() / tau1 < 0.02, "{}", fit.params);
        assert!((fit.param("tau2") - 1.0).abs() < 0.02, "{}", fit.params);
    }
}

#[test]
fn single_exponential_is_degenerate() {
    let t = grid(0.0, 60.0, 601);
    let y: Vec<f64> = t.iter().map(|x| 1000.0 * (-x / 9.0).exp() + 5.0).collect();
    match fit_double_exponential(&TimeTrace::new(t, y).unwrap()) {
        Err(Error::IllConditioned(_)) => {}
        Ok(fit) => assert!(fit.param("a2").abs() < 1e-3 * fit.param("a1"), "{}", fit.params),
        Err(e) => panic!("{e}"),
    }
}

fn saturation_counts(powers: &[f64], i_inf: f64, seed: u64) -> Vec<f64> {
    let clean = eval(CurveFamily::Saturation, powers, &[i_inf, 0.5, 1.0]);
    noisy(&clean, 0.01, seed)
}

#[test]
fn saturation_levels_and_ratio() {
    let p = grid(0.05, 5.0, 40);
    let off = fit_saturation(&p, &saturation_counts(&p, 13.6, 12)).unwrap();
    let on = fit_saturation(&p, &saturation_counts(&p, 37.5, 13)).unwrap();
    assert!((off.param("i_inf") - 13.6).abs() / 13.6 < 0.02, "{}", off.params);
    assert!((on.param("i_inf") - 37.5).abs() / 37.5 < 0.02, "{}", on.params);
    let ratio = on.param("i_inf") / off.param("i_inf");
    assert!((ratio - 2.76).abs() < 0.1, "{ratio}");
}

#[test]
fn linear_saturation_data_flagged() {
    let p = grid(0.05, 5.0, 20);
    let y: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
    let r = fit_saturation(&p, &y);
    assert!(matches!(r, Err(Error::IllConditioned(_))), "{r:?}");
}

fn reference_traces(variant: MixingVariant, noise: Option<u64>) -> (TimeTrace, TimeTrace) {
    let rates = RateSet::fitted_off_resonance().with_variant(variant);
    let (a, b) = readout_pair(&rates, InitMode::Ideal, 3000.0, 5.0).unwrap();
    match noise {
        None => (a, b),
        Some(seed) => (
            TimeTrace::new(a.times().to_vec(), noisy(a.values(), 0.01, seed)).unwrap(),
            TimeTrace::new(b.times().to_vec(), noisy(b.values(), 0.01, seed + 1)).unwrap(),
        ),
    }
}

#[test]
fn rates_recovered_from_noisy_traces() {
    let (a, b) = reference_traces(MixingVariant::RadiativeMixing, Some(20));
    let fit = fit_rates(&a, &b, 111.0).unwrap();
    for (name, v) in [("k_m", 1.35), ("k_s", 1.79), ("k_0", 5.80)] {
        let got = fit.param(name);
        assert!((got - v).abs() / v < 0.05, "{name}: {got} ({})", fit.params);
    }
}

#[test]
fn rates_noiseless_round_trip() {
    let (a, b) = reference_traces(MixingVariant::RadiativeMixing, None);
    let fit = fit_rates(&a, &b, 111.0).unwrap();
    for (name, v) in [("k_m", 1.35), ("k_s", 1.79), ("k_0", 5.80)] {
        assert!((fit.param(name) - v).abs() / v < 1e-6, "{}", fit.params);
    }
}

#[test]
fn identical_traces_are_ill_conditioned() {
    let (a, _) = reference_traces(MixingVariant::RadiativeMixing, None);
    assert!(matches!(fit_rates(&a, &a, 111.0), Err(Error::IllConditioned(_))));
    assert!(matches!(
        compare_mixing_variants(&a, &a, 111.0),
        Err(Error::IllConditioned(_))
    ));
}

#[test]
fn rates_jacobian_matches_differences() {
    let (a, b) = reference_traces(MixingVariant::RadiativeMixing, None);
    for variant in [MixingVariant::RadiativeMixing, MixingVariant::NonRadiativeExcitedMixing] {
        let opts = RatesFitOptions {
            variant,
            ..RatesFitOptions::new(111.0)
        };
        let d = rates_jacobian_discrepancy(&a, &b, &opts, [4.0, 2.5, 0.9]).unwrap();
        assert!(d < 1e-4, "{d}");
    }
}

#[test]
fn variant_selection_on_noiseless_data() {
    for variant in [MixingVariant::RadiativeMixing, MixingVariant::NonRadiativeExcitedMixing] {
        let (a, b) = reference_traces(variant, None);
        let cmp = compare_mixing_variants(&a, &b, 111.0).unwrap();
        eprintln!(
            "{variant:?}: rad {} nonrad {}",
            cmp.radiative.residual_norm, cmp.nonradiative.residual_norm
        );
        assert_eq!(cmp.preferred(), variant);
    }
}
