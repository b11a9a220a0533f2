use nv_readout::snr::{enhancement, monte_carlo, snr_contrast, snr_counts, CountPair};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pair(n0: f64, n1: f64) -> CountPair {
    CountPair::new(n0, n1).unwrap()
}

#[test]
fn count_and_contrast_forms_agree_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n0 = 10f64.powf(rng.random_range(-2.0..6.0));
        let c = rng.random_range(-0.999..=1.0);
        let a = snr_contrast(n0, c).unwrap();
        let b = snr_counts(pair(n0, n0 * (1.0 - c))).unwrap();
        worst = worst.max((a - b).abs() / a.abs().max(1.0));
    }
    assert!(worst < 1e-12, "worst deviation {worst:e}");
}

#[test]
fn variance_converges_at_statistical_rate() {
    let cases = [(100.0, 64.0), (5.0, 3.0), (40.0, 10.0), (0.5, 25.0)];
    for (n0, n1) in cases {
        for (trials, seed) in [(10_000, 1), (10_000, 2), (100_000, 3), (100_000, 4)] {
            let r = monte_carlo(pair(n0, n1), trials, seed).unwrap();
            let rel = (r.var_diff - (n0 + n1)).abs() / (n0 + n1);
            assert!(rel < 5.0 / (trials as f64).sqrt(), "({n0}, {n1}) trials {trials}: {rel}");
        }
    }
}

#[test]
fn shards_do_not_depend_on_thread_count() {
    let p = pair(100.0, 64.0);
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = serial.install(|| monte_carlo(p, 300_000, 9).unwrap());
    let b = monte_carlo(p, 300_000, 9).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn snr_antisymmetric(n0 in 0.0..1e5f64, n1 in 0.0..1e5f64) {
        prop_assume!(n0 + n1 > 0.0);
        let a = snr_counts(pair(n0, n1)).unwrap();
        let b = snr_counts(pair(n1, n0)).unwrap();
        prop_assert_eq!(a, -b);
    }

    #[test]
    fn enhancement_factors(a in 1e-3..1e3f64, b in 1e-3..1e3f64, c in 0.01..2.0f64) {
        let joint = enhancement(a * b, c).unwrap();
        let split = enhancement(a, c).unwrap() * b.sqrt();
        prop_assert!((joint - split).abs() <= 1e-12 * joint);
    }
}
