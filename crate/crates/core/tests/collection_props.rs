use nv_readout::collection::{
    collection_efficiency, combined_efficiency, effective_rates, emission_fractions, photon_ratio,
    CollectionConfig, DetectionMode, DipoleWeights, EfficiencyTable, ReadoutScenario,
};
use proptest::prelude::*;

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn rates() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(0.0..100.0f64).prop_filter("nonzero", |r| r.iter().sum::<f64>() > 1e-6)
}

fn weights() -> impl Strategy<Value = DipoleWeights> {
    prop::array::uniform3(0.01..1.0f64).prop_map(|w| {
        let s: f64 = w.iter().sum();
        let (x, y) = (w[0] / s, w[1] / s);
        DipoleWeights::new(x, y, 1.0 - x - y).unwrap()
    })
}

fn table() -> impl Strategy<Value = EfficiencyTable> {
    (3usize..12, prop::collection::vec(prop::array::uniform3(0.0..=1.0f64), 12)).prop_map(|(n, rows)| {
        let wl: Vec<f64> = (0..n).map(|i| 630.0 + 1.5 * i as f64).collect();
        let col = |a: usize| rows[..n].iter().map(|r| r[a]).collect::<Vec<_>>();
        EfficiencyTable::new(wl, col(0), col(1), col(2)).unwrap()
    })
}

fn scenario() -> impl Strategy<Value = ReadoutScenario> {
    (0.5..2.0f64, 0.5..1.2f64, 0.01..0.5f64, 0.01..0.9f64, 0.5..1.1f64, any::<bool>()).prop_map(
        |(l, c, off, on, cr, zpl)| ReadoutScenario {
            lifetime_factor: l,
            collection_factor: c,
            zpl_fraction_off: off,
            zpl_fraction_on: on,
            contrast_ratio: cr,
            mode: if zpl { DetectionMode::ZplOnly } else { DetectionMode::Broadband },
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn fractions_sum_to_one(r in rates()) {
        let f = emission_fractions(r).unwrap();
        prop_assert!((f.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn fractions_scale_exactly_by_powers_of_two(r in rates(), k in -20i32..20) {
        let s = 2f64.powi(k);
        prop_assert_eq!(emission_fractions(r.map(|v| v * s)).unwrap(), emission_fractions(r).unwrap());
    }

    #[test]
    fn fractions_scale_invariant(r in rates(), s in 1e-3..1e3f64) {
        let a = emission_fractions(r.map(|v| v * s)).unwrap();
        let b = emission_fractions(r).unwrap();
        for i in 0..3 {
            prop_assert!((a[i] - b[i]).abs() <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn fractions_permute_with_rates(r in rates(), p in 0usize..6) {
        let perm = PERMS[p];
        let f = emission_fractions(r).unwrap();
        let g = emission_fractions(perm.map(|i| r[i])).unwrap();
        for i in 0..3 {
            prop_assert!((g[i] - f[perm[i]]).abs() <= 2.0 * f64::EPSILON);
        }
    }

    #[test]
    fn combined_efficiency_bounded(t in table(), r in rates(), u in 0.0..=1.0f64) {
        let (lo, hi) = t.range();
        let wl = lo + u * (hi - lo);
        let f = emission_fractions(r).unwrap();
        let eps = t.at(wl).unwrap();
        let e = combined_efficiency(&t, f, wl).unwrap();
        let min = eps.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = eps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(e >= min - 1e-15 && e <= max + 1e-15, "{} not in [{}, {}]", e, min, max);
    }

    #[test]
    fn chain_is_permutation_equivariant(
        t in table(), w in weights(), f in prop::array::uniform3(0.1..50.0f64), u in 0.0..=1.0f64, p in 0usize..6,
    ) {
        let perm = PERMS[p];
        let (lo, hi) = t.range();
        let wl = lo + u * (hi - lo);
        let base = collection_efficiency(&t, &w, &CollectionConfig { purcell: f, wavelength: wl }).unwrap();
        let permuted = collection_efficiency(
            &t.permuted(perm).unwrap(),
            &w.permuted(perm).unwrap(),
            &CollectionConfig { purcell: perm.map(|i| f[i]), wavelength: wl },
        )
        .unwrap();
        prop_assert!((base - permuted).abs() <= 1e-15, "{} vs {}", base, permuted);
    }

    #[test]
    fn effective_rates_scale_with_each_purcell_factor(w in weights(), f in prop::array::uniform3(0.0..50.0f64), axis in 0usize..3, s in 1.0..5.0f64) {
        let a = effective_rates(1.0, &w, f).unwrap();
        let mut g = f;
        g[axis] *= s;
        let b = effective_rates(1.0, &w, g).unwrap();
        for i in 0..3 {
            if i == axis {
                prop_assert!(b[i] >= a[i]);
            } else {
                prop_assert_eq!(b[i], a[i]);
            }
        }
    }

    #[test]
    fn photon_ratio_multiplicative(s in scenario(), m in 0.5..2.0f64) {
        let base = photon_ratio(&s).unwrap();
        let l = photon_ratio(&ReadoutScenario { lifetime_factor: s.lifetime_factor * m, ..s }).unwrap();
        let c = photon_ratio(&ReadoutScenario { collection_factor: s.collection_factor * m, ..s }).unwrap();
        prop_assert!((l / base - m).abs() <= 1e-12);
        prop_assert!((c / base - m).abs() <= 1e-12);
    }

    #[test]
    fn photon_ratio_monotone(s in scenario(), d in 0.001..0.05f64) {
        let base = photon_ratio(&s).unwrap();
        let up = |t: ReadoutScenario| photon_ratio(&t).unwrap();
        let longer = up(ReadoutScenario { lifetime_factor: s.lifetime_factor + d, ..s });
        let better = up(ReadoutScenario { collection_factor: s.collection_factor + d, ..s });
        prop_assert!(longer > base);
        prop_assert!(better > base);
        let on = (s.zpl_fraction_on + d).min(0.99);
        let off = s.zpl_fraction_off + d;
        match s.mode {
            DetectionMode::ZplOnly => {
                let more_on = up(ReadoutScenario { zpl_fraction_on: on, ..s });
                let more_off = up(ReadoutScenario { zpl_fraction_off: off, ..s });
                prop_assert!(more_on >= base);
                prop_assert!(more_off < base);
            }
            DetectionMode::Broadband => {
                let shifted = up(ReadoutScenario { zpl_fraction_on: on, zpl_fraction_off: off, ..s });
                prop_assert_eq!(shifted, base);
            }
        }
    }
}

#[test]
fn uniform_table_returns_its_value() {
    let t = EfficiencyTable::uniform(630.0, 645.0, 0.05).unwrap();
    for f in [[1.0, 0.0, 0.0], [0.2, 0.3, 0.5], [1.0 / 3.0; 3]] {
        let sum: f64 = f.iter().sum();
        let f = f.map(|v| v / sum);
        assert!((combined_efficiency(&t, f, 637.0).unwrap() - 0.05).abs() < 1e-15);
    }
}
