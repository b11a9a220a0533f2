//! Regenerates the CSV files in `fixtures/`.
//!
//! Run with `cargo run --example make_fixtures`.

use std::f64::consts::{LN_2, PI};
use std::path::Path;

use nv_readout::collection::EfficiencyTable;
use nv_readout::levels::{readout_pair, InitMode, RateSet};
use nv_readout::shell::files::{efficiency_doc, trace_doc, SATURATION_HEADER};
use nv_readout::shell::CsvDoc;
use nv_readout::TimeTrace;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

fn lorentzian(x: f64, center: f64, fwhm: f64, area: f64) -> f64 {
    let g = fwhm / 2.0;
    area / PI * g / ((x - center).powi(2) + g * g)
}

fn gaussian(x: f64, center: f64, fwhm: f64, area: f64) -> f64 {
    area * (4.0 * LN_2 / PI).sqrt() / fwhm * (-4.0 * LN_2 * (x - center).powi(2) / fwhm.powi(2)).exp()
}

struct Noise {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
}

impl Noise {
    fn new(seed: u64) -> Self {
        Noise {
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::new(0.0, 1.0).unwrap(),
        }
    }

    fn relative(&mut self, y: f64, sigma: f64) -> f64 {
        y * (1.0 + sigma * self.normal.sample(&mut self.rng))
    }

    fn absolute(&mut self, y: f64, sigma: f64) -> f64 {
        y + sigma * self.normal.sample(&mut self.rng)
    }
}

fn two_columns(header: &[&str], x: &[f64], y: &[f64], comments: &[&str]) -> CsvDoc {
    CsvDoc::new(header, x.iter().zip(y).map(|(a, b)| vec![*a, *b]).collect()).with_comments(comments)
}

fn main() -> nv_readout::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir).expect("fixtures directory");
    let save = |name: &str, doc: CsvDoc| doc.write(&dir.join(name));

    // Detuned cavity mode on a flat PL background.
    let mut noise = Noise::new(1);
    let x = grid(643.0, 646.5, 0.005);
    let y: Vec<f64> = x
        .iter()
        .map(|&l| noise.absolute(50.0 + lorentzian(l, 644.8, 0.078, 30.0), 1.0))
        .collect();
    save(
        "mode_spectrum_detuned.csv",
        two_columns(
            &["wavelength_nm", "intensity"],
            &x,
            &y,
            &[
                "synthetic PL spectrum: Lorentzian mode at 644.8 nm, FWHM 0.078 nm (Q = 8267), area 30",
                "flat background 50, additive Gaussian noise sigma 1, seed 1",
            ],
        ),
    )?;

    // Resonant mode: Lorentzian area 335 over background 100 across 15 nm
    // puts 18.3 % of the integrated intensity into the mode.
    let mut noise = Noise::new(2);
    let x = grid(630.0, 645.0, 0.02);
    let y: Vec<f64> = x
        .iter()
        .map(|&l| noise.absolute(100.0 + lorentzian(l, 637.4, 0.3154, 335.0), 1.0))
        .collect();
    save(
        "mode_spectrum_resonant.csv",
        two_columns(
            &["wavelength_nm", "intensity"],
            &x,
            &y,
            &[
                "synthetic PL spectrum: Lorentzian mode at 637.4 nm, FWHM 0.3154 nm (Q = 2021), area 335",
                "flat background 100 over 630-645 nm, mode fraction of the total area 0.183",
                "additive Gaussian noise sigma 1, seed 2",
            ],
        ),
    )?;

    // Two inhomogeneously broadened emitter lines in frequency.
    let mut noise = Noise::new(3);
    let x = grid(468_500.0, 472_500.0, 10.0);
    let y: Vec<f64> = x
        .iter()
        .map(|&f| {
            let v = 5.0 + gaussian(f, 470_000.0, 370.0, 4000.0) + gaussian(f, 470_900.0, 200.0, 2000.0);
            noise.absolute(v, 0.05)
        })
        .collect();
    save(
        "emitter_lines.csv",
        two_columns(
            &["frequency_ghz", "intensity"],
            &x,
            &y,
            &[
                "synthetic PLE spectrum: Gaussians at 470000 GHz (FWHM 370 GHz, area 4000)",
                "and 470900 GHz (FWHM 200 GHz, area 2000), offset 5, noise sigma 0.05, seed 3",
            ],
        ),
    )?;

    // Readout traces at the fitted off-resonance rates.
    let rates = RateSet::fitted_off_resonance();
    let (t0, t1) = readout_pair(&rates, InitMode::Ideal, 3000.0, 5.0)?;
    let mut noise = Noise::new(4);
    for (name, trace, prep) in [("readout_ms0.csv", &t0, "m_s=0"), ("readout_ms1.csv", &t1, "m_s=+-1")] {
        let values: Vec<f64> = trace.values().iter().map(|&v| noise.relative(v, 0.01)).collect();
        let noisy = TimeTrace::new(trace.times().to_vec(), values)?;
        let note = format!("synthetic five-level readout after {prep} preparation, fluorescence in MHz");
        let doc = trace_doc(&noisy).with_comments(&[
            &note,
            "K_e = K_f = 111, K_s = 1.79, K_0 = 5.80, K_m = 1.35 MHz, radiative mixing, ideal initialization",
            "1 % multiplicative Gaussian noise, seed 4",
        ]);
        save(name, doc)?;
    }

    // Per-axis collection efficiency against cavity-mode position: x and z
    // flat, y dipped by the mode-coupled redistribution near 637.4 nm.
    let x = grid(630.0, 645.0, 0.2);
    let eps_y: Vec<f64> = x
        .iter()
        .map(|&l| 0.048685 - 0.014885 / (1.0 + (l - 637.4).powi(2)))
        .collect();
    let table = EfficiencyTable::new(x.clone(), vec![0.05; x.len()], eps_y, vec![0.03; x.len()])?;
    save(
        "efficiency_table.csv",
        efficiency_doc(&table).with_comments(&[
            "collection efficiency per dipole axis against cavity-mode position",
            "synthetic: eps_x = 0.05, eps_z = 0.03, eps_y = 0.048685 - 0.014885 / (1 + (wavelength - 637.4)^2)",
            "built so the weighted efficiency is 0.039 with the mode at 634.0 nm and 0.034 on resonance",
        ]),
    )?;

    // Saturation curves with a small linear background.
    let powers = grid(20.0, 4000.0, 40.0);
    for (name, i_inf, p_sat, seed) in [
        ("saturation_detuned.csv", 13.6, 310.0, 5),
        ("saturation_resonant.csv", 37.5, 340.0, 6),
    ] {
        let mut noise = Noise::new(seed);
        let counts: Vec<f64> = powers
            .iter()
            .map(|&p| noise.relative(i_inf * p / (p + p_sat) + 0.0005 * p, 0.01))
            .collect();
        let line = format!("synthetic saturation curve: i_inf {i_inf} kHz, p_sat {p_sat} uW");
        let seed_line = format!("linear background 0.0005 kHz/uW, 1 % multiplicative noise, seed {seed}");
        save(name, two_columns(&SATURATION_HEADER, &powers, &counts, &[&line, &seed_line]))?;
    }

    // Continuous-wave ODMR with two dips.
    let mut noise = Noise::new(7);
    let x = grid(2.78, 2.96, 0.001);
    let y: Vec<f64> = x
        .iter()
        .map(|&f| {
            let dip = |c: f64, depth: f64| depth * 0.012f64.powi(2) / (4.0 * (f - c).powi(2) + 0.012f64.powi(2));
            noise.absolute(1000.0 * (1.0 - dip(2.823, 0.025) - dip(2.917, 0.02)), 1.0)
        })
        .collect();
    save(
        "odmr.csv",
        two_columns(
            &["frequency_ghz", "intensity"],
            &x,
            &y,
            &[
                "synthetic ODMR: Lorentzian dips at 2.823 GHz (depth 2.5 %) and 2.917 GHz (depth 2 %)",
                "FWHM 12 MHz, baseline 1000, additive noise sigma 1, seed 7",
            ],
        ),
    )?;

    // Damped Rabi oscillation, pi-time 550 ns, decay 1.5 us.
    let mut noise = Noise::new(8);
    let t = grid(0.0, 4000.0, 20.0);
    let y: Vec<f64> = t
        .iter()
        .map(|&t| noise.absolute(1.0 + 0.03 * (2.0 * PI * t / 1100.0).cos() * (-t / 1500.0).exp(), 0.002))
        .collect();
    save(
        "rabi.csv",
        two_columns(
            &["time_ns", "signal"],
            &t,
            &y,
            &[
                "synthetic Rabi oscillation: period 1100 ns (pi-time 550 ns), decay 1500 ns",
                "amplitude 0.03 on offset 1, additive noise sigma 0.002, seed 8",
            ],
        ),
    )?;

    // Lifetime traces: emitter decay plus a fast membrane component.
    let t = grid(0.0, 60.0, 0.1);
    for (name, tau, seed) in [("lifetime_detuned.csv", 9.0, 9), ("lifetime_resonant.csv", 8.0, 10)] {
        let mut noise = Noise::new(seed);
        let y: Vec<f64> = t
            .iter()
            .map(|&t| noise.relative(1000.0 * (-t / tau).exp() + 400.0 * (-t / 1.0).exp() + 2.0, 0.01))
            .collect();
        let line = format!("synthetic lifetime decay: 1000 exp(-t/{tau} ns) + 400 exp(-t/1 ns) + 2");
        let seed_line = format!("1 % multiplicative noise, seed {seed}");
        save(name, two_columns(&["time_ns", "signal"], &t, &y, &[&line, &seed_line]))?;
    }
    Ok(())
}
