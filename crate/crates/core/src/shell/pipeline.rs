//! Subcommand dispatch: resolve inputs from the config, run, report.

use std::path::PathBuf;

use super::config::{RunConfig, SectionReader};
use super::files::{load_efficiency_table, load_saturation, load_spectrum, load_trace, trace_doc};
use super::report::{Entry, Report, Source};
use crate::cavity::{
    beta_from_spectrum, predict_purcell, purcell_from_beta, tuning_plan, CavityParams, ModeFit, TuningPlan,
    ADSORPTION_RED_SHIFT_NM_PER_H, OXIDATION_BLUE_SHIFT_PER_NM,
};
use crate::collection::{
    collection_efficiency, coupled_axis_purcell, effective_rates, emission_fractions, photon_ratio,
    scenario_collection_factor, CollectionConfig, DetectionMode, DipoleWeights, EfficiencyTable, ReadoutScenario,
    AXIS_NAMES,
};
use crate::error::{Error, Result};
use crate::fitkit::{
    compare_mixing_variants_with, fit_double_exponential, fit_gaussian, fit_gaussian_pair, fit_lorentzian,
    fit_odmr, fit_rabi, fit_saturation, FitResult, RatesFitOptions,
};
use crate::levels::{
    contrast_trace, fluorescence_rate, gated_contrast, readout_pair, steady_state, InitMode, MixingVariant,
    RateSet,
};
use crate::snr::{enhancement, enhancement_exact, monte_carlo, snr_counts, CountPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fit,
    Rates,
    Spectrum,
    Purcell,
    Collect,
    Snr,
    Mc,
    Tune,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Simulate,
        Command::Fit,
        Command::Rates,
        Command::Spectrum,
        Command::Purcell,
        Command::Collect,
        Command::Snr,
        Command::Mc,
        Command::Tune,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Rates => "rates",
            Command::Spectrum => "spectrum",
            Command::Purcell => "purcell",
            Command::Collect => "collect",
            Command::Snr => "snr",
            Command::Mc => "mc",
            Command::Tune => "tune",
        }
    }

    pub fn from_id(id: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.id() == id)
    }

    /// Config section holding this command's inputs.
    pub fn section(self) -> &'static str {
        match self {
            Command::Simulate => "rates",
            Command::Fit => "fit",
            Command::Rates => "rates_fit",
            Command::Spectrum => "spectrum",
            Command::Purcell => "cavity",
            Command::Collect => "collection",
            Command::Snr => "scenario",
            Command::Mc => "mc",
            Command::Tune => "tuning",
        }
    }
}

/// Process exit status for a failed run: 2 validation, 3 non-convergence, 4 I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged(_) | Error::FitNotConverged(_) | Error::IllConditioned(_) => 3,
        Error::Io { .. } => 4,
        _ => 2,
    }
}

type Resolved<T> = std::result::Result<(T, Vec<Entry>), Vec<String>>;

fn finish<T>(r: SectionReader<'_>, value: Option<T>) -> Resolved<T> {
    let entries = r.finish()?;
    Ok((value.expect("no errors recorded, so every check passed"), entries))
}

/// Field-level problems in every section present in `cfg`.
pub(crate) fn validate_sections(cfg: &RunConfig) -> Vec<String> {
    fn errs<T>(r: Resolved<T>) -> Vec<String> {
        r.err().unwrap_or_default()
    }
    let mut out = Vec::new();
    for cmd in Command::ALL {
        if !cfg.has_section(cmd.section()) {
            continue;
        }
        out.extend(match cmd {
            Command::Simulate => errs(simulate_inputs(cfg)),
            Command::Fit => errs(fit_inputs(cfg)),
            Command::Rates => errs(rates_fit_inputs(cfg)),
            Command::Spectrum => errs(spectrum_inputs(cfg)),
            Command::Purcell => errs(cavity_inputs(cfg)),
            Command::Collect => errs(collection_inputs(cfg)),
            Command::Snr => errs(scenario_inputs(cfg)),
            Command::Mc => errs(mc_inputs(cfg)),
            Command::Tune => errs(tuning_inputs(cfg)),
        });
    }
    out
}

fn variant(id: &str) -> MixingVariant {
    MixingVariant::from_id(id).unwrap_or(MixingVariant::RadiativeMixing)
}

struct SimulateInputs {
    rates: RateSet,
    init: InitMode,
    duration: f64,
    step: f64,
    gate_start: f64,
    gate_width: f64,
    purcell_factor: f64,
}

fn simulate_inputs(cfg: &RunConfig) -> Resolved<SimulateInputs> {
    let fitted = RateSet::fitted_off_resonance();
    let mut r = SectionReader::new(cfg, "rates");
    let k_f = r.number("k_f", Some(fitted.k_f), "MHz");
    let k_e = r.number("k_e", Some(k_f), "MHz");
    let k_s = r.number("k_s", Some(fitted.k_s), "MHz");
    let k_0 = r.number("k_0", Some(fitted.k_0), "MHz");
    let k_m = r.number("k_m", Some(fitted.k_m), "MHz");
    let v = variant(&r.choice("variant", Some("radiative")));
    let mut rates_ok = true;
    for (key, value) in [("k_f", k_f), ("k_e", k_e), ("k_s", k_s), ("k_0", k_0), ("k_m", k_m)] {
        if value < 0.0 {
            r.error(key, format!("must be >= 0, got {value}"));
            rates_ok = false;
        }
    }
    let rates = if rates_ok {
        r.check("k_f", RateSet::new(k_e, k_f, k_s, k_0, k_m, v))
    } else {
        None
    };
    let init = match r.optional_number("polarization", "1") {
        Some(p) => InitMode::Polarized(p),
        None => InitMode::Ideal,
    };
    r.check("polarization", init.validate());
    let duration = r.number("duration_ns", Some(3000.0), "ns");
    let step = r.number("step_ns", Some(1.0), "ns");
    if !(step > 0.0 && step <= duration) {
        r.error("step_ns", format!("need 0 < step_ns <= duration_ns, got {step} / {duration}"));
    }
    let gate_start = r.number("gate_start_ns", Some(0.0), "ns");
    let gate_width = r.number("gate_width_ns", Some(250.0), "ns");
    if !(gate_start >= 0.0 && gate_width > 0.0) {
        r.error("gate_width_ns", "gate needs start >= 0 and width > 0");
    }
    let purcell_factor = r.number("purcell_factor", Some(9.0 / 8.0), "1");
    if !(purcell_factor > 0.0) {
        r.error("purcell_factor", format!("must be > 0, got {purcell_factor}"));
    }
    let value = rates.map(|rates| SimulateInputs {
        rates,
        init,
        duration,
        step,
        gate_start,
        gate_width,
        purcell_factor,
    });
    finish(r, value)
}

struct FitInputs {
    model: String,
    data: PathBuf,
}

fn fit_inputs(cfg: &RunConfig) -> Resolved<FitInputs> {
    let mut r = SectionReader::new(cfg, "fit");
    let model = r.choice("model", None);
    let data = r.path("data");
    finish(r, Some(FitInputs { model, data }))
}

struct RatesFitInputs {
    trace0: PathBuf,
    trace1: PathBuf,
    opts: RatesFitOptions,
}

fn rates_fit_inputs(cfg: &RunConfig) -> Resolved<RatesFitInputs> {
    let mut r = SectionReader::new(cfg, "rates_fit");
    let trace0 = r.path("trace_ms0");
    let trace1 = r.path("trace_ms1");
    let k_f = r.number("k_f", Some(RateSet::fitted_off_resonance().k_f), "MHz");
    if !(k_f > 0.0) {
        r.error("k_f", format!("must be > 0, got {k_f}"));
    }
    let v = variant(&r.choice("variant", Some("radiative")));
    let opts = RatesFitOptions {
        variant: v,
        ..RatesFitOptions::new(k_f)
    };
    finish(r, Some(RatesFitInputs { trace0, trace1, opts }))
}

fn spectrum_inputs(cfg: &RunConfig) -> Resolved<PathBuf> {
    let mut r = SectionReader::new(cfg, "spectrum");
    let data = r.path("data");
    finish(r, Some(data))
}

fn cavity_inputs(cfg: &RunConfig) -> Resolved<CavityParams> {
    let d = CavityParams::tuned_cavity();
    let mut r = SectionReader::new(cfg, "cavity");
    let p = CavityParams {
        q_factor: r.number("q_factor", Some(d.q_factor), "1"),
        mode_volume: r.number("mode_volume", Some(d.mode_volume), "(lambda/n)^3"),
        wavelength: r.number("wavelength_nm", Some(d.wavelength), "nm"),
        refractive_index: r.number("refractive_index", Some(d.refractive_index), "1"),
        emitter_fwhm: r.number("emitter_fwhm_ghz", Some(d.emitter_fwhm), "GHz"),
        zpl_fraction: r.number("zpl_fraction", Some(d.zpl_fraction), "1"),
    };
    let p = r.check("cavity", p.validate()).map(|_| p);
    finish(r, p)
}

struct CollectionInputs {
    table: PathBuf,
    weights: DipoleWeights,
    off: CollectionConfig,
    on: CollectionConfig,
}

fn collection_inputs(cfg: &RunConfig) -> Resolved<CollectionInputs> {
    let d = DipoleWeights::membrane_001();
    let mut r = SectionReader::new(cfg, "collection");
    let table = r.path("table");
    let k = [
        r.number("k_x", Some(d.k_x), "1"),
        r.number("k_y", Some(d.k_y), "1"),
        r.number("k_z", Some(d.k_z), "1"),
    ];
    let weights = r.check("k_x", DipoleWeights::new(k[0], k[1], k[2]));
    let off_wl = r.number("off_wavelength_nm", Some(634.0), "nm");
    let on_wl = r.number("on_wavelength_nm", Some(637.4), "nm");
    let purcell_off = r.optional_triple("purcell_off", "1").unwrap_or([1.0; 3]);
    let purcell_on = match r.optional_triple("purcell_on", "1") {
        Some(f) => Some(f),
        None => {
            let axis = r.choice("coupled_axis", Some("y"));
            let axis = AXIS_NAMES.iter().position(|a| *a == axis).unwrap_or(1);
            let xi_off = r.number("zpl_fraction_off", Some(0.021), "1");
            let xi_on = r.number("zpl_fraction_on", Some(0.183), "1");
            weights.and_then(|w| {
                let f = r.check("zpl_fraction_on", coupled_axis_purcell(&w, axis, xi_off, xi_on))?;
                let mut purcell = [1.0; 3];
                purcell[axis] = f;
                Some(purcell)
            })
        }
    };
    if let (Some(w), Some(on)) = (weights, purcell_on) {
        r.check("purcell_off", effective_rates(1.0, &w, purcell_off));
        r.check("purcell_on", effective_rates(1.0, &w, on));
    }
    let value = weights.zip(purcell_on).map(|(weights, on)| CollectionInputs {
        table,
        weights,
        off: CollectionConfig {
            purcell: purcell_off,
            wavelength: off_wl,
        },
        on: CollectionConfig {
            purcell: on,
            wavelength: on_wl,
        },
    });
    finish(r, value)
}

struct ScenarioInputs {
    zpl: ReadoutScenario,
    broadband: ReadoutScenario,
    contrast_off: f64,
}

fn scenario_inputs(cfg: &RunConfig) -> Resolved<ScenarioInputs> {
    let d = ReadoutScenario::tuned_cavity(DetectionMode::ZplOnly);
    let mut r = SectionReader::new(cfg, "scenario");
    let lifetime_factor = r.number("lifetime_factor", Some(d.lifetime_factor), "1");
    let c_zpl = r.number(
        "collection_factor_zpl",
        Some(scenario_collection_factor(DetectionMode::ZplOnly)),
        "1",
    );
    let c_bb = r.number(
        "collection_factor_broadband",
        Some(scenario_collection_factor(DetectionMode::Broadband)),
        "1",
    );
    let zpl = ReadoutScenario {
        lifetime_factor,
        collection_factor: c_zpl,
        zpl_fraction_off: r.number("zpl_fraction_off", Some(d.zpl_fraction_off), "1"),
        zpl_fraction_on: r.number("zpl_fraction_on", Some(d.zpl_fraction_on), "1"),
        contrast_ratio: r.number("contrast_ratio", Some(d.contrast_ratio), "1"),
        mode: DetectionMode::ZplOnly,
    };
    let broadband = ReadoutScenario {
        collection_factor: c_bb,
        mode: DetectionMode::Broadband,
        ..zpl
    };
    let contrast_off = r.number("contrast_off", Some(0.042), "1");
    if !(contrast_off > 0.0 && contrast_off <= 1.0 && contrast_off * zpl.contrast_ratio <= 1.0) {
        r.error("contrast_off", format!("need 0 < contrast_off <= 1 on and off resonance, got {contrast_off}"));
    }
    let ok_zpl = r.check(field_of(&zpl), zpl.validate()).is_some();
    let ok_bb = ok_zpl && r.check("collection_factor_broadband", broadband.validate()).is_some();
    finish(
        r,
        (ok_zpl && ok_bb).then_some(ScenarioInputs {
            zpl,
            broadband,
            contrast_off,
        }),
    )
}

/// Key named by the first failing scenario invariant.
fn field_of(s: &ReadoutScenario) -> &'static str {
    let bad = |x: f64| !(x.is_finite() && x > 0.0);
    if bad(s.lifetime_factor) {
        "lifetime_factor"
    } else if bad(s.collection_factor) {
        "collection_factor_zpl"
    } else if bad(s.contrast_ratio) {
        "contrast_ratio"
    } else if !(s.zpl_fraction_off > 0.0 && s.zpl_fraction_off < 1.0) {
        "zpl_fraction_off"
    } else {
        "zpl_fraction_on"
    }
}

struct McInputs {
    pair: CountPair,
    trials: u64,
}

fn mc_inputs(cfg: &RunConfig) -> Resolved<McInputs> {
    let mut r = SectionReader::new(cfg, "mc");
    let n0 = r.number("n0", None, "photons");
    let n1 = r.number("n1", None, "photons");
    let trials = r.integer("trials", 1_000_000, "trials");
    if trials < crate::snr::MIN_TRIALS {
        r.error("trials", format!("need at least {}", crate::snr::MIN_TRIALS));
    }
    let pair = if n0.is_nan() || n1.is_nan() {
        None
    } else {
        match CountPair::new(n0, n1) {
            Ok(p) if p.n0 + p.n1 > 0.0 => Some(p),
            Ok(_) => {
                r.error("n0", "n0 + n1 must be > 0");
                None
            }
            Err(e) => {
                r.error(if n0 < 0.0 { "n0" } else { "n1" }, e);
                None
            }
        }
    };
    finish(r, pair.map(|pair| McInputs { pair, trials }))
}

struct TuningInputs {
    current: f64,
    target: f64,
    red_rate: f64,
    blue_shift: f64,
}

fn tuning_inputs(cfg: &RunConfig) -> Resolved<TuningInputs> {
    let mut r = SectionReader::new(cfg, "tuning");
    let t = TuningInputs {
        current: r.number("current_nm", None, "nm"),
        target: r.number("target_nm", None, "nm"),
        red_rate: r.number("red_rate_nm_per_h", Some(ADSORPTION_RED_SHIFT_NM_PER_H), "nm/h"),
        blue_shift: r.number("blue_shift_per_nm", Some(OXIDATION_BLUE_SHIFT_PER_NM), "nm/nm"),
    };
    for (key, v) in [
        ("current_nm", t.current),
        ("target_nm", t.target),
        ("red_rate_nm_per_h", t.red_rate),
        ("blue_shift_per_nm", t.blue_shift),
    ] {
        if !v.is_nan() && v <= 0.0 {
            r.error(key, format!("must be > 0, got {v}"));
        }
    }
    finish(r, Some(t))
}

/// Runs one subcommand. `seed` overrides `[run] seed` and is recorded as a flag.
pub fn run_pipeline(cfg: &RunConfig, command: Command, seed: Option<u64>) -> Result<Report> {
    if !cfg.has_section(command.section()) {
        return Err(Error::Config(vec![format!(
            "[{}]: section required by `{}`",
            command.section(),
            command.id()
        )]));
    }
    let mut report = Report::new(command.id());
    macro_rules! inputs {
        ($resolve:expr) => {{
            let (value, entries) = $resolve(cfg).map_err(Error::Config)?;
            report.entries.extend(entries);
            value
        }};
    }
    macro_rules! run {
        ($resolve:expr, $body:expr) => {{
            let value = inputs!($resolve);
            $body(&mut report, value)?
        }};
    }
    match command {
        Command::Simulate => run!(simulate_inputs, simulate),
        Command::Fit => run!(fit_inputs, fit),
        Command::Rates => run!(rates_fit_inputs, rates),
        Command::Spectrum => run!(spectrum_inputs, spectrum),
        Command::Purcell => run!(cavity_inputs, purcell),
        Command::Collect => run!(collection_inputs, collect),
        Command::Snr => run!(scenario_inputs, snr),
        Command::Mc => {
            let (seed, source) = match (seed, cfg.seed()) {
                (Some(s), _) => (s, Source::Flag),
                (None, Some(s)) => (s, Source::Config),
                (None, None) => (0, Source::Default),
            };
            report.integer("run", "seed", seed, "1", source);
            let value = inputs!(mc_inputs);
            mc(&mut report, value, seed)?
        }
        Command::Tune => run!(tuning_inputs, tune),
    }
    Ok(report)
}

const OUT: Source = Source::Computed;

fn simulate(report: &mut Report, p: SimulateInputs) -> Result<()> {
    let (t0, t1) = readout_pair(&p.rates, p.init, p.duration, p.step)?;
    let steady = fluorescence_rate(&steady_state(&p.rates)?, &p.rates, false)?;
    let contrast = contrast_trace(&t0, &t1, steady)?;
    let f0 = t0.last_value().expect("non-empty grid");
    let f1 = t1.last_value().expect("non-empty grid");
    let s = "simulate";
    report.number(s, "steady_state_rate", steady, "MHz", OUT);
    report.number(s, "final_rate_ms0", f0, "MHz", OUT);
    report.number(s, "final_rate_ms1", f1, "MHz", OUT);
    report.number(s, "final_relative_difference", (f0 - f1).abs() / f0, "1", OUT);

    let resonant = p.rates.with_purcell_emission(p.purcell_factor);
    let saturated = p.rates.with_saturated_emission(p.rates.k_f * p.purcell_factor);
    for (label, start, width) in [("gate", p.gate_start, p.gate_width), ("window", 0.0, p.duration)] {
        let off = gated_contrast(&p.rates, p.init, start, width)?;
        let on = gated_contrast(&resonant, p.init, start, width)?;
        let on_saturated = gated_contrast(&saturated, p.init, start, width)?;
        report.number(s, &format!("{label}_contrast_off"), off, "1", OUT);
        report.number(s, &format!("{label}_contrast_on"), on, "1", OUT);
        report.number(s, &format!("{label}_contrast_ratio"), on / off, "1", OUT);
        report.number(s, &format!("{label}_contrast_reduction"), 1.0 - on / off, "1", OUT);
        report.number(
            s,
            &format!("{label}_contrast_reduction_excitation_scaled"),
            1.0 - on_saturated / off,
            "1",
            OUT,
        );
    }
    report.number(s, "resonant_k_f", resonant.k_f, "MHz", OUT);

    let note = |what: &str| format!("{what}; simulated five-level readout, rates in MHz, time in ns");
    report.artifacts.push((
        "trace_ms0.csv".into(),
        trace_doc(&t0).with_comments(&[&note("fluorescence after m_s=0 preparation")]),
    ));
    report.artifacts.push((
        "trace_ms1.csv".into(),
        trace_doc(&t1).with_comments(&[&note("fluorescence after m_s=+-1 preparation")]),
    ));
    report.artifacts.push((
        "contrast.csv".into(),
        trace_doc(&contrast).with_comments(&[&note("contrast normalized to the steady-state rate")]),
    ));
    Ok(())
}

fn param_unit(name: &str, x: &str, y: &str) -> String {
    let base = name.trim_end_matches(|c: char| c.is_ascii_digit());
    match base {
        "center" | "fwhm" | "period" | "decay_time" | "tau" | "pi_time" => x.into(),
        "depth" => "1".into(),
        "phase" => "rad".into(),
        "area" => format!("{y}*{x}"),
        "p_sat" => "uW".into(),
        "i_inf" => "kHz".into(),
        "background_slope" => "kHz/uW".into(),
        _ => y.into(),
    }
}

fn report_fit(report: &mut Report, fit: &FitResult, x: &str, y: &str) {
    let s = "fit";
    for (name, v) in fit.params.iter() {
        let unit = param_unit(name, x, y);
        report.number(s, name, v, &unit, OUT);
        if let Some(e) = fit.stderr_of(name) {
            report.number(s, &format!("{name}_stderr"), e, &unit, OUT);
        }
    }
    for (name, v) in fit.derived.iter() {
        report.number(s, name, v, &param_unit(name, x, y), OUT);
    }
    report.number(s, "residual_norm", fit.residual_norm, y, OUT);
    report.integer(s, "iterations", fit.iterations as u64, "1", OUT);
    report.integer(s, "samples", fit.samples as u64, "1", OUT);
}

fn fit(report: &mut Report, p: FitInputs) -> Result<()> {
    match p.model.as_str() {
        "saturation" => {
            let d = load_saturation(&p.data)?;
            let r = fit_saturation(&d.power, &d.count_rate)?;
            report_fit(report, &r, "uW", "kHz");
        }
        "rabi" | "double_exponential" => {
            let t = load_trace(&p.data)?;
            let r = if p.model == "rabi" {
                fit_rabi(&t)?
            } else {
                fit_double_exponential(&t)?
            };
            report_fit(report, &r, "ns", "a.u.");
        }
        model => {
            let s = load_spectrum(&p.data)?;
            let r = match model {
                "lorentzian" => fit_lorentzian(&s)?,
                "gaussian" => fit_gaussian(&s)?,
                "gaussian_pair" => fit_gaussian_pair(&s)?,
                _ => fit_odmr(&s)?,
            };
            report_fit(report, &r, s.unit().symbol(), "a.u.");
        }
    }
    Ok(())
}

fn rates(report: &mut Report, p: RatesFitInputs) -> Result<()> {
    let t0 = load_trace(&p.trace0)?;
    let t1 = load_trace(&p.trace1)?;
    let cmp = compare_mixing_variants_with(&t0, &t1, &p.opts)?;
    let chosen = match p.opts.variant {
        MixingVariant::RadiativeMixing => &cmp.radiative,
        MixingVariant::NonRadiativeExcitedMixing => &cmp.nonradiative,
    };
    let s = "rates";
    for (name, v) in chosen.params.iter() {
        report.number(s, name, v, "MHz", OUT);
        if let Some(e) = chosen.stderr_of(name) {
            report.number(s, &format!("{name}_stderr"), e, "MHz", OUT);
        }
    }
    report.number(s, "residual_rms", chosen.rms(), "MHz", OUT);
    report.number(s, "residual_norm_radiative", cmp.radiative.residual_norm, "MHz", OUT);
    report.number(s, "residual_norm_nonradiative", cmp.nonradiative.residual_norm, "MHz", OUT);
    report.text(s, "preferred_variant", cmp.preferred().id(), OUT);
    Ok(())
}

fn spectrum(report: &mut Report, path: PathBuf) -> Result<()> {
    let s = load_spectrum(&path)?;
    let mode = ModeFit::from_spectrum(&s)?;
    let beta = beta_from_spectrum(&mode)?;
    let f = purcell_from_beta(beta)?;
    let sec = "spectrum";
    report.number(sec, "mode_center", mode.center, "nm", OUT);
    report.number(sec, "mode_fwhm", mode.fwhm, "nm", OUT);
    report.number(sec, "q_factor", mode.q_factor()?, "1", OUT);
    report.number(sec, "area_mode", mode.area_mode, "a.u.*nm", OUT);
    report.number(sec, "area_total", mode.area_total, "a.u.*nm", OUT);
    report.number(sec, "beta", beta, "1", OUT);
    report.number(sec, "purcell_from_beta", f, "1", OUT);
    report.number(sec, "total_purcell", 1.0 + f, "1", OUT);
    Ok(())
}

fn purcell(report: &mut Report, p: CavityParams) -> Result<()> {
    let pred = predict_purcell(&p)?;
    let s = "purcell";
    report.number(s, "emitter_q", p.emitter_q(), "1", OUT);
    report.number(s, "effective_q", pred.effective_q, "1", OUT);
    report.number(s, "f_zpl", pred.f_zpl, "1", OUT);
    report.number(s, "total_factor", pred.total_factor, "1", OUT);
    Ok(())
}

fn collect(report: &mut Report, p: CollectionInputs) -> Result<()> {
    let table: EfficiencyTable = load_efficiency_table(&p.table)?;
    let s = "collect";
    let uniform = DipoleWeights::uniform_ensemble().as_array();
    for (axis, k) in AXIS_NAMES.iter().zip(uniform) {
        report.number(s, &format!("uniform_average_k_{axis}"), k, "1", OUT);
    }
    let mut eff = [0.0; 2];
    for (i, (label, c)) in [("off", &p.off), ("on", &p.on)].into_iter().enumerate() {
        for (axis, f) in AXIS_NAMES.iter().zip(c.purcell) {
            report.number(s, &format!("{label}_purcell_{axis}"), f, "1", OUT);
        }
        let fractions = emission_fractions(effective_rates(1.0, &p.weights, c.purcell)?)?;
        for (axis, w) in AXIS_NAMES.iter().zip(fractions) {
            report.number(s, &format!("{label}_fraction_{axis}"), w, "1", OUT);
        }
        report.number(s, &format!("{label}_fraction_sum"), fractions.iter().sum(), "1", OUT);
        for (axis, e) in AXIS_NAMES.iter().zip(table.at(c.wavelength)?) {
            report.number(s, &format!("{label}_eps_{axis}"), e, "1", OUT);
        }
        eff[i] = collection_efficiency(&table, &p.weights, c)?;
        report.number(s, &format!("{label}_efficiency"), eff[i], "1", OUT);
    }
    report.number(s, "efficiency_ratio", eff[1] / eff[0], "1", OUT);
    Ok(())
}

fn snr(report: &mut Report, p: ScenarioInputs) -> Result<()> {
    for sc in [p.zpl, p.broadband] {
        let s = sc.mode.id();
        let ratio = photon_ratio(&sc)?;
        let zeta = enhancement(ratio, sc.contrast_ratio)?;
        let exact = enhancement_exact(ratio, sc.contrast_ratio, p.contrast_off)?;
        report.number(s, "collection_factor", sc.collection_factor, "1", OUT);
        report.number(s, "photon_ratio", ratio, "1", OUT);
        report.number(s, "zeta", zeta, "1", OUT);
        report.number(s, "zeta_exact", exact, "1", OUT);
        report.number(s, "snr_gain_percent", 100.0 * (zeta - 1.0), "%", OUT);
    }
    Ok(())
}

fn mc(report: &mut Report, p: McInputs, seed: u64) -> Result<()> {
    let r = monte_carlo(p.pair, p.trials, seed)?;
    let s = "mc";
    report.number(s, "mean_diff", r.mean_diff, "photons", OUT);
    report.number(s, "var_diff", r.var_diff, "photons^2", OUT);
    report.number(s, "empirical_snr", r.empirical_snr, "1", OUT);
    report.number(s, "expected_var_diff", p.pair.n0 + p.pair.n1, "photons^2", OUT);
    report.number(s, "expected_snr", snr_counts(p.pair)?, "1", OUT);
    Ok(())
}

fn tune(report: &mut Report, p: TuningInputs) -> Result<()> {
    let plan = tuning_plan(p.current, p.target, p.red_rate, p.blue_shift)?;
    let s = "tune";
    match plan {
        TuningPlan::GasAdsorption { exposure_hours } => {
            report.text(s, "method", "gas_adsorption", OUT);
            report.number(s, "exposure", exposure_hours, "h", OUT);
        }
        TuningPlan::Oxidation { removal_nm } => {
            report.text(s, "method", "oxidation", OUT);
            report.number(s, "material_removed", removal_nm, "nm", OUT);
        }
        TuningPlan::NoOp => report.text(s, "method", "none", OUT),
    }
    report.number(s, "predicted_mode", plan.apply(p.current, p.red_rate, p.blue_shift), "nm", OUT);
    Ok(())
}
