use nalgebra::Vector5;

use super::propagate::{evolve_dark, Propagator};
use super::{InitMode, LevelPopulations, MixingVariant, RateSet, E0, E1, G0, G1};
use crate::error::{ensure_finite, Error, Result};
use crate::series::{trapezoid, TimeTrace};

/// Spin state prepared before the readout pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinPrep {
    Ms0,
    /// Initialization followed by a π-pulse.
    Ms1,
}

/// Largest integration step used by [`gated_contrast`], in ns.
pub const GATE_STEP_NS: f64 = 1.0;

pub fn initialize(mode: InitMode, rates: &RateSet) -> Result<LevelPopulations> {
    mode.validate()?;
    match mode {
        InitMode::Ideal => Ok(LevelPopulations::ground_ms0()),
        InitMode::Polarized(p) => LevelPopulations::new(p, 1.0 - p, 0.0, 0.0, 0.0),
        InitMode::Pumped {
            pump_duration,
            dark_wait,
        } => {
            // thermal start: the m_s=±1 level carries two of three sublevels
            let unpolarized = Vector5::new(1.0 / 3.0, 2.0 / 3.0, 0.0, 0.0, 0.0);
            let pumped = Propagator::new(rates)?.propagate(&unpolarized, pump_duration);
            let relaxed = evolve_dark(&pumped, rates, dark_wait)?;
            let clamped = relaxed.map(|x| x.max(0.0));
            LevelPopulations::from_vector(clamped / clamped.sum())
        }
    }
}

/// Ideal instantaneous π-pulse: swaps the two ground-state populations.
pub fn apply_pi_pulse(pop: &LevelPopulations) -> LevelPopulations {
    let mut v = *pop.as_vector();
    v.swap_rows(G0, G1);
    LevelPopulations::from_vector(v).expect("permutation of a valid population stays valid")
}

/// Photon emission rate in MHz.
///
/// Counts spin-conserving decay K_f (b_e0 + b_e1); with `include_mixing_photons`
/// the radiative spin-flip decay 2K_m b_e0 + K_m b_e1 is added.
pub fn fluorescence_rate(
    pop: &LevelPopulations,
    rates: &RateSet,
    include_mixing_photons: bool,
) -> Result<f64> {
    rates.validate()?;
    emission(pop.as_vector(), rates, include_mixing_photons)
}

pub(crate) fn emission(v: &Vector5<f64>, rates: &RateSet, include_mixing: bool) -> Result<f64> {
    let mut rate = rates.k_f * (v[E0] + v[E1]);
    if include_mixing {
        if rates.mixing_variant != MixingVariant::RadiativeMixing {
            return Err(Error::InvalidCombination(
                "mixing photons only exist for radiative spin mixing".into(),
            ));
        }
        rate += rates.k_m * (2.0 * v[E0] + v[E1]);
    }
    Ok(rate)
}

/// Prepared starting populations for a readout of the given spin state.
pub fn prepared_state(
    rates: &RateSet,
    init: InitMode,
    prep: SpinPrep,
) -> Result<LevelPopulations> {
    let p = initialize(init, rates)?;
    Ok(match prep {
        SpinPrep::Ms0 => p,
        SpinPrep::Ms1 => apply_pi_pulse(&p),
    })
}

/// Readout sampling grid: 0, step, 2·step, ... and always `duration` last.
pub(crate) fn sample_grid(duration: f64, step: f64) -> Result<Vec<f64>> {
    ensure_finite("duration", duration)?;
    ensure_finite("step", step)?;
    if duration <= 0.0 || step <= 0.0 || step > duration {
        return Err(Error::invalid(format!(
            "need 0 < step <= duration, got step {step} ns, duration {duration} ns"
        )));
    }
    let mut times = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * step;
        if t >= duration * (1.0 - 1e-12) {
            break;
        }
        times.push(t);
        k += 1;
    }
    times.push(duration);
    Ok(times)
}

/// Time-resolved fluorescence (MHz) under continuous laser after preparation.
pub fn readout_trace(
    rates: &RateSet,
    prep: SpinPrep,
    init: InitMode,
    duration: f64,
    step: f64,
) -> Result<TimeTrace> {
    let times = sample_grid(duration, step)?;
    let prop = Propagator::new(rates)?;
    let start = prepared_state(rates, init, prep)?;
    trace_on_grid(&prop, rates, &start, times)
}

/// Both prepared-state traces on one grid, sharing a single decomposition.
pub fn readout_pair(
    rates: &RateSet,
    init: InitMode,
    duration: f64,
    step: f64,
) -> Result<(TimeTrace, TimeTrace)> {
    let times = sample_grid(duration, step)?;
    let prop = Propagator::new(rates)?;
    let s0 = prepared_state(rates, init, SpinPrep::Ms0)?;
    let s1 = apply_pi_pulse(&s0);
    Ok((
        trace_on_grid(&prop, rates, &s0, times.clone())?,
        trace_on_grid(&prop, rates, &s1, times)?,
    ))
}

fn trace_on_grid(
    prop: &Propagator,
    rates: &RateSet,
    start: &LevelPopulations,
    times: Vec<f64>,
) -> Result<TimeTrace> {
    let coeffs = prop.coefficients(start.as_vector());
    let values = times
        .iter()
        .map(|&t| {
            let v = if t == 0.0 {
                *start.as_vector()
            } else {
                prop.state_at(&coeffs, t)
            };
            emission(&v, rates, false)
        })
        .collect::<Result<Vec<_>>>()?;
    TimeTrace::new(times, values)
}

/// C(t) = (S0(t) − S1(t)) / normalization, normally the steady-state signal.
pub fn contrast_trace(
    trace0: &TimeTrace,
    trace1: &TimeTrace,
    normalization: f64,
) -> Result<TimeTrace> {
    if !trace0.same_grid(trace1) {
        return Err(Error::DimensionMismatch(
            "contrast needs both traces on the same time grid".into(),
        ));
    }
    if !(normalization.is_finite() && normalization > 0.0) {
        return Err(Error::InvalidProbability(format!(
            "contrast normalization must be > 0, got {normalization}"
        )));
    }
    let values = trace0
        .values()
        .iter()
        .zip(trace1.values())
        .map(|(a, b)| (a - b) / normalization)
        .collect();
    TimeTrace::new(trace0.times().to_vec(), values)
}

/// Photons emitted (∫ rate dt) by the m_s=0 and m_s=±1 preparations inside a gate.
pub fn gated_counts(
    rates: &RateSet,
    init: InitMode,
    gate_start: f64,
    gate_width: f64,
) -> Result<(f64, f64)> {
    ensure_finite("gate_start", gate_start)?;
    ensure_finite("gate_width", gate_width)?;
    if gate_start < 0.0 || gate_width <= 0.0 {
        return Err(Error::invalid(format!(
            "gate needs start >= 0 and width > 0, got {gate_start} / {gate_width} ns"
        )));
    }
    let n = (gate_width / GATE_STEP_NS).ceil().max(1.0) as usize;
    let times: Vec<f64> = (0..=n)
        .map(|k| gate_start + gate_width * k as f64 / n as f64)
        .collect();
    let prop = Propagator::new(rates)?;
    let s0 = prepared_state(rates, init, SpinPrep::Ms0)?;
    let s1 = apply_pi_pulse(&s0);
    let counts = |start: &LevelPopulations| -> Result<f64> {
        let trace = trace_on_grid(&prop, rates, start, times.clone())?;
        // MHz · ns -> photons
        Ok(trapezoid(trace.times(), trace.values()) * 1e-3)
    };
    Ok((counts(&s0)?, counts(&s1)?))
}

/// Gated spin contrast C = (N0 − N1) / N0.
pub fn gated_contrast(
    rates: &RateSet,
    init: InitMode,
    gate_start: f64,
    gate_width: f64,
) -> Result<f64> {
    let (n0, n1) = gated_counts(rates, init, gate_start, gate_width)?;
    if n0 <= 0.0 {
        return Err(Error::invalid("no photons from the m_s=0 preparation in the gate"));
    }
    Ok((n0 - n1) / n0)
}
