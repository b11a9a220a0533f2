//! Joint fit of the two prepared-state fluorescence traces to the five-level model.

use nalgebra::{DMatrix, DVector, Vector5};

use super::curves::noise_sigma;
use super::engine::{
    central_difference_jacobian, minimize, FitResult, LeastSquaresProblem, LmSettings,
};
use crate::error::{ensure_positive, Error, Result};
use crate::levels::{
    build_generator, generator_derivative, initialize, integrate_rk4, InitMode, MixingVariant, Propagator,
    RateName, RateSet, E0, E1, G0, G1,
};
use crate::series::TimeTrace;

pub const RATE_PARAMS: [&str; 3] = ["k_0", "k_s", "k_m"];
const RATE_NAMES: [RateName; 3] = [RateName::K0, RateName::KS, RateName::KM];

/// Seed grid (MHz) for the free rates; each axis is roughly log-spaced.
const SEED_K0: [f64; 5] = [0.5, 1.5, 5.0, 15.0, 50.0];
const SEED_KS: [f64; 5] = [0.2, 0.6, 2.0, 6.0, 20.0];
const SEED_KM: [f64; 5] = [0.2, 0.6, 2.0, 6.0, 20.0];
const REFINED_SEEDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatesFitOptions {
    /// Fixed spin-conserving decay rate; the excitation rate is set equal to it.
    pub k_f: f64,
    pub variant: MixingVariant,
    pub init: InitMode,
}

impl RatesFitOptions {
    pub fn new(k_f: f64) -> Self {
        RatesFitOptions {
            k_f,
            variant: MixingVariant::RadiativeMixing,
            init: InitMode::Ideal,
        }
    }
}

/// Residuals of both traces (fluorescence in MHz) against the model.
struct RatesProblem<'a> {
    times: &'a [f64],
    y0: &'a [f64],
    y1: &'a [f64],
    opts: RatesFitOptions,
}

impl RatesProblem<'_> {
    fn rates(&self, p: &[f64]) -> RateSet {
        RateSet {
            k_e: self.opts.k_f,
            k_f: self.opts.k_f,
            k_s: p[1],
            k_0: p[0],
            k_m: p[2],
            mixing_variant: self.opts.variant,
        }
    }

    fn starts(&self, rates: &RateSet) -> Result<[Vector5<f64>; 2]> {
        let s0 = *initialize(self.opts.init, rates)?.as_vector();
        let mut s1 = s0;
        s1.swap_rows(G0, G1);
        Ok([s0, s1])
    }

    fn signal(&self, v: &Vector5<f64>) -> f64 {
        self.opts.k_f * (v[E0] + v[E1])
    }

    /// Model traces by stepping the integrator across the grid.
    fn model_rk4(&self, rates: &RateSet) -> Result<[Vec<f64>; 2]> {
        let m = build_generator(rates, true);
        let mut out = [Vec::new(), Vec::new()];
        for (k, start) in self.starts(rates)?.into_iter().enumerate() {
            let mut state = start;
            let mut now = 0.0;
            for &t in self.times {
                state = integrate_rk4(&m, &state, t - now);
                now = t;
                out[k].push(self.signal(&state));
            }
        }
        Ok(out)
    }

    fn model(&self, rates: &RateSet) -> Result<[Vec<f64>; 2]> {
        let prop = match Propagator::new(rates) {
            Ok(p) => p,
            Err(Error::NotConverged(_)) => return self.model_rk4(rates),
            Err(e) => return Err(e),
        };
        let mut out = [Vec::new(), Vec::new()];
        for (k, start) in self.starts(rates)?.into_iter().enumerate() {
            let coeffs = prop.coefficients(&start);
            out[k] = self
                .times
                .iter()
                .map(|&t| {
                    if t == 0.0 {
                        self.signal(&start)
                    } else {
                        self.signal(&prop.state_at(&coeffs, t))
                    }
                })
                .collect();
        }
        Ok(out)
    }

    fn analytic(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let rates = self.rates(p);
        let prop = Propagator::new(&rates)?;
        let n = self.times.len();
        let mut jac = DMatrix::zeros(2 * n, 3);
        let starts = self.starts(&rates)?;
        for (j, name) in RATE_NAMES.iter().enumerate() {
            let dm = prop.to_eigenbasis(&generator_derivative(self.opts.variant, *name));
            for (k, start) in starts.iter().enumerate() {
                let coeffs = prop.coefficients(start);
                for (i, &t) in self.times.iter().enumerate() {
                    let d = prop.sensitivity(&coeffs, &dm, t);
                    jac[(k * n + i, j)] = self.signal(&d);
                }
            }
        }
        Ok(jac)
    }
}

impl LeastSquaresProblem for RatesProblem<'_> {
    fn param_names(&self) -> Vec<String> {
        RATE_PARAMS.iter().map(|s| s.to_string()).collect()
    }

    fn residual_count(&self) -> usize {
        2 * self.times.len()
    }

    fn residuals(&self, p: &[f64]) -> Result<DVector<f64>> {
        let [m0, m1] = self.model(&self.rates(p))?;
        let r = m0
            .iter()
            .zip(self.y0)
            .chain(m1.iter().zip(self.y1))
            .map(|(m, y)| m - y);
        Ok(DVector::from_iterator(self.residual_count(), r))
    }

    fn analytic_jacobian(&self, p: &[f64]) -> Option<Result<DMatrix<f64>>> {
        // the pumped start depends on the rates, which the sensitivity omits
        if matches!(self.opts.init, InitMode::Pumped { .. }) {
            return None;
        }
        Some(match self.analytic(p) {
            Err(Error::NotConverged(_)) => central_difference_jacobian(self, p, 1e-6),
            other => other,
        })
    }

    fn feasible(&self, p: &[f64]) -> bool {
        p.iter().all(|v| v.is_finite() && *v > 0.0)
    }
}

fn check_traces(trace0: &TimeTrace, trace1: &TimeTrace) -> Result<()> {
    if !trace0.same_grid(trace1) {
        return Err(Error::DimensionMismatch(
            "the two readout traces must share a time grid".into(),
        ));
    }
    if let Some(t) = trace0.times().first() {
        if *t < 0.0 {
            return Err(Error::invalid(format!("readout time {t} ns precedes the pulse")));
        }
    }
    if trace0.len() < 2 * RATE_PARAMS.len() {
        return Err(Error::invalid("too few samples for a rate fit"));
    }
    let diff: Vec<f64> = trace0
        .values()
        .iter()
        .zip(trace1.values())
        .map(|(a, b)| a - b)
        .collect();
    let total: f64 = diff.iter().sum();
    let floor = 3.0 * noise_sigma(&diff) * (diff.len() as f64).sqrt();
    if total.abs() <= floor {
        return Err(Error::IllConditioned(
            "traces carry no spin contrast to constrain the rates".into(),
        ));
    }
    Ok(())
}

/// Fits K_0, K_s and K_m (MHz) to both prepared-state traces with K_e = K_f = `k_f_fixed`,
/// radiative spin mixing and ideal initialization.
pub fn fit_rates(trace0: &TimeTrace, trace1: &TimeTrace, k_f_fixed: f64) -> Result<FitResult> {
    fit_rates_with(trace0, trace1, &RatesFitOptions::new(k_f_fixed))
}

pub fn fit_rates_with(
    trace0: &TimeTrace,
    trace1: &TimeTrace,
    opts: &RatesFitOptions,
) -> Result<FitResult> {
    ensure_positive("k_f", opts.k_f)?;
    opts.init.validate()?;
    check_traces(trace0, trace1)?;
    let problem = RatesProblem {
        times: trace0.times(),
        y0: trace0.values(),
        y1: trace1.values(),
        opts: *opts,
    };

    let mut scored: Vec<(f64, [f64; 3])> = Vec::new();
    for k0 in SEED_K0 {
        for ks in SEED_KS {
            for km in SEED_KM {
                let p = [k0, ks, km];
                if let Ok(r) = problem.residuals(&p) {
                    let c = r.norm_squared();
                    if c.is_finite() {
                        scored.push((c, p));
                    }
                }
            }
        }
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));

    let settings = LmSettings::default();
    let mut best: Option<FitResult> = None;
    let mut last_err = None;
    for (_, seed) in scored.iter().take(REFINED_SEEDS) {
        match minimize(&problem, seed, &settings) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.residual_norm < b.residual_norm) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some(fit), _) => Ok(fit),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::NotConverged("no admissible seed rates".into())),
    }
}

/// Rate fits of the same traces under both spin-mixing channels.
#[derive(Debug, Clone)]
pub struct MixingComparison {
    pub radiative: FitResult,
    pub nonradiative: FitResult,
}

impl MixingComparison {
    /// Variant with the smaller residual norm.
    pub fn preferred(&self) -> MixingVariant {
        if self.radiative.residual_norm <= self.nonradiative.residual_norm {
            MixingVariant::RadiativeMixing
        } else {
            MixingVariant::NonRadiativeExcitedMixing
        }
    }
}

pub fn compare_mixing_variants(
    trace0: &TimeTrace,
    trace1: &TimeTrace,
    k_f_fixed: f64,
) -> Result<MixingComparison> {
    compare_mixing_variants_with(trace0, trace1, &RatesFitOptions::new(k_f_fixed))
}

/// As [`compare_mixing_variants`]; `opts.variant` is ignored.
pub fn compare_mixing_variants_with(
    trace0: &TimeTrace,
    trace1: &TimeTrace,
    opts: &RatesFitOptions,
) -> Result<MixingComparison> {
    let with = |variant| RatesFitOptions { variant, ..*opts };
    Ok(MixingComparison {
        radiative: fit_rates_with(trace0, trace1, &with(MixingVariant::RadiativeMixing))?,
        nonradiative: fit_rates_with(
            trace0,
            trace1,
            &with(MixingVariant::NonRadiativeExcitedMixing),
        )?,
    })
}

/// Worst column-wise relative discrepancy of the analytic rate Jacobian; test support.
pub fn rates_jacobian_discrepancy(
    trace0: &TimeTrace,
    trace1: &TimeTrace,
    opts: &RatesFitOptions,
    params: [f64; 3],
) -> Result<f64> {
    let problem = RatesProblem {
        times: trace0.times(),
        y0: trace0.values(),
        y1: trace1.values(),
        opts: *opts,
    };
    super::engine::jacobian_discrepancy(&problem, &params, 1e-6)
}
