//! Five-level rate-equation model of the NV center under optical pumping.
//!
//! Level order used by every vector and matrix in this module:
//! ground m_s=0, ground m_s=±1, excited m_s=0, excited m_s=±1, singlet.
//! Rates are in MHz (1/µs); times passed to the public API are in ns.

mod populations;
mod propagate;
mod readout;

pub use populations::{InitMode, LevelPopulations};
pub(crate) use propagate::integrate_rk4;
pub use propagate::{
    evolve, evolve_rk4, rk4_step_size, steady_state, Propagator, EIGEN_RESIDUAL_TOL,
    MIN_RK4_STEPS,
};
pub use readout::{
    apply_pi_pulse, contrast_trace, fluorescence_rate, gated_contrast, gated_counts, initialize,
    prepared_state, readout_pair, readout_trace, SpinPrep, GATE_STEP_NS,
};

use nalgebra::Matrix5;

use crate::error::{ensure_finite, Error, Result};

pub const G0: usize = 0;
pub const G1: usize = 1;
pub const E0: usize = 2;
pub const E1: usize = 3;
pub const S: usize = 4;

pub const LEVEL_NAMES: [&str; 5] = ["b_g0", "b_g1", "b_e0", "b_e1", "b_s"];

/// Where the extra spin-mixing channels sit in the level scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixingVariant {
    /// Spin-flipping optical transitions between ground and excited triplet.
    RadiativeMixing,
    /// Non-radiative mixing between the two excited-state spin manifolds.
    NonRadiativeExcitedMixing,
}

impl MixingVariant {
    pub fn id(self) -> &'static str {
        match self {
            MixingVariant::RadiativeMixing => "radiative",
            MixingVariant::NonRadiativeExcitedMixing => "nonradiative",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "radiative" => Some(MixingVariant::RadiativeMixing),
            "nonradiative" => Some(MixingVariant::NonRadiativeExcitedMixing),
            _ => None,
        }
    }
}

/// Transition rates of the five-level model, all in MHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSet {
    /// Optical excitation, both spin manifolds.
    pub k_e: f64,
    /// Spin-conserving radiative decay.
    pub k_f: f64,
    /// Intersystem crossing, excited m_s=±1 -> singlet.
    pub k_s: f64,
    /// Singlet -> ground m_s=0.
    pub k_0: f64,
    /// Spin mixing.
    pub k_m: f64,
    pub mixing_variant: MixingVariant,
}

impl RateSet {
    pub fn new(
        k_e: f64,
        k_f: f64,
        k_s: f64,
        k_0: f64,
        k_m: f64,
        mixing_variant: MixingVariant,
    ) -> Result<Self> {
        let rates = RateSet {
            k_e,
            k_f,
            k_s,
            k_0,
            k_m,
            mixing_variant,
        };
        rates.validate()?;
        Ok(rates)
    }

    /// Rates fitted to the off-resonant cavity-coupled ensemble
    /// (K_e = K_f = 111 MHz, K_m = 1.35, K_s = 1.79, K_0 = 5.80 MHz).
    pub fn fitted_off_resonance() -> Self {
        RateSet {
            k_e: 111.0,
            k_f: 111.0,
            k_s: 1.79,
            k_0: 5.80,
            k_m: 1.35,
            mixing_variant: MixingVariant::RadiativeMixing,
        }
    }

    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("k_e", self.k_e),
            ("k_f", self.k_f),
            ("k_s", self.k_s),
            ("k_0", self.k_0),
            ("k_m", self.k_m),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.named() {
            ensure_finite(name, value)?;
            if value < 0.0 {
                return Err(Error::NegativeRate { name, value });
            }
        }
        Ok(())
    }

    /// Every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> RateSet {
        RateSet {
            k_e: self.k_e * factor,
            k_f: self.k_f * factor,
            k_s: self.k_s * factor,
            k_0: self.k_0 * factor,
            k_m: self.k_m * factor,
            mixing_variant: self.mixing_variant,
        }
    }

    pub fn with_variant(mut self, variant: MixingVariant) -> RateSet {
        self.mixing_variant = variant;
        self
    }

    /// Laser-on resonance condition K_e = K_f = `k_f`.
    pub fn with_saturated_emission(mut self, k_f: f64) -> RateSet {
        self.k_e = k_f;
        self.k_f = k_f;
        self
    }

    /// Purcell-enhanced spin-conserving emission: K_f multiplied by `factor`,
    /// excitation and all other rates unchanged.
    pub fn with_purcell_emission(mut self, factor: f64) -> RateSet {
        self.k_f *= factor;
        self
    }

    pub fn max_rate(&self) -> f64 {
        self.named().iter().fold(0.0_f64, |m, (_, v)| m.max(*v))
    }
}

/// Rate matrix M with dB/dt = M B (entries in MHz). Columns sum to zero.
///
/// Radiative variant:
/// ```text
/// dG0 = -(Ke+2Km) G0 + Kf E0 + Km E1 + K0 S
/// dG1 = -(Ke+Km) G1 + Kf E1 + 2Km E0
/// dE0 = Ke G0 - (Kf+2Km) E0 + Km G1
/// dE1 = Ke G1 - (Kf+Ks+Km) E1 + 2Km G0
/// dS  = Ks E1 - K0 S
/// ```
/// The non-radiative variant moves the mixing to E0 -> E1 (2Km) and E1 -> E0 (Km).
pub fn generator_matrix(rates: &RateSet) -> Result<Matrix5<f64>> {
    rates.validate()?;
    Ok(build_generator(rates, true))
}

/// Generator with the laser off: no excitation, including spin-flip excitation.
pub fn dark_generator_matrix(rates: &RateSet) -> Result<Matrix5<f64>> {
    rates.validate()?;
    Ok(build_generator(rates, false))
}

pub(crate) fn build_generator(rates: &RateSet, laser_on: bool) -> Matrix5<f64> {
    let mut m = Matrix5::zeros();
    // transition from -> to at `rate`: column `from` loses, row `to` gains
    let mut add = |from: usize, to: usize, rate: f64| {
        m[(to, from)] += rate;
        m[(from, from)] -= rate;
    };
    let km = rates.k_m;
    if laser_on {
        add(G0, E0, rates.k_e);
        add(G1, E1, rates.k_e);
    }
    add(E0, G0, rates.k_f);
    add(E1, G1, rates.k_f);
    add(E1, S, rates.k_s);
    add(S, G0, rates.k_0);
    match rates.mixing_variant {
        MixingVariant::RadiativeMixing => {
            if laser_on {
                add(G0, E1, 2.0 * km);
                add(G1, E0, km);
            }
            add(E0, G1, 2.0 * km);
            add(E1, G0, km);
        }
        MixingVariant::NonRadiativeExcitedMixing => {
            add(E0, E1, 2.0 * km);
            add(E1, E0, km);
        }
    }
    m
}

/// Derivative of the laser-on generator with respect to one named rate.
pub(crate) fn generator_derivative(variant: MixingVariant, rate: RateName) -> Matrix5<f64> {
    let mut unit = RateSet {
        k_e: 0.0,
        k_f: 0.0,
        k_s: 0.0,
        k_0: 0.0,
        k_m: 0.0,
        mixing_variant: variant,
    };
    match rate {
        RateName::KS => unit.k_s = 1.0,
        RateName::K0 => unit.k_0 = 1.0,
        RateName::KM => unit.k_m = 1.0,
    }
    build_generator(&unit, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RateName {
    KS,
    K0,
    KM,
}
