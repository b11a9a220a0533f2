//! Cavity-mode analytics: Q, β*, Purcell factors and mode tuning.

use std::f64::consts::PI;

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::fitkit::fit_lorentzian;
use crate::series::{AbscissaUnit, Spectrum};

/// Speed of light in nm·GHz, so that ν[GHz] = C / λ[nm].
pub const SPEED_OF_LIGHT_NM_GHZ: f64 = 299_792_458.0;
/// Red shift under light-assisted gas adsorption at 1.5 mW, nm per hour.
pub const ADSORPTION_RED_SHIFT_NM_PER_H: f64 = 1.8;
/// Blue shift per nm of diamond removed by oxidation (12 nm for 5 nm).
pub const OXIDATION_BLUE_SHIFT_PER_NM: f64 = 12.0 / 5.0;

/// Linewidth conversion Δν = c·Δλ/λ².
pub fn fwhm_nm_to_ghz(center_nm: f64, fwhm_nm: f64) -> Result<f64> {
    ensure_positive("center", center_nm)?;
    ensure_positive("fwhm", fwhm_nm)?;
    Ok(SPEED_OF_LIGHT_NM_GHZ * fwhm_nm / (center_nm * center_nm))
}

pub fn fwhm_ghz_to_nm(center_nm: f64, fwhm_ghz: f64) -> Result<f64> {
    ensure_positive("center", center_nm)?;
    ensure_positive("fwhm", fwhm_ghz)?;
    Ok(fwhm_ghz * center_nm * center_nm / SPEED_OF_LIGHT_NM_GHZ)
}

/// Q = center / fwhm.
pub fn q_factor(center: f64, fwhm: f64) -> Result<f64> {
    ensure_positive("center", center)?;
    ensure_positive("fwhm", fwhm)?;
    if fwhm >= center {
        return Err(Error::invalid(format!(
            "linewidth {fwhm} must be narrower than the line position {center}"
        )));
    }
    Ok(center / fwhm)
}

/// Fitted cavity mode together with the total integrated spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeFit {
    pub center: f64,
    pub fwhm: f64,
    pub area_mode: f64,
    pub area_total: f64,
}

impl ModeFit {
    pub fn new(center: f64, fwhm: f64, area_mode: f64, area_total: f64) -> Result<Self> {
        ensure_finite("center", center)?;
        ensure_positive("fwhm", fwhm)?;
        ensure_positive("area_mode", area_mode)?;
        ensure_finite("area_total", area_total)?;
        if area_mode > area_total {
            return Err(Error::invariant(
                "area_mode",
                format!("mode area {area_mode} exceeds the total {area_total}"),
            ));
        }
        Ok(ModeFit {
            center,
            fwhm,
            area_mode,
            area_total,
        })
    }

    /// Lorentzian mode area against the trapezoid area under the whole
    /// background-inclusive spectrum (nm abscissa).
    pub fn from_spectrum(s: &Spectrum) -> Result<Self> {
        if s.unit() != AbscissaUnit::Nanometer {
            return Err(Error::invalid(format!(
                "mode spectra are expected in nm, got {}",
                s.unit().symbol()
            )));
        }
        let fit = fit_lorentzian(s)?;
        ModeFit::new(
            fit.param("center"),
            fit.param("fwhm"),
            fit.param("area"),
            s.integrated_area(),
        )
    }

    pub fn q_factor(&self) -> Result<f64> {
        q_factor(self.center, self.fwhm)
    }
}

/// β* = area_mode / area_total.
pub fn beta_from_spectrum(fit: &ModeFit) -> Result<f64> {
    let checked = ModeFit::new(fit.center, fit.fwhm, fit.area_mode, fit.area_total)?;
    Ok(checked.area_mode / checked.area_total)
}

/// F* = β/(1−β) for β ∈ [0, 1).
pub fn purcell_from_beta(beta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidProbability(format!("beta = {beta} outside [0, 1)")));
    }
    Ok(beta / (1.0 - beta))
}

/// β = F*/(1+F*) for F* ≥ 0.
pub fn beta_from_purcell(purcell: f64) -> Result<f64> {
    ensure_finite("purcell", purcell)?;
    if purcell < 0.0 {
        return Err(Error::invalid(format!("Purcell factor {purcell} is negative")));
    }
    Ok(purcell / (1.0 + purcell))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    pub q_factor: f64,
    /// In units of (λ/n)³.
    pub mode_volume: f64,
    /// nm.
    pub wavelength: f64,
    /// Enters only through the mode-volume unit.
    pub refractive_index: f64,
    /// Emitter linewidth, GHz.
    pub emitter_fwhm: f64,
    /// Debye-Waller factor ξ.
    pub zpl_fraction: f64,
}

impl CavityParams {
    /// Tuned-cavity inputs: Q = 2021, V = 0.35 (λ/n)³, ZPL at 637.4 nm with
    /// 360 GHz width, ξ = 2.1 %, diamond n = 2.41.
    pub fn tuned_cavity() -> Self {
        CavityParams {
            q_factor: 2021.0,
            mode_volume: 0.35,
            wavelength: 637.4,
            refractive_index: 2.41,
            emitter_fwhm: 360.0,
            zpl_fraction: 0.021,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("q_factor", self.q_factor)?;
        ensure_positive("mode_volume", self.mode_volume)?;
        ensure_positive("wavelength", self.wavelength)?;
        ensure_positive("refractive_index", self.refractive_index)?;
        ensure_positive("emitter_fwhm", self.emitter_fwhm)?;
        ensure_finite("zpl_fraction", self.zpl_fraction)?;
        if !(self.zpl_fraction > 0.0 && self.zpl_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "zpl_fraction {} outside (0, 1)",
                self.zpl_fraction
            )));
        }
        Ok(())
    }

    /// Q of the emitter line, ν / Δν.
    pub fn emitter_q(&self) -> f64 {
        SPEED_OF_LIGHT_NM_GHZ / self.wavelength / self.emitter_fwhm
    }

    /// 1/Q_eff = 1/Q_cav + 1/Q_em.
    pub fn effective_q(&self) -> f64 {
        1.0 / (1.0 / self.q_factor + 1.0 / self.emitter_q())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurcellPrediction {
    pub effective_q: f64,
    /// Purcell factor of the ZPL transition, (3/4π²)·Q_eff/V.
    pub f_zpl: f64,
    /// Lifetime shortening 1 + ξ(f_zpl − 1).
    pub total_factor: f64,
}

pub fn predict_purcell(p: &CavityParams) -> Result<PurcellPrediction> {
    p.validate()?;
    let effective_q = p.effective_q();
    let f_zpl = 3.0 / (4.0 * PI * PI) * effective_q / p.mode_volume;
    Ok(PurcellPrediction {
        effective_q,
        f_zpl,
        total_factor: 1.0 + p.zpl_fraction * (f_zpl - 1.0),
    })
}

/// τ_off / τ_on.
pub fn lifetime_ratio(tau_off: f64, tau_on: f64) -> Result<f64> {
    ensure_positive("tau_off", tau_off)?;
    ensure_positive("tau_on", tau_on)?;
    Ok(tau_off / tau_on)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuningDirection {
    Red,
    Blue,
    None,
}

/// Linear tuning recipe towards a target mode position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TuningPlan {
    /// Light-assisted gas adsorption for this many hours.
    GasAdsorption { exposure_hours: f64 },
    /// Oxidation removing this many nm of diamond.
    Oxidation { removal_nm: f64 },
    NoOp,
}

impl TuningPlan {
    pub fn direction(&self) -> TuningDirection {
        match self {
            TuningPlan::GasAdsorption { .. } => TuningDirection::Red,
            TuningPlan::Oxidation { .. } => TuningDirection::Blue,
            TuningPlan::NoOp => TuningDirection::None,
        }
    }

    /// Mode position after executing the plan under the linear model.
    pub fn apply(&self, current: f64, red_rate: f64, blue_sensitivity: f64) -> f64 {
        match *self {
            TuningPlan::GasAdsorption { exposure_hours } => current + exposure_hours * red_rate,
            TuningPlan::Oxidation { removal_nm } => current - removal_nm * blue_sensitivity,
            TuningPlan::NoOp => current,
        }
    }
}

/// Plan moving a mode from `current` to `target` (nm): red shifts at
/// `red_rate` nm/h, blue shifts by `blue_sensitivity` nm per nm removed.
pub fn tuning_plan(
    current: f64,
    target: f64,
    red_rate: f64,
    blue_sensitivity: f64,
) -> Result<TuningPlan> {
    ensure_positive("current", current)?;
    ensure_positive("target", target)?;
    ensure_positive("red_rate", red_rate)?;
    ensure_positive("blue_sensitivity", blue_sensitivity)?;
    Ok(if target > current {
        TuningPlan::GasAdsorption {
            exposure_hours: (target - current) / red_rate,
        }
    } else if target < current {
        TuningPlan::Oxidation {
            removal_nm: (current - target) / blue_sensitivity,
        }
    } else {
        TuningPlan::NoOp
    })
}
