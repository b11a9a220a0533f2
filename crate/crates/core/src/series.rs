//! Sampled data containers shared by the simulation and fitting code.

use crate::error::{Error, Result};

/// Time series on a strictly increasing grid. Times are in nanoseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeTrace {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} times vs {} values",
                times.len(),
                values.len()
            )));
        }
        check_increasing("time_ns", &times)?;
        check_finite("signal", &values)?;
        Ok(TimeTrace { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_value(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// Same grid, transformed values.
    pub fn map_values(&self, f: impl Fn(f64, f64) -> f64) -> Result<TimeTrace> {
        let values = self
            .times
            .iter()
            .zip(&self.values)
            .map(|(&t, &v)| f(t, v))
            .collect();
        TimeTrace::new(self.times.clone(), values)
    }

    pub fn same_grid(&self, other: &TimeTrace) -> bool {
        self.times == other.times
    }
}

/// Physical unit of a spectrum's abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbscissaUnit {
    Nanometer,
    Picometer,
    Gigahertz,
}

impl AbscissaUnit {
    pub fn column_name(self) -> &'static str {
        match self {
            AbscissaUnit::Nanometer => "wavelength_nm",
            AbscissaUnit::Picometer => "wavelength_pm",
            AbscissaUnit::Gigahertz => "frequency_ghz",
        }
    }

    pub fn from_column_name(name: &str) -> Option<Self> {
        match name {
            "wavelength_nm" => Some(AbscissaUnit::Nanometer),
            "wavelength_pm" => Some(AbscissaUnit::Picometer),
            "frequency_ghz" => Some(AbscissaUnit::Gigahertz),
            _ => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            AbscissaUnit::Nanometer => "nm",
            AbscissaUnit::Picometer => "pm",
            AbscissaUnit::Gigahertz => "GHz",
        }
    }
}

/// Minimum number of samples a spectrum must carry.
pub const MIN_SPECTRUM_LEN: usize = 4;

/// Intensity samples over a unit-tagged, strictly increasing abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    unit: AbscissaUnit,
    abscissa: Vec<f64>,
    intensity: Vec<f64>,
}

impl Spectrum {
    pub fn new(unit: AbscissaUnit, abscissa: Vec<f64>, intensity: Vec<f64>) -> Result<Self> {
        if abscissa.len() != intensity.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} abscissa values vs {} intensities",
                abscissa.len(),
                intensity.len()
            )));
        }
        if abscissa.len() < MIN_SPECTRUM_LEN {
            return Err(Error::invariant(
                "abscissa",
                format!("need at least {MIN_SPECTRUM_LEN} samples, got {}", abscissa.len()),
            ));
        }
        check_increasing(unit.column_name(), &abscissa)?;
        check_finite("intensity", &intensity)?;
        Ok(Spectrum {
            unit,
            abscissa,
            intensity,
        })
    }

    pub fn unit(&self) -> AbscissaUnit {
        self.unit
    }

    pub fn abscissa(&self) -> &[f64] {
        &self.abscissa
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }

    /// Multiplies the abscissa by `factor` and retags it, e.g. nm -> pm with 1000.
    pub fn rescaled(&self, factor: f64, unit: AbscissaUnit) -> Result<Spectrum> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::invalid(format!("rescale factor must be > 0, got {factor}")));
        }
        Spectrum::new(
            unit,
            self.abscissa.iter().map(|x| x * factor).collect(),
            self.intensity.clone(),
        )
    }

    /// Trapezoid integral of the intensity over the sampled range.
    pub fn integrated_area(&self) -> f64 {
        trapezoid(&self.abscissa, &self.intensity)
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

fn check_increasing(field: &str, xs: &[f64]) -> Result<()> {
    for (i, x) in xs.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::invariant(field, format!("row {}: non-finite value {x}", i + 1)));
        }
    }
    for (i, w) in xs.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::invariant(
                field,
                format!(
                    "row {}: not strictly increasing ({} after {})",
                    i + 2,
                    w[1],
                    w[0]
                ),
            ));
        }
    }
    Ok(())
}

fn check_finite(field: &str, ys: &[f64]) -> Result<()> {
    match ys.iter().position(|y| !y.is_finite()) {
        Some(i) => Err(Error::invariant(
            field,
            format!("row {}: non-finite value {}", i + 1, ys[i]),
        )),
        None => Ok(()),
    }
}
