use nalgebra::Vector5;

use super::{E0, E1, G0, G1, LEVEL_NAMES, S};
use crate::error::{Error, Result};

/// Slack allowed on the probability simplex for accumulated rounding.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Occupation probabilities of the five levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelPopulations(Vector5<f64>);

impl LevelPopulations {
    pub fn new(b_g0: f64, b_g1: f64, b_e0: f64, b_e1: f64, b_s: f64) -> Result<Self> {
        Self::from_vector(Vector5::new(b_g0, b_g1, b_e0, b_e1, b_s))
    }

    pub fn from_vector(v: Vector5<f64>) -> Result<Self> {
        for (name, x) in LEVEL_NAMES.iter().zip(v.iter()) {
            if !x.is_finite() || *x < -SIMPLEX_TOL || *x > 1.0 + SIMPLEX_TOL {
                return Err(Error::InvalidProbability(format!("{name} = {x}")));
            }
        }
        let sum = v.sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidProbability(format!(
                "populations sum to {sum}, expected 1"
            )));
        }
        Ok(LevelPopulations(v))
    }

    /// All population in the m_s=0 ground state.
    pub fn ground_ms0() -> Self {
        LevelPopulations(Vector5::new(1.0, 0.0, 0.0, 0.0, 0.0))
    }

    pub fn as_vector(&self) -> &Vector5<f64> {
        &self.0
    }

    pub fn b_g0(&self) -> f64 {
        self.0[G0]
    }
    pub fn b_g1(&self) -> f64 {
        self.0[G1]
    }
    pub fn b_e0(&self) -> f64 {
        self.0[E0]
    }
    pub fn b_e1(&self) -> f64 {
        self.0[E1]
    }
    pub fn b_s(&self) -> f64 {
        self.0[S]
    }

    pub fn sum(&self) -> f64 {
        self.0.sum()
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.0[0], self.0[1], self.0[2], self.0[3], self.0[4]]
    }
}

/// How the spin is prepared before a readout pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    /// Everything in the m_s=0 ground state.
    Ideal,
    /// Probability `p` in ground m_s=0, the rest in ground m_s=±1.
    Polarized(f64),
    /// Laser pulse of `pump_duration` ns starting from the unpolarized
    /// ground state, then `dark_wait` ns with the laser off.
    Pumped { pump_duration: f64, dark_wait: f64 },
}

impl InitMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InitMode::Ideal => Ok(()),
            InitMode::Polarized(p) => {
                if (0.0..=1.0).contains(&p) {
                    Ok(())
                } else {
                    Err(Error::InvalidProbability(format!("polarization p = {p}")))
                }
            }
            InitMode::Pumped {
                pump_duration,
                dark_wait,
            } => {
                if pump_duration.is_finite()
                    && dark_wait.is_finite()
                    && pump_duration >= 0.0
                    && dark_wait >= 0.0
                {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "pump durations must be finite and >= 0, got {pump_duration} / {dark_wait}"
                    )))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_off_simplex() {
        assert!(LevelPopulations::new(0.5, 0.6, 0.0, 0.0, 0.0).is_err());
        assert!(LevelPopulations::new(1.2, -0.2, 0.0, 0.0, 0.0).is_err());
        assert!(LevelPopulations::new(f64::NAN, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(LevelPopulations::new(0.2, 0.2, 0.2, 0.2, 0.2).is_ok());
    }

    #[test]
    fn init_mode_validation() {
        assert!(InitMode::Polarized(1.5).validate().is_err());
        assert!(InitMode::Polarized(0.8).validate().is_ok());
        assert!(InitMode::Pumped {
            pump_duration: -1.0,
            dark_wait: 0.0
        }
        .validate()
        .is_err());
    }
}
