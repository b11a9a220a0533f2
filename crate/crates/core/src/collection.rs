//! Dipole-orientation weighting of per-axis emission and collection efficiency.

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Per-axis values in x, y, z order (x, y in the membrane plane).
pub type Axes = [f64; 3];

pub const AXIS_NAMES: [&str; 3] = ["x", "y", "z"];
/// Tolerance on Σk = 1.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Projection of the averaged emission dipole onto the three axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleWeights {
    pub k_x: f64,
    pub k_y: f64,
    pub k_z: f64,
}

impl DipoleWeights {
    pub fn new(k_x: f64, k_y: f64, k_z: f64) -> Result<Self> {
        for (name, k) in [("k_x", k_x), ("k_y", k_y), ("k_z", k_z)] {
            ensure_finite(name, k)?;
            if k < 0.0 {
                return Err(Error::invalid(format!("dipole weight {name} = {k} is negative")));
            }
        }
        let sum = k_x + k_y + k_z;
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("dipole weights sum to {sum}, not 1")));
        }
        Ok(DipoleWeights { k_x, k_y, k_z })
    }

    /// Measured projections for (001) diamond: 24 % on x and y, 52 % on z.
    pub fn membrane_001() -> Self {
        DipoleWeights {
            k_x: 0.24,
            k_y: 0.24,
            k_z: 0.52,
        }
    }

    /// Intensity weights ⟨d_i²⟩ of a dipole uniformly distributed in the
    /// plane perpendicular to `axis`: (1 − n_i²)/2 with n the unit axis.
    pub fn in_plane_average(axis: Axes) -> Result<Self> {
        let norm = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("dipole plane normal must be a nonzero finite vector"));
        }
        let w = axis.map(|v| (1.0 - (v / norm).powi(2)) / 2.0);
        DipoleWeights::new(w[0], w[1], w[2])
    }

    /// Average of [`in_plane_average`](Self::in_plane_average) over the four
    /// ⟨111⟩ orientations, with x, y, z along the cubic axes.
    pub fn uniform_ensemble() -> Self {
        let axes = [[1.0, 1.0, 1.0], [-1.0, 1.0, 1.0], [1.0, -1.0, 1.0], [1.0, 1.0, -1.0]];
        let mut acc = [0.0; 3];
        for a in axes {
            let w = Self::in_plane_average(a).expect("fixed nonzero axis").as_array();
            for i in 0..3 {
                acc[i] += w[i] / 4.0;
            }
        }
        DipoleWeights {
            k_x: acc[0],
            k_y: acc[1],
            k_z: acc[2],
        }
    }

    pub fn as_array(&self) -> Axes {
        [self.k_x, self.k_y, self.k_z]
    }

    fn from_array(a: Axes) -> Result<Self> {
        DipoleWeights::new(a[0], a[1], a[2])
    }

    /// Axis relabeling: output axis i takes input axis perm[i].
    pub fn permuted(&self, perm: [usize; 3]) -> Result<Self> {
        Self::from_array(permute(self.as_array(), perm)?)
    }
}

pub(crate) fn permute(values: Axes, perm: [usize; 3]) -> Result<Axes> {
    let mut seen = [false; 3];
    for &p in &perm {
        if p > 2 || seen[p] {
            return Err(Error::invalid(format!("{perm:?} is not a permutation of 0..3")));
        }
        seen[p] = true;
    }
    Ok(perm.map(|p| values[p]))
}

/// γ̃_i = γ·F_i·k_i (MHz). Purcell factors below one (inhibition) are allowed.
pub fn effective_rates(gamma: f64, weights: &DipoleWeights, purcell: Axes) -> Result<Axes> {
    ensure_positive("gamma", gamma)?;
    let w = DipoleWeights::from_array(weights.as_array())?.as_array();
    let mut out = [0.0; 3];
    for i in 0..3 {
        let f = ensure_finite("purcell", purcell[i])?;
        if f < 0.0 {
            return Err(Error::invalid(format!(
                "Purcell factor on {} is negative ({f})",
                AXIS_NAMES[i]
            )));
        }
        out[i] = gamma * f * w[i];
    }
    Ok(out)
}

/// w_i = γ̃_i / Σγ̃_j.
pub fn emission_fractions(rates: Axes) -> Result<Axes> {
    for r in rates {
        ensure_finite("rate", r)?;
        if r < 0.0 {
            return Err(Error::invalid(format!("emission rate {r} is negative")));
        }
    }
    let total: f64 = rates.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("all emission rates are zero"));
    }
    Ok(rates.map(|r| r / total))
}

/// Per-axis collection efficiency on a wavelength grid (nm).
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyTable {
    wavelength: Vec<f64>,
    eps: [Vec<f64>; 3],
}

impl EfficiencyTable {
    pub fn new(wavelength: Vec<f64>, eps_x: Vec<f64>, eps_y: Vec<f64>, eps_z: Vec<f64>) -> Result<Self> {
        let n = wavelength.len();
        if n < 2 {
            return Err(Error::invalid("efficiency table needs at least two wavelengths"));
        }
        for (name, col) in [("eps_x", &eps_x), ("eps_y", &eps_y), ("eps_z", &eps_z)] {
            if col.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has {} rows, wavelength has {n}",
                    col.len()
                )));
            }
            if let Some((i, v)) = col.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
                return Err(Error::invariant(name, format!("row {i}: efficiency {v} outside [0, 1]")));
            }
        }
        if wavelength.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteInput("table wavelength".into()));
        }
        if let Some(i) = wavelength.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invariant(
                "wavelength",
                format!("not strictly increasing at row {}", i + 1),
            ));
        }
        Ok(EfficiencyTable {
            wavelength,
            eps: [eps_x, eps_y, eps_z],
        })
    }

    /// Same efficiency on every axis and wavelength.
    pub fn uniform(start: f64, stop: f64, eps: f64) -> Result<Self> {
        Self::new(vec![start, stop], vec![eps; 2], vec![eps; 2], vec![eps; 2])
    }

    pub fn wavelength(&self) -> &[f64] {
        &self.wavelength
    }

    pub fn column(&self, axis: usize) -> &[f64] {
        &self.eps[axis]
    }

    pub fn range(&self) -> (f64, f64) {
        (self.wavelength[0], self.wavelength[self.wavelength.len() - 1])
    }

    /// Linearly interpolated (ε_x, ε_y, ε_z); no extrapolation.
    pub fn at(&self, wavelength: f64) -> Result<Axes> {
        ensure_finite("wavelength", wavelength)?;
        let (lo, hi) = self.range();
        if wavelength < lo || wavelength > hi {
            return Err(Error::OutOfRange(format!(
                "{wavelength} nm outside the table [{lo}, {hi}] nm"
            )));
        }
        let w = &self.wavelength;
        let j = w.partition_point(|v| *v <= wavelength).clamp(1, w.len() - 1);
        let i = j - 1;
        let t = (wavelength - w[i]) / (w[j] - w[i]);
        Ok([0, 1, 2].map(|a| {
            let (e0, e1) = (self.eps[a][i], self.eps[a][j]);
            if t == 0.0 {
                e0
            } else if t == 1.0 {
                e1
            } else {
                e0 + t * (e1 - e0)
            }
        }))
    }

    /// Axis relabeling consistent with [`DipoleWeights::permuted`].
    pub fn permuted(&self, perm: [usize; 3]) -> Result<Self> {
        permute([0.0, 1.0, 2.0], perm)?;
        let eps = perm.map(|p| self.eps[p].clone());
        Ok(EfficiencyTable {
            wavelength: self.wavelength.clone(),
            eps,
        })
    }
}

/// Σ w_i·ε_i(λ).
pub fn combined_efficiency(table: &EfficiencyTable, fractions: Axes, wavelength: f64) -> Result<f64> {
    for f in fractions {
        ensure_finite("fraction", f)?;
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidProbability(format!("emission fraction {f}")));
        }
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidProbability(format!("emission fractions sum to {sum}")));
    }
    let eps = table.at(wavelength)?;
    Ok((0..3).map(|i| fractions[i] * eps[i]).sum())
}

/// Per-axis Purcell factors and query wavelength for one mode configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectionConfig {
    pub purcell: Axes,
    /// nm.
    pub wavelength: f64,
}

/// Full chain effective_rates → emission_fractions → combined_efficiency.
pub fn collection_efficiency(
    table: &EfficiencyTable,
    weights: &DipoleWeights,
    config: &CollectionConfig,
) -> Result<f64> {
    let rates = effective_rates(1.0, weights, config.purcell)?;
    combined_efficiency(table, emission_fractions(rates)?, config.wavelength)
}

/// Purcell factor on a single coupled axis that turns the ZPL fraction
/// `xi_off` into `xi_on`, all other axes unmodified.
///
/// The ensemble ZPL rate grows by R = ξ_on(1−ξ_off) / (ξ_off(1−ξ_on)), and
/// R = 1 + k_axis(F − 1).
pub fn coupled_axis_purcell(weights: &DipoleWeights, axis: usize, xi_off: f64, xi_on: f64) -> Result<f64> {
    if axis > 2 {
        return Err(Error::invalid(format!("axis index {axis} out of range")));
    }
    for (name, xi) in [("xi_off", xi_off), ("xi_on", xi_on)] {
        if !(xi > 0.0 && xi < 1.0) {
            return Err(Error::InvalidProbability(format!("{name} = {xi}")));
        }
    }
    let k = weights.as_array()[axis];
    if k <= 0.0 {
        return Err(Error::invalid(format!("axis {} carries no dipole weight", AXIS_NAMES[axis])));
    }
    let r = xi_on * (1.0 - xi_off) / (xi_off * (1.0 - xi_on));
    Ok(1.0 + (r - 1.0) / k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionMode {
    /// Narrow-band detection of ZPL photons only.
    ZplOnly,
    /// All emitted photons.
    Broadband,
}

impl DetectionMode {
    pub fn id(self) -> &'static str {
        match self {
            DetectionMode::ZplOnly => "zpl_only",
            DetectionMode::Broadband => "broadband",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "zpl_only" => Some(DetectionMode::ZplOnly),
            "broadband" => Some(DetectionMode::Broadband),
            _ => None,
        }
    }
}

/// Collection-efficiency drop on resonance: 0.87 for ZPL photons, 0.97 for all photons.
pub fn scenario_collection_factor(mode: DetectionMode) -> f64 {
    match mode {
        DetectionMode::ZplOnly => 0.87,
        DetectionMode::Broadband => 0.97,
    }
}

/// Ratio of the resonant to the off-resonant combined efficiency.
pub fn computed_collection_factor(
    table: &EfficiencyTable,
    weights: &DipoleWeights,
    off: &CollectionConfig,
    on: &CollectionConfig,
) -> Result<f64> {
    let e_off = collection_efficiency(table, weights, off)?;
    if e_off <= 0.0 {
        return Err(Error::invalid("off-resonant collection efficiency is zero"));
    }
    Ok(collection_efficiency(table, weights, on)? / e_off)
}

/// Factors relating resonant (starred) to off-resonant readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutScenario {
    /// Emitted-photon ratio from lifetime shortening.
    pub lifetime_factor: f64,
    pub collection_factor: f64,
    pub zpl_fraction_off: f64,
    pub zpl_fraction_on: f64,
    /// C*/C.
    pub contrast_ratio: f64,
    pub mode: DetectionMode,
}

impl ReadoutScenario {
    /// ZPL 2.1 % → 18.3 %, 1.13× emitted photons, C*/C = 0.959.
    pub fn tuned_cavity(mode: DetectionMode) -> Self {
        ReadoutScenario {
            lifetime_factor: 1.13,
            collection_factor: scenario_collection_factor(mode),
            zpl_fraction_off: 0.021,
            zpl_fraction_on: 0.183,
            contrast_ratio: 0.959,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("lifetime_factor", self.lifetime_factor)?;
        ensure_positive("collection_factor", self.collection_factor)?;
        ensure_positive("contrast_ratio", self.contrast_ratio)?;
        for (name, xi) in [
            ("zpl_fraction_off", self.zpl_fraction_off),
            ("zpl_fraction_on", self.zpl_fraction_on),
        ] {
            ensure_finite(name, xi)?;
            if !(xi > 0.0 && xi < 1.0) {
                return Err(Error::invalid(format!("{name} = {xi} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// N₀*/N₀ for the scenario's detection mode.
pub fn photon_ratio(s: &ReadoutScenario) -> Result<f64> {
    s.validate()?;
    let base = s.lifetime_factor * s.collection_factor;
    Ok(match s.mode {
        DetectionMode::ZplOnly => base * (s.zpl_fraction_on / s.zpl_fraction_off),
        DetectionMode::Broadband => base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Axes, b: Axes, tol: f64) -> bool {
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn effective_rate_examples() {
        let third = DipoleWeights::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        assert!(close(effective_rates(111.0, &third, [1.0; 3]).unwrap(), [37.0; 3], 1e-12));
        let r = effective_rates(1.0, &DipoleWeights::membrane_001(), [1.0, 2.0, 1.0]).unwrap();
        assert!(close(r, [0.24, 0.48, 0.52], 1e-15));
        let w = DipoleWeights::new(0.0, 0.5, 0.5).unwrap();
        assert_eq!(effective_rates(5.0, &w, [3.0; 3]).unwrap()[0], 0.0);
        assert!(effective_rates(0.0, &w, [1.0; 3]).is_err());
        assert!(effective_rates(1.0, &w, [1.0, -1.0, 1.0]).is_err());
    }

    #[test]
    fn weights_validated() {
        assert!(DipoleWeights::new(0.3, 0.3, 0.3).is_err());
        assert!(DipoleWeights::new(-0.1, 0.6, 0.5).is_err());
        let m = DipoleWeights::membrane_001();
        assert!(DipoleWeights::new(m.k_x, m.k_y, m.k_z).is_ok());
    }

    #[test]
    fn uniform_in_plane_average_is_one_third() {
        let u = DipoleWeights::uniform_ensemble();
        assert!(close(u.as_array(), [1.0 / 3.0; 3], 1e-15));
        // a single orientation is not isotropic
        let one = DipoleWeights::in_plane_average([1.0, 1.0, 1.0]).unwrap();
        assert!(close(one.as_array(), [1.0 / 3.0; 3], 1e-15));
        let tilted = DipoleWeights::in_plane_average([2f64.sqrt(), 0.0, 1.0]).unwrap();
        assert!(close(tilted.as_array(), [1.0 / 6.0, 0.5, 1.0 / 3.0], 1e-15));
    }

    #[test]
    fn fraction_examples() {
        let f = emission_fractions([0.24, 0.48, 0.52]).unwrap();
        assert!(close(f, [0.1935, 0.3871, 0.4194], 1e-4));
        assert_eq!(emission_fractions([2.0; 3]).unwrap(), [1.0 / 3.0; 3]);
        assert!(emission_fractions([0.0; 3]).is_err());
        let p = emission_fractions([0.52, 0.24, 0.48]).unwrap();
        assert_eq!(p, [f[2], f[0], f[1]]);
    }

    #[test]
    fn interpolation_and_range() {
        let t = EfficiencyTable::new(
            vec![630.0, 640.0],
            vec![0.0, 0.1],
            vec![0.1, 0.1],
            vec![0.2, 0.0],
        )
        .unwrap();
        let e = t.at(632.5).unwrap();
        assert!(close(e, [0.025, 0.1, 0.15], 1e-15));
        assert_eq!(t.at(640.0).unwrap(), [0.1, 0.1, 0.0]);
        assert!(matches!(t.at(629.9), Err(Error::OutOfRange(_))));
        assert!(matches!(t.at(640.1), Err(Error::OutOfRange(_))));
        let u = EfficiencyTable::uniform(600.0, 700.0, 0.04).unwrap();
        assert!((combined_efficiency(&u, [0.2, 0.3, 0.5], 650.0).unwrap() - 0.04).abs() < 1e-15);
    }

    #[test]
    fn table_invariants() {
        assert!(EfficiencyTable::new(vec![1.0, 1.0], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(EfficiencyTable::new(vec![1.0, 2.0], vec![0.0; 2], vec![1.5; 2], vec![0.0; 2]).is_err());
        assert!(EfficiencyTable::new(vec![1.0, 2.0], vec![0.0; 3], vec![0.0; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn scenario_ratios() {
        let zpl = photon_ratio(&ReadoutScenario::tuned_cavity(DetectionMode::ZplOnly)).unwrap();
        assert!((zpl - 1.13 * 0.87 * 0.183 / 0.021).abs() < 1e-12);
        assert!((zpl - 8.56).abs() < 0.01);
        let bb = photon_ratio(&ReadoutScenario::tuned_cavity(DetectionMode::Broadband)).unwrap();
        assert!((bb - 1.10).abs() < 0.01);
        let unit = ReadoutScenario {
            lifetime_factor: 1.0,
            collection_factor: 1.0,
            zpl_fraction_off: 0.5,
            zpl_fraction_on: 0.5,
            contrast_ratio: 1.0,
            mode: DetectionMode::ZplOnly,
        };
        assert_eq!(photon_ratio(&unit).unwrap(), 1.0);
        assert!(photon_ratio(&ReadoutScenario { lifetime_factor: 0.0, ..unit }).is_err());
    }

    #[test]
    fn scenario_defaults() {
        assert_eq!(scenario_collection_factor(DetectionMode::ZplOnly), 0.87);
        assert_eq!(scenario_collection_factor(DetectionMode::Broadband), 0.97);
        for m in [DetectionMode::ZplOnly, DetectionMode::Broadband] {
            assert_eq!(DetectionMode::from_id(m.id()), Some(m));
        }
    }

    #[test]
    fn coupled_axis_reproduces_zpl_fraction() {
        let w = DipoleWeights::membrane_001();
        let f = coupled_axis_purcell(&w, 1, 0.021, 0.183).unwrap();
        // ZPL rate factor R = 1 + k_y(F − 1); on-resonance fraction ξR/(1 − ξ + ξR)
        let r = 1.0 + 0.24 * (f - 1.0);
        let xi_on = 0.021 * r / (1.0 - 0.021 + 0.021 * r);
        assert!((xi_on - 0.183).abs() < 1e-12);
        assert!(coupled_axis_purcell(&w, 3, 0.021, 0.183).is_err());
    }
}
