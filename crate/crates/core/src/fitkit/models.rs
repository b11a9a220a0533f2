//! Closed-form curve families and the generic curve-fitting problem.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};

use super::engine::{minimize, FitResult, LeastSquaresProblem, LmSettings, NamedValues};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveFamily {
    /// offset + (2·area/π)·fwhm / (4(x−center)² + fwhm²)
    Lorentzian,
    /// offset + area·√(4ln2/π)/fwhm · exp(−4ln2 (x−center)²/fwhm²)
    Gaussian,
    /// Two area-normalized Gaussians on a shared offset.
    GaussianPair,
    /// baseline·(1 − Σ depth_i·fwhm_i²/(4(x−center_i)² + fwhm_i²))
    OdmrDoublet,
    /// offset + amplitude·exp(−t/decay_time)·cos(2πt/period + phase)
    DampedCosine,
    /// offset + a1·exp(−t/tau1) + a2·exp(−t/tau2)
    DoubleExponential,
    /// i_inf·P/(P + p_sat) + background_slope·P
    Saturation,
}

const GAUSS_K: f64 = 4.0 * LN_2;

impl CurveFamily {
    pub const ALL: [CurveFamily; 7] = [
        CurveFamily::Lorentzian,
        CurveFamily::Gaussian,
        CurveFamily::GaussianPair,
        CurveFamily::OdmrDoublet,
        CurveFamily::DampedCosine,
        CurveFamily::DoubleExponential,
        CurveFamily::Saturation,
    ];

    pub fn id(self) -> &'static str {
        match self {
            CurveFamily::Lorentzian => "lorentzian",
            CurveFamily::Gaussian => "gaussian",
            CurveFamily::GaussianPair => "gaussian_pair",
            CurveFamily::OdmrDoublet => "odmr",
            CurveFamily::DampedCosine => "rabi",
            CurveFamily::DoubleExponential => "double_exponential",
            CurveFamily::Saturation => "saturation",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.id() == id)
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            CurveFamily::Lorentzian | CurveFamily::Gaussian => &["center", "fwhm", "area", "offset"],
            CurveFamily::GaussianPair => &[
                "center1", "fwhm1", "area1", "center2", "fwhm2", "area2", "offset",
            ],
            CurveFamily::OdmrDoublet => &[
                "center1", "center2", "depth1", "depth2", "fwhm1", "fwhm2", "baseline",
            ],
            CurveFamily::DampedCosine => &["amplitude", "period", "phase", "decay_time", "offset"],
            CurveFamily::DoubleExponential => &["a1", "tau1", "a2", "tau2", "offset"],
            CurveFamily::Saturation => &["i_inf", "p_sat", "background_slope"],
        }
    }

    pub fn param_count(self) -> usize {
        self.param_names().len()
    }

    /// Parameters that must stay strictly positive.
    fn positive_params(self) -> &'static [usize] {
        match self {
            CurveFamily::Lorentzian | CurveFamily::Gaussian => &[1],
            CurveFamily::GaussianPair => &[1, 4],
            CurveFamily::OdmrDoublet => &[4, 5],
            CurveFamily::DampedCosine => &[1, 3],
            CurveFamily::DoubleExponential => &[1, 3],
            CurveFamily::Saturation => &[1],
        }
    }

    pub fn feasible(self, p: &[f64]) -> bool {
        p.len() == self.param_count()
            && p.iter().all(|v| v.is_finite())
            && self.positive_params().iter().all(|&i| p[i] > 0.0)
    }

    pub fn value(self, x: f64, p: &[f64]) -> f64 {
        match self {
            CurveFamily::Lorentzian => p[3] + lorentz(x, p[0], p[1], p[2]),
            CurveFamily::Gaussian => p[3] + gauss(x, p[0], p[1], p[2]),
            CurveFamily::GaussianPair => {
                p[6] + gauss(x, p[0], p[1], p[2]) + gauss(x, p[3], p[4], p[5])
            }
            CurveFamily::OdmrDoublet => {
                p[6] * (1.0 - p[2] * dip(x, p[0], p[4]) - p[3] * dip(x, p[1], p[5]))
            }
            CurveFamily::DampedCosine => {
                p[4] + p[0] * (-x / p[3]).exp() * (2.0 * PI * x / p[1] + p[2]).cos()
            }
            CurveFamily::DoubleExponential => {
                p[4] + p[0] * (-x / p[1]).exp() + p[2] * (-x / p[3]).exp()
            }
            CurveFamily::Saturation => p[0] * x / (x + p[1]) + p[2] * x,
        }
    }

    /// ∂value/∂p at `x`, written into `grad`.
    pub fn gradient(self, x: f64, p: &[f64], grad: &mut [f64]) {
        match self {
            CurveFamily::Lorentzian => {
                lorentz_grad(x, p[0], p[1], p[2], &mut grad[0..3]);
                grad[3] = 1.0;
            }
            CurveFamily::Gaussian => {
                gauss_grad(x, p[0], p[1], p[2], &mut grad[0..3]);
                grad[3] = 1.0;
            }
            CurveFamily::GaussianPair => {
                gauss_grad(x, p[0], p[1], p[2], &mut grad[0..3]);
                gauss_grad(x, p[3], p[4], p[5], &mut grad[3..6]);
                grad[6] = 1.0;
            }
            CurveFamily::OdmrDoublet => {
                let b = p[6];
                for k in 0..2 {
                    let (c, depth, w) = (p[k], p[2 + k], p[4 + k]);
                    let d = x - c;
                    let den = 4.0 * d * d + w * w;
                    let den2 = den * den;
                    grad[k] = -b * depth * 8.0 * d * w * w / den2;
                    grad[2 + k] = -b * w * w / den;
                    grad[4 + k] = -b * depth * 8.0 * w * d * d / den2;
                }
                grad[6] = 1.0 - p[2] * dip(x, p[0], p[4]) - p[3] * dip(x, p[1], p[5]);
            }
            CurveFamily::DampedCosine => {
                let (a, period, phase, tau) = (p[0], p[1], p[2], p[3]);
                let e = (-x / tau).exp();
                let theta = 2.0 * PI * x / period + phase;
                let (s, c) = theta.sin_cos();
                grad[0] = e * c;
                grad[1] = a * e * s * 2.0 * PI * x / (period * period);
                grad[2] = -a * e * s;
                grad[3] = a * e * c * x / (tau * tau);
                grad[4] = 1.0;
            }
            CurveFamily::DoubleExponential => {
                for k in 0..2 {
                    let (a, tau) = (p[2 * k], p[2 * k + 1]);
                    let e = (-x / tau).exp();
                    grad[2 * k] = e;
                    grad[2 * k + 1] = a * e * x / (tau * tau);
                }
                grad[4] = 1.0;
            }
            CurveFamily::Saturation => {
                let den = x + p[1];
                grad[0] = x / den;
                grad[1] = -p[0] * x / (den * den);
                grad[2] = x;
            }
        }
    }
}

fn lorentz(x: f64, c: f64, w: f64, area: f64) -> f64 {
    let d = x - c;
    2.0 * area / PI * w / (4.0 * d * d + w * w)
}

fn lorentz_grad(x: f64, c: f64, w: f64, area: f64, g: &mut [f64]) {
    let d = x - c;
    let den = 4.0 * d * d + w * w;
    let pref = 2.0 * area / PI;
    g[0] = pref * w * 8.0 * d / (den * den);
    g[1] = pref * (4.0 * d * d - w * w) / (den * den);
    g[2] = 2.0 / PI * w / den;
}

fn gauss_shape(x: f64, c: f64, w: f64) -> f64 {
    let d = x - c;
    (GAUSS_K / PI).sqrt() / w * (-GAUSS_K * d * d / (w * w)).exp()
}

fn gauss(x: f64, c: f64, w: f64, area: f64) -> f64 {
    area * gauss_shape(x, c, w)
}

fn gauss_grad(x: f64, c: f64, w: f64, area: f64, g: &mut [f64]) {
    let d = x - c;
    let shape = gauss_shape(x, c, w);
    g[0] = area * shape * 2.0 * GAUSS_K * d / (w * w);
    g[1] = area * shape * (2.0 * GAUSS_K * d * d / (w * w * w) - 1.0 / w);
    g[2] = shape;
}

fn dip(x: f64, c: f64, w: f64) -> f64 {
    let d = x - c;
    w * w / (4.0 * d * d + w * w)
}

/// Least-squares problem for one curve family over (x, y) samples.
#[derive(Debug, Clone, Copy)]
pub struct CurveProblem<'a> {
    pub family: CurveFamily,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

impl<'a> CurveProblem<'a> {
    pub fn new(family: CurveFamily, x: &'a [f64], y: &'a [f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} abscissa vs {} ordinate samples",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("fit data".into()));
        }
        Ok(CurveProblem { family, x, y })
    }
}

impl LeastSquaresProblem for CurveProblem<'_> {
    fn param_names(&self) -> Vec<String> {
        self.family.param_names().iter().map(|s| s.to_string()).collect()
    }

    fn residual_count(&self) -> usize {
        self.x.len()
    }

    fn residuals(&self, p: &[f64]) -> Result<DVector<f64>> {
        Ok(DVector::from_iterator(
            self.x.len(),
            self.x
                .iter()
                .zip(self.y)
                .map(|(&x, &y)| self.family.value(x, p) - y),
        ))
    }

    fn analytic_jacobian(&self, p: &[f64]) -> Option<Result<DMatrix<f64>>> {
        let n = self.family.param_count();
        let mut jac = DMatrix::zeros(self.x.len(), n);
        let mut g = vec![0.0; n];
        for (i, &x) in self.x.iter().enumerate() {
            self.family.gradient(x, p, &mut g);
            for (j, v) in g.iter().enumerate() {
                jac[(i, j)] = *v;
            }
        }
        Some(Ok(jac))
    }

    fn feasible(&self, p: &[f64]) -> bool {
        self.family.feasible(p)
    }
}

/// Fits `family` to (x, y) from a named initial guess.
pub fn fit_least_squares(
    family: CurveFamily,
    x: &[f64],
    y: &[f64],
    guess: &NamedValues,
) -> Result<FitResult> {
    let problem = CurveProblem::new(family, x, y)?;
    let start = family
        .param_names()
        .iter()
        .map(|name| {
            guess
                .get(name)
                .ok_or_else(|| Error::invalid(format!("initial guess lacks {name:?}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut fit = minimize(&problem, &start, &LmSettings::default())?;
    if family == CurveFamily::DampedCosine {
        let (amplitude, phase) = (fit.param("amplitude"), fit.param("phase"));
        let phase = if amplitude < 0.0 { phase + PI } else { phase };
        fit.params.set("amplitude", amplitude.abs());
        fit.params.set("phase", wrap_phase(phase));
    }
    Ok(fit)
}

/// Phase folded into (−π, π].
pub(crate) fn wrap_phase(phase: f64) -> f64 {
    let mut p = phase % (2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    } else if p <= -PI {
        p += 2.0 * PI;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitkit::engine::jacobian_discrepancy;

    #[test]
    fn ids_round_trip() {
        for f in CurveFamily::ALL {
            assert_eq!(CurveFamily::from_id(f.id()), Some(f));
        }
        assert_eq!(CurveFamily::from_id("voigt"), None);
    }

    #[test]
    fn lorentzian_peak_height_and_area() {
        let p = [637.4, 0.5, 2.0, 0.0];
        let peak = CurveFamily::Lorentzian.value(637.4, &p);
        assert!((peak - 2.0 * 2.0 / (PI * 0.5)).abs() < 1e-12);
        let half = CurveFamily::Lorentzian.value(637.65, &p);
        assert!((half - peak / 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_half_maximum_at_half_fwhm() {
        let p = [0.0, 3.0, 1.0, 0.0];
        let peak = CurveFamily::Gaussian.value(0.0, &p);
        assert!((CurveFamily::Gaussian.value(1.5, &p) - peak / 2.0).abs() < 1e-12);
        // unit area
        let xs: Vec<f64> = (-4000..=4000).map(|i| i as f64 * 0.005).collect();
        let ys: Vec<f64> = xs.iter().map(|x| CurveFamily::Gaussian.value(*x, &p)).collect();
        assert!((crate::series::trapezoid(&xs, &ys) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn odmr_dip_depth_fraction() {
        let p = [2.823, 2.917, 0.04, 0.03, 0.008, 0.008, 100.0];
        let y = CurveFamily::OdmrDoublet.value(2.917, &p);
        assert!((y - 100.0 * (1.0 - 0.03 - 0.04 * dip(2.917, 2.823, 0.008))).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_differences_at_a_point() {
        let x: Vec<f64> = (0..50).map(|i| 0.5 + i as f64 * 0.3).collect();
        let y = vec![0.0; x.len()];
        let cases: [(CurveFamily, &[f64]); 7] = [
            (CurveFamily::Lorentzian, &[7.0, 2.0, 3.0, 0.5]),
            (CurveFamily::Gaussian, &[7.0, 2.0, 3.0, 0.5]),
            (CurveFamily::GaussianPair, &[5.0, 2.0, 3.0, 9.0, 3.0, 1.0, 0.5]),
            (CurveFamily::OdmrDoublet, &[5.0, 9.0, 0.1, 0.2, 1.0, 2.0, 3.0]),
            (CurveFamily::DampedCosine, &[1.0, 4.0, 0.3, 9.0, 0.2]),
            (CurveFamily::DoubleExponential, &[2.0, 9.0, 1.0, 1.5, 0.1]),
            (CurveFamily::Saturation, &[13.6, 0.5, 1.0]),
        ];
        for (family, p) in cases {
            let prob = CurveProblem::new(family, &x, &y).unwrap();
            let d = jacobian_discrepancy(&prob, p, 1e-6).unwrap();
            assert!(d < 1e-6, "{family:?}: {d}");
        }
    }

    #[test]
    fn infeasible_widths() {
        assert!(!CurveFamily::Lorentzian.feasible(&[0.0, -1.0, 1.0, 0.0]));
        assert!(!CurveFamily::Lorentzian.feasible(&[0.0, 1.0, 1.0]));
        assert!(CurveFamily::Lorentzian.feasible(&[0.0, 1.0, -1.0, 0.0]));
    }

    #[test]
    fn guess_must_name_every_parameter() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.0; 5];
        let guess = NamedValues::from_pairs([("center", 1.0), ("fwhm", 1.0)]);
        assert!(fit_least_squares(CurveFamily::Lorentzian, &x, &y, &guess).is_err());
    }
}
