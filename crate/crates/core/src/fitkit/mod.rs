//! Nonlinear least squares and the curve models used to reduce measurements.

mod curves;
mod engine;
mod models;
mod rates;

pub use curves::{
    fit_double_exponential, fit_gaussian, fit_gaussian_pair, fit_lorentzian, fit_odmr, fit_rabi,
    fit_saturation, PEAK_SIGNIFICANCE, TAU_SEPARATION,
};
pub use engine::{
    central_difference_jacobian, jacobian_discrepancy, minimize, FitResult, JacobianMode,
    LeastSquaresProblem, LmSettings, NamedValues,
};
pub use models::{fit_least_squares, CurveFamily, CurveProblem};
pub use rates::{
    compare_mixing_variants, compare_mixing_variants_with, fit_rates, fit_rates_with,
    rates_jacobian_discrepancy, MixingComparison, RatesFitOptions, RATE_PARAMS,
};
