//! Levenberg-Marquardt minimization of a sum of squared residuals.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Ordered list of named real values (parameters, standard errors, ...).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NamedValues(Vec<(String, f64)>);

impl NamedValues {
    pub fn new() -> Self {
        NamedValues(Vec::new())
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        NamedValues(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// Like `get` but panics with the missing name; for names the caller produced.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name)
            .unwrap_or_else(|| panic!("no value named {name:?}"))
    }

    pub fn set(&mut self, name: &str, value: f64) {
        match self.0.iter_mut().find(|(k, _)| k == name) {
            Some(slot) => slot.1 = value,
            None => self.0.push((name.to_string(), value)),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn names(&self) -> Vec<&str> {
        self.0.iter().map(|(k, _)| k.as_str()).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.iter().map(|(_, v)| *v).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for NamedValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: NamedValues,
    /// Residual-variance scaled standard errors; `None` unless converged.
    pub stderr: Option<NamedValues>,
    /// Quantities computed from the parameters (e.g. π-time).
    pub derived: NamedValues,
    /// sqrt of the sum of squared residuals.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Number of residuals the fit was computed on.
    pub samples: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> f64 {
        self.params.value(name)
    }

    pub fn stderr_of(&self, name: &str) -> Option<f64> {
        self.stderr.as_ref().and_then(|s| s.get(name))
    }

    /// Root-mean-square residual.
    pub fn rms(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.residual_norm / (self.samples as f64).sqrt()
        }
    }
}

/// A residual vector r(p) = model(p) − data over a fixed data set.
pub trait LeastSquaresProblem {
    fn param_names(&self) -> Vec<String>;

    fn residual_count(&self) -> usize;

    fn residuals(&self, params: &[f64]) -> Result<DVector<f64>>;

    /// Analytic Jacobian ∂r/∂p, if the problem has one.
    fn analytic_jacobian(&self, _params: &[f64]) -> Option<Result<DMatrix<f64>>> {
        None
    }

    /// Domain constraint; infeasible trial steps are rejected like uphill steps.
    fn feasible(&self, _params: &[f64]) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMode {
    /// Analytic when the problem provides one, central differences otherwise.
    Auto,
    CentralDifference,
}

#[derive(Debug, Clone, Copy)]
pub struct LmSettings {
    pub max_iterations: usize,
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Converged when the largest relative parameter step falls below this.
    pub xtol: f64,
    /// Converged when the scaled gradient |(Jᵀr)_j · s_j| falls below this.
    pub gtol: f64,
    /// Central-difference step relative to the parameter scale.
    pub fd_step: f64,
    pub jacobian: JacobianMode,
}

impl Default for LmSettings {
    fn default() -> Self {
        LmSettings {
            max_iterations: 500,
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 3.0,
            xtol: 1e-8,
            gtol: 1e-10,
            fd_step: 1e-6,
            jacobian: JacobianMode::Auto,
        }
    }
}

const LAMBDA_MAX: f64 = 1e20;
/// Relative cost change indistinguishable from rounding.
const COST_ROUNDING: f64 = 1e-13;
/// Smallest eigenvalue of the parameter correlation matrix accepted for stderr.
const MIN_CORRELATION_EIGENVALUE: f64 = 1e-14;

/// Scale used for relative steps and finite differences of one parameter.
pub(crate) fn param_scale(p: f64) -> f64 {
    if p != 0.0 {
        p.abs()
    } else {
        1.0
    }
}

pub fn central_difference_jacobian<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    params: &[f64],
    rel_step: f64,
) -> Result<DMatrix<f64>> {
    let n = problem.residual_count();
    let mut jac = DMatrix::zeros(n, params.len());
    let mut p = params.to_vec();
    for j in 0..params.len() {
        let h = rel_step * param_scale(params[j]);
        p[j] = params[j] + h;
        let up = problem.residuals(&p)?;
        p[j] = params[j] - h;
        let down = problem.residuals(&p)?;
        p[j] = params[j];
        jac.set_column(j, &((up - down) / (2.0 * h)));
    }
    Ok(jac)
}

fn jacobian<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    params: &[f64],
    settings: &LmSettings,
) -> Result<DMatrix<f64>> {
    if settings.jacobian == JacobianMode::Auto {
        if let Some(j) = problem.analytic_jacobian(params) {
            return j;
        }
    }
    central_difference_jacobian(problem, params, settings.fd_step)
}

/// Largest column-wise relative discrepancy between the analytic and the
/// central-difference Jacobian: max_j ‖a_j − f_j‖∞ / ‖a_j‖∞.
pub fn jacobian_discrepancy<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    params: &[f64],
    rel_step: f64,
) -> Result<f64> {
    let analytic = problem
        .analytic_jacobian(params)
        .ok_or_else(|| Error::invalid("problem has no analytic Jacobian"))??;
    let numeric = central_difference_jacobian(problem, params, rel_step)?;
    let mut worst = 0.0_f64;
    for j in 0..analytic.ncols() {
        let a = analytic.column(j);
        let scale = a.amax();
        let diff = (a - numeric.column(j)).amax();
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        } else if diff > 0.0 {
            worst = f64::INFINITY;
        }
    }
    Ok(worst)
}

/// Minimizes ‖r(p)‖² starting from `guess`.
///
/// Damped normal equations (JᵀJ + λD) δ = −Jᵀr in parameter-scaled
/// coordinates, with D the largest diag(JᵀJ) seen so far; λ is divided by
/// `lambda_down` after an accepted step and multiplied by `lambda_up` after a
/// rejected one.
pub fn minimize<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    guess: &[f64],
    settings: &LmSettings,
) -> Result<FitResult> {
    let names = problem.param_names();
    if names.len() != guess.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} parameters vs {} initial values",
            names.len(),
            guess.len()
        )));
    }
    if let Some(bad) = guess.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(format!("initial {} = {}", names[bad], guess[bad])));
    }
    if !problem.feasible(guess) {
        return Err(Error::invalid("initial guess outside the model domain"));
    }
    let m = problem.residual_count();
    let n = guess.len();
    if m < n {
        return Err(Error::invalid(format!("{m} residuals cannot determine {n} parameters")));
    }

    let mut p = guess.to_vec();
    let mut r = problem.residuals(&p)?;
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::NonFiniteInput("residuals at the initial guess".into()));
    }
    let mut lambda = settings.lambda0;
    let mut converged = false;
    let mut iterations = 0;
    // largest unscaled column norm² seen so far, per parameter
    let mut damping_diag = vec![0.0f64; n];

    'outer: while iterations < settings.max_iterations {
        iterations += 1;
        let scales: Vec<f64> = p.iter().map(|v| param_scale(*v)).collect();
        let mut jac = jacobian(problem, &p, settings)?;
        for (j, s) in scales.iter().enumerate() {
            jac.column_mut(j).scale_mut(*s);
        }
        let grad = jac.tr_mul(&r);
        if grad.amax() < settings.gtol {
            converged = true;
            break;
        }
        let normal = jac.tr_mul(&jac);
        let diag_floor = normal.diagonal().amax().max(f64::MIN_POSITIVE) * 1e-12;
        let damping: Vec<f64> = damping_diag
            .iter_mut()
            .zip(&scales)
            .enumerate()
            .map(|(j, (d, s))| {
                *d = d.max(normal[(j, j)] / (s * s));
                (*d * s * s).max(diag_floor)
            })
            .collect();

        loop {
            let Some(step_scaled) = damped_step(&jac, &r, &damping, lambda) else {
                lambda *= settings.lambda_up;
                if lambda > LAMBDA_MAX {
                    return Err(Error::IllConditioned(
                        "normal equations singular beyond damping recovery".into(),
                    ));
                }
                continue;
            };
            let step: Vec<f64> = step_scaled
                .iter()
                .zip(&scales)
                .map(|(d, s)| d * s)
                .collect();
            let rel_change = step_scaled.amax();
            let trial: Vec<f64> = p.iter().zip(&step).map(|(a, d)| a + d).collect();

            let trial_eval = if problem.feasible(&trial) {
                problem.residuals(&trial).ok().and_then(|tr| {
                    let c = tr.norm_squared();
                    c.is_finite().then_some((tr, c))
                })
            } else {
                None
            };
            // near the minimum the cost is flat to rounding; steps that do not
            // measurably raise it are taken so the gradient can be zeroed
            match trial_eval {
                Some((tr, c)) if c <= cost * (1.0 + COST_ROUNDING) => {
                    p = trial;
                    r = tr;
                    cost = c;
                    lambda = (lambda / settings.lambda_down).max(1e-300);
                    if rel_change < settings.xtol {
                        converged = true;
                        break 'outer;
                    }
                    continue 'outer;
                }
                _ => {
                    // no downhill step exists at this resolution
                    if rel_change < settings.xtol {
                        converged = true;
                        break 'outer;
                    }
                    lambda *= settings.lambda_up;
                    if lambda > LAMBDA_MAX {
                        converged = true;
                        break 'outer;
                    }
                }
            }
        }
    }

    let params = NamedValues::from_pairs(names.iter().cloned().zip(p.iter().copied()));
    let mut result = FitResult {
        params,
        stderr: None,
        derived: NamedValues::new(),
        residual_norm: cost.sqrt(),
        converged,
        iterations,
        samples: m,
    };
    if !converged {
        return Err(Error::FitNotConverged(Box::new(result)));
    }
    result.stderr = Some(standard_errors(problem, &p, cost, settings)?);
    Ok(result)
}

/// Solves min ‖J δ + r‖² + λ Σ d_j δ_j² by QR of the stacked system, which
/// keeps the conditioning of J rather than squaring it.
fn damped_step(jac: &DMatrix<f64>, r: &DVector<f64>, damping: &[f64], lambda: f64) -> Option<DVector<f64>> {
    let (m, n) = jac.shape();
    let mut stacked = DMatrix::zeros(m + n, n);
    stacked.view_mut((0, 0), (m, n)).copy_from(jac);
    let mut rhs = DVector::zeros(m + n);
    rhs.rows_mut(0, m).copy_from(&(-r));
    for j in 0..n {
        stacked[(m + j, j)] = (lambda * damping[j]).sqrt();
    }
    let qr = stacked.qr();
    let rmat = qr.r();
    let largest = rmat.diagonal().amax();
    if !(largest > 0.0) || rmat.diagonal().iter().any(|d| d.abs() <= largest * 1e-14) {
        return None;
    }
    let qtb = qr.q().tr_mul(&rhs);
    rmat.solve_upper_triangular(&qtb).filter(|d| d.iter().all(|v| v.is_finite()))
}

/// sqrt(diag(s² (JᵀJ)⁻¹)) with s² = SSR / (m − n).
fn standard_errors<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    p: &[f64],
    cost: f64,
    settings: &LmSettings,
) -> Result<NamedValues> {
    let names = problem.param_names();
    let m = problem.residual_count();
    let n = p.len();
    let scales: Vec<f64> = p.iter().map(|v| param_scale(*v)).collect();
    let mut jac = jacobian(problem, p, settings)?;
    for (j, s) in scales.iter().enumerate() {
        jac.column_mut(j).scale_mut(*s);
    }
    let normal = jac.tr_mul(&jac);
    let d: Vec<f64> = (0..n).map(|j| normal[(j, j)].sqrt()).collect();
    if d.iter().any(|v| *v == 0.0 || !v.is_finite()) {
        return Err(Error::IllConditioned(
            "a parameter has no influence on the residuals".into(),
        ));
    }
    let correlation = DMatrix::from_fn(n, n, |i, j| normal[(i, j)] / (d[i] * d[j]));
    let min_eig = SymmetricEigen::new(correlation.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, b| a.min(*b));
    if min_eig < MIN_CORRELATION_EIGENVALUE {
        return Err(Error::IllConditioned(format!(
            "parameters are not separately identifiable (correlation eigenvalue {min_eig:.2e})"
        )));
    }
    let inv = correlation
        .cholesky()
        .ok_or_else(|| Error::IllConditioned("singular parameter covariance".into()))?
        .inverse();
    let dof = if m > n { (m - n) as f64 } else { 1.0 };
    let variance = cost / dof;
    Ok(NamedValues::from_pairs((0..n).map(|j| {
        let se = (variance * inv[(j, j)]).sqrt() / d[j] * scales[j];
        (names[j].clone(), se)
    })))
}
