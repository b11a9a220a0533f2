use nalgebra::{Complex, Matrix5, Vector5};

use super::{build_generator, generator_matrix, LevelPopulations, RateSet};
use crate::error::{ensure_finite, Error, Result};

type C64 = Complex<f64>;

/// Relative residual an eigen-decomposition must meet to be used.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

/// Eigenvalues closer than this (relative to ‖M‖) share one null-space solve.
const CLUSTER_TOL: f64 = 1e-8;
/// Eigenvalues this many ulps of ‖M‖ from zero are the conserved mode.
const NULL_EIGENVALUE_ULPS: f64 = 64.0;

const NS_PER_US: f64 = 1e3;

/// Matrix exponential of a rate generator through its eigen-decomposition,
/// M = V Λ V⁻¹, so that p(t) = V exp(Λt) V⁻¹ p(0).
#[derive(Debug, Clone)]
pub struct Propagator {
    generator: Matrix5<f64>,
    eigenvalues: Vector5<C64>,
    vectors: Matrix5<C64>,
    inverse: Matrix5<C64>,
}

impl Propagator {
    pub fn new(rates: &RateSet) -> Result<Self> {
        Self::from_generator(generator_matrix(rates)?)
    }

    pub fn from_generator(generator: Matrix5<f64>) -> Result<Self> {
        if generator.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("generator matrix".into()));
        }
        let norm = generator.norm();
        if norm == 0.0 {
            return Ok(Propagator {
                generator,
                eigenvalues: Vector5::zeros(),
                vectors: Matrix5::identity(),
                inverse: Matrix5::identity(),
            });
        }

        let mut eigenvalues = generator.complex_eigenvalues();
        // columns sum to zero: one eigenvalue is exactly zero
        let null = (0..5)
            .min_by(|&a, &b| eigenvalues[a].norm().total_cmp(&eigenvalues[b].norm()))
            .expect("five eigenvalues");
        if eigenvalues[null].norm() <= NULL_EIGENVALUE_ULPS * f64::EPSILON * norm {
            eigenvalues[null] = C64::new(0.0, 0.0);
        }
        let mc: Matrix5<C64> = generator.map(|v| C64::new(v, 0.0));
        let mut vectors = Matrix5::<C64>::zeros();
        let mut assigned = [false; 5];
        for i in 0..5 {
            if assigned[i] {
                continue;
            }
            let group: Vec<usize> = (i..5)
                .filter(|&j| {
                    !assigned[j] && (eigenvalues[j] - eigenvalues[i]).norm() <= CLUSTER_TOL * norm
                })
                .collect();
            let mean = group.iter().map(|&j| eigenvalues[j]).sum::<C64>() / group.len() as f64;
            let shifted = mc - Matrix5::<C64>::identity() * mean;
            let svd = shifted.svd(false, true);
            let v_t = svd
                .v_t
                .ok_or_else(|| Error::NotConverged("eigenvector SVD produced no V".into()))?;
            let mut order: Vec<usize> = (0..5).collect();
            order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
            for (k, &j) in group.iter().enumerate() {
                let v = v_t.row(order[k]).transpose().map(|c| c.conj());
                vectors.set_column(j, &v);
                assigned[j] = true;
            }
        }

        let lambda = Matrix5::from_diagonal(&eigenvalues);
        let residual = (mc * vectors - vectors * lambda).norm();
        if residual > EIGEN_RESIDUAL_TOL * norm * vectors.norm() {
            return Err(Error::NotConverged(format!(
                "eigenvector residual {residual:.3e} exceeds tolerance"
            )));
        }
        let inverse = vectors.try_inverse().ok_or_else(|| {
            Error::NotConverged("generator is defective (singular eigenvector matrix)".into())
        })?;
        let reconstruction = (vectors * lambda * inverse - mc).norm();
        if reconstruction > EIGEN_RESIDUAL_TOL * norm {
            return Err(Error::NotConverged(format!(
                "eigen-decomposition reconstruction residual {:.3e} exceeds tolerance",
                reconstruction / norm
            )));
        }
        Ok(Propagator {
            generator,
            eigenvalues,
            vectors,
            inverse,
        })
    }

    pub fn generator(&self) -> &Matrix5<f64> {
        &self.generator
    }

    /// Eigenvalues in MHz.
    pub fn eigenvalues(&self) -> &Vector5<C64> {
        &self.eigenvalues
    }

    /// Modal coefficients V⁻¹ p(0).
    pub fn coefficients(&self, p0: &Vector5<f64>) -> Vector5<C64> {
        self.inverse * p0.map(|v| C64::new(v, 0.0))
    }

    pub fn state_at(&self, coeffs: &Vector5<C64>, t_ns: f64) -> Vector5<f64> {
        let t = t_ns / NS_PER_US;
        let weighted = coeffs.zip_map(&self.eigenvalues, |c, l| c * (l * t).exp());
        (self.vectors * weighted).map(|z| z.re)
    }

    pub fn propagate(&self, p0: &Vector5<f64>, t_ns: f64) -> Vector5<f64> {
        if t_ns == 0.0 {
            return *p0;
        }
        self.state_at(&self.coefficients(p0), t_ns)
    }

    /// V⁻¹ (∂M/∂θ) V, the generator derivative in the eigenbasis.
    pub(crate) fn to_eigenbasis(&self, dm: &Matrix5<f64>) -> Matrix5<C64> {
        self.inverse * dm.map(|v| C64::new(v, 0.0)) * self.vectors
    }

    /// ∂p(t)/∂θ for a rate θ entering the generator linearly, with p(0) held fixed.
    ///
    /// Uses d exp(Mt) = V (G ∘ V⁻¹ dM V) V⁻¹ where G holds the divided
    /// differences of exp(λt) over the eigenvalues. Result is per MHz.
    pub(crate) fn sensitivity(
        &self,
        coeffs: &Vector5<C64>,
        dm_eigen: &Matrix5<C64>,
        t_ns: f64,
    ) -> Vector5<f64> {
        let t = t_ns / NS_PER_US;
        let exps = self.eigenvalues.map(|l| (l * t).exp());
        let mut w = Vector5::<C64>::zeros();
        for i in 0..5 {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..5 {
                let g = divided_exp(self.eigenvalues[i], self.eigenvalues[j], exps[i], exps[j], t);
                acc += g * dm_eigen[(i, j)] * coeffs[j];
            }
            w[i] = acc;
        }
        (self.vectors * w).map(|z| z.re)
    }
}

/// (e^{a t} − e^{b t}) / (a − b), continuous at a = b.
fn divided_exp(a: C64, b: C64, ea: C64, eb: C64, t: f64) -> C64 {
    let z = (a - b) * t;
    if z.norm() < 1e-3 {
        let series = C64::new(1.0, 0.0) + z / 2.0 + z * z / 6.0 + z * z * z / 24.0 + z * z * z * z / 120.0;
        eb * t * series
    } else {
        (ea - eb) / (a - b)
    }
}

/// exp(M t)·pop0 via the eigen-decomposition. `t_ns` in nanoseconds.
pub fn evolve(pop0: &LevelPopulations, rates: &RateSet, t_ns: f64) -> Result<LevelPopulations> {
    check_time(t_ns)?;
    let prop = Propagator::new(rates)?;
    if t_ns == 0.0 {
        return Ok(*pop0);
    }
    LevelPopulations::from_vector(prop.propagate(pop0.as_vector(), t_ns))
}

/// Same propagation with the fixed-step classical Runge-Kutta integrator.
pub fn evolve_rk4(pop0: &LevelPopulations, rates: &RateSet, t_ns: f64) -> Result<LevelPopulations> {
    check_time(t_ns)?;
    let m = generator_matrix(rates)?;
    LevelPopulations::from_vector(integrate_rk4(&m, pop0.as_vector(), t_ns))
}

fn check_time(t_ns: f64) -> Result<()> {
    ensure_finite("t", t_ns)?;
    if t_ns < 0.0 {
        return Err(Error::invalid(format!("evolution time must be >= 0, got {t_ns} ns")));
    }
    Ok(())
}

/// Lower bound on the step count, so sub-step durations still resolve
/// populations that start at zero.
pub const MIN_RK4_STEPS: usize = 8;

/// Fixed RK4 step in ns: min(1 ns, 0.1 / ρ), where ρ = 2·max|M_ii| bounds the
/// spectral radius of a zero-column-sum generator.
pub fn rk4_step_size(generator: &Matrix5<f64>) -> f64 {
    let max_rate_per_ns = 2.0
        * (0..5)
            .map(|i| generator[(i, i)].abs())
            .fold(0.0_f64, f64::max)
        / NS_PER_US;
    if max_rate_per_ns == 0.0 {
        1.0
    } else {
        (0.1 / max_rate_per_ns).min(1.0)
    }
}

pub(crate) fn integrate_rk4(m: &Matrix5<f64>, p0: &Vector5<f64>, t_ns: f64) -> Vector5<f64> {
    if t_ns == 0.0 {
        return *p0;
    }
    let h_max = rk4_step_size(m);
    let steps = ((t_ns / h_max).ceil() as usize).max(MIN_RK4_STEPS);
    let h = t_ns / steps as f64 / NS_PER_US;
    let mut p = *p0;
    for _ in 0..steps {
        let k1 = m * p;
        let k2 = m * (p + k1 * (0.5 * h));
        let k3 = m * (p + k2 * (0.5 * h));
        let k4 = m * (p + k3 * h);
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    p
}

/// Normalized null vector of the laser-on generator.
///
/// Errors with `IllConditioned` when the null space is not one-dimensional
/// (e.g. no spin mixing and no intersystem crossing).
pub fn steady_state(rates: &RateSet) -> Result<LevelPopulations> {
    if !(rates.k_e > 0.0 && rates.k_f > 0.0) {
        return Err(Error::invalid(format!(
            "steady state needs k_e > 0 and k_f > 0, got {} / {}",
            rates.k_e, rates.k_f
        )));
    }
    let m = generator_matrix(rates)?;
    LevelPopulations::from_vector(null_vector(&m)?)
}

pub(crate) fn null_vector(m: &Matrix5<f64>) -> Result<Vector5<f64>> {
    let svd = m.svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[3] <= 1e-10 * sv[0] {
        return Err(Error::IllConditioned(format!(
            "generator null space has dimension > 1 (singular values {:.3e}, {:.3e})",
            sv[3], sv[4]
        )));
    }
    // replace one balance equation by the normalization constraint
    let mut a = *m;
    a.row_mut(4).fill(1.0);
    let b = Vector5::new(0.0, 0.0, 0.0, 0.0, 1.0);
    a.lu()
        .solve(&b)
        .ok_or_else(|| Error::IllConditioned("normalized steady-state system is singular".into()))
}

/// Laser-off propagation, used for the dark wait after optical pumping.
pub(crate) fn evolve_dark(p0: &Vector5<f64>, rates: &RateSet, t_ns: f64) -> Result<Vector5<f64>> {
    check_time(t_ns)?;
    let prop = Propagator::from_generator(build_generator(rates, false))?;
    Ok(prop.propagate(p0, t_ns))
}
