//! Readout SNR, the resonant enhancement ζ and a photon-counting Monte Carlo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Expected detected photons for m_s = 0 (`n0`) and m_s = ±1 (`n1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountPair {
    pub n0: f64,
    pub n1: f64,
}

impl CountPair {
    pub fn new(n0: f64, n1: f64) -> Result<Self> {
        for (name, n) in [("n0", n0), ("n1", n1)] {
            ensure_finite(name, n)?;
            if n < 0.0 {
                return Err(Error::invalid(format!("{name} = {n} is negative")));
            }
        }
        Ok(CountPair { n0, n1 })
    }

    /// Counts for a bright level `n0` and contrast `c`.
    pub fn from_contrast(n0: f64, c: f64) -> Result<Self> {
        CountPair::new(n0, n0 * (1.0 - c))
    }
}

/// (n0 − n1)/√(n0 + n1).
pub fn snr_counts(p: CountPair) -> Result<f64> {
    let p = CountPair::new(p.n0, p.n1)?;
    let total = p.n0 + p.n1;
    if total <= 0.0 {
        return Err(Error::invalid("n0 + n1 must be > 0"));
    }
    Ok((p.n0 - p.n1) / total.sqrt())
}

/// (n0 − n1)/n0; negative when n1 > n0.
pub fn contrast(p: CountPair) -> Result<f64> {
    let p = CountPair::new(p.n0, p.n1)?;
    if p.n0 <= 0.0 {
        return Err(Error::invalid("contrast needs n0 > 0"));
    }
    Ok((p.n0 - p.n1) / p.n0)
}

/// √n0 · c/√(2 − c).
pub fn snr_contrast(n0: f64, c: f64) -> Result<f64> {
    ensure_positive("n0", n0)?;
    check_contrast(c)?;
    Ok(n0.sqrt() * c / (2.0 - c).sqrt())
}

fn check_contrast(c: f64) -> Result<f64> {
    ensure_finite("contrast", c)?;
    if c <= -1.0 || c > 1.0 {
        return Err(Error::invalid(format!("contrast {c} outside (-1, 1]")));
    }
    Ok(c)
}

/// Small-contrast enhancement ζ = √(N₀*/N₀) · C*/C.
pub fn enhancement(photon_ratio: f64, contrast_ratio: f64) -> Result<f64> {
    ensure_positive("photon_ratio", photon_ratio)?;
    ensure_positive("contrast_ratio", contrast_ratio)?;
    Ok(photon_ratio.sqrt() * contrast_ratio)
}

/// Ratio of full SNRs at the resonant and off-resonant operating points,
/// given the off-resonant contrast. Independent of the absolute count level.
pub fn enhancement_exact(photon_ratio: f64, contrast_ratio: f64, contrast_off: f64) -> Result<f64> {
    ensure_positive("photon_ratio", photon_ratio)?;
    ensure_positive("contrast_ratio", contrast_ratio)?;
    let c = check_contrast(contrast_off)?;
    if c == 0.0 {
        return Err(Error::invalid("off-resonant contrast must be nonzero"));
    }
    let c_on = check_contrast(c * contrast_ratio)?;
    Ok(snr_contrast(photon_ratio, c_on)? / snr_contrast(1.0, c)?)
}

/// Minimum number of trials accepted by [`monte_carlo`].
pub const MIN_TRIALS: u64 = 1000;
/// Mean below which Poisson draws use inversion; above it, a rounded normal.
pub const POISSON_INVERSION_LIMIT: f64 = 30.0;
const SHARD_TRIALS: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McReport {
    pub trials: u64,
    pub mean_diff: f64,
    pub var_diff: f64,
    pub empirical_snr: f64,
    pub seed: u64,
}

/// One Poisson(λ) draw: sequential inversion below
/// [`POISSON_INVERSION_LIMIT`], else ⌊λ + √λ·z + ½⌋ clipped at zero.
pub fn poisson_draw<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda < POISSON_INVERSION_LIMIT {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-lambda).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= lambda / k as f64;
            let next = cdf + p;
            if next == cdf {
                break;
            }
            cdf = next;
        }
        k
    } else {
        let z: f64 = rng.sample(StandardNormal);
        (lambda + lambda.sqrt() * z + 0.5).floor().max(0.0) as u64
    }
}

#[derive(Clone, Copy)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    const EMPTY: Moments = Moments { n: 0, mean: 0.0, m2: 0.0 };

    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
        }
    }
}

fn shard_seed(seed: u64, shard: u64) -> u64 {
    // splitmix64 of (seed, shard)
    let mut z = seed ^ shard.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws independent Poisson counts for both arms per trial and reports the
/// moments of their difference. Trials run in fixed-size shards with derived
/// seeds, merged in shard order, so the result does not depend on thread count.
pub fn monte_carlo(p: CountPair, trials: u64, seed: u64) -> Result<McReport> {
    let p = CountPair::new(p.n0, p.n1)?;
    if p.n0 + p.n1 <= 0.0 {
        return Err(Error::invalid("n0 + n1 must be > 0"));
    }
    if trials < MIN_TRIALS {
        return Err(Error::invalid(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let shards = trials.div_ceil(SHARD_TRIALS);
    let parts: Vec<Moments> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let n = SHARD_TRIALS.min(trials - s * SHARD_TRIALS);
            let mut rng = ChaCha8Rng::seed_from_u64(shard_seed(seed, s));
            let mut m = Moments::EMPTY;
            for _ in 0..n {
                let a = poisson_draw(&mut rng, p.n0) as f64;
                let b = poisson_draw(&mut rng, p.n1) as f64;
                m.push(a - b);
            }
            m
        })
        .collect();
    let total = parts.into_iter().fold(Moments::EMPTY, Moments::merge);
    let var_diff = total.m2 / (total.n - 1) as f64;
    let empirical_snr = if var_diff > 0.0 {
        total.mean / var_diff.sqrt()
    } else {
        0.0
    };
    Ok(McReport {
        trials,
        mean_diff: total.mean,
        var_diff,
        empirical_snr,
        seed,
    })
}
