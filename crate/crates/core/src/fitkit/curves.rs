//! Seeded fits for the individual measurement types.

use std::f64::consts::PI;

use super::engine::{FitResult, NamedValues};
use super::models::{fit_least_squares, CurveFamily};
use crate::error::{Error, Result};
use crate::series::{Spectrum, TimeTrace};

/// Fitted amplitude must exceed this multiple of the residual RMS.
pub const PEAK_SIGNIFICANCE: f64 = 3.0;
/// Relative tau separation below which a double exponential is degenerate.
pub const TAU_SEPARATION: f64 = 0.05;

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust white-noise estimate from the median absolute first difference.
pub(crate) fn noise_sigma(values: &[f64]) -> f64 {
    if values.len() < 3 {
        return 0.0;
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    median(&diffs) / 0.6745 / 2f64.sqrt()
}

fn is_flat(values: &[f64]) -> bool {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    hi - lo <= 1e-12 * hi.abs().max(lo.abs())
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Full width at half height of the excursion at `peak` above `base`, linearly
/// interpolated between samples; `x` must be sorted.
fn half_height_width(x: &[f64], excursion: &[f64], peak: usize) -> f64 {
    let half = 0.5 * excursion[peak];
    let crossing = |a: usize, b: usize| {
        let (ya, yb) = (excursion[a], excursion[b]);
        if ya == yb {
            x[a]
        } else {
            x[a] + (half - ya) * (x[b] - x[a]) / (yb - ya)
        }
    };
    let mut left = x[0];
    let mut i = peak;
    while i > 0 {
        if excursion[i - 1] <= half {
            left = crossing(i - 1, i);
            break;
        }
        i -= 1;
    }
    let mut right = x[x.len() - 1];
    let mut j = peak;
    while j + 1 < x.len() {
        if excursion[j + 1] <= half {
            right = crossing(j, j + 1);
            break;
        }
        j += 1;
    }
    let min_width = 2.0 * (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    (right - left).max(min_width)
}

/// Runs the fit from each start and keeps the lowest residual.
fn best_of(
    family: CurveFamily,
    x: &[f64],
    y: &[f64],
    starts: Vec<NamedValues>,
) -> Result<FitResult> {
    let mut best: Option<FitResult> = None;
    let mut last_err = None;
    for start in starts {
        match fit_least_squares(family, x, y, &start) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.residual_norm < b.residual_norm) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some(fit), _) => Ok(fit),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::invalid("no starting point")),
    }
}

/// Reorders `result` so the `first`-suffixed parameter block holds the
/// smaller value of `key`.
fn order_pair(result: &mut FitResult, stems: &[&str], key: &str) {
    let k1 = result.param(&format!("{key}1"));
    let k2 = result.param(&format!("{key}2"));
    if k1 <= k2 {
        return;
    }
    let swap = |values: &mut NamedValues| {
        for stem in stems {
            let (a, b) = (format!("{stem}1"), format!("{stem}2"));
            let (va, vb) = (values.value(&a), values.value(&b));
            values.set(&a, vb);
            values.set(&b, va);
        }
    };
    swap(&mut result.params);
    if let Some(se) = result.stderr.as_mut() {
        swap(se);
    }
}

fn single_peak(family: CurveFamily, s: &Spectrum) -> Result<FitResult> {
    let (x, y) = (s.abscissa(), s.intensity());
    if is_flat(y) {
        return Err(Error::NoPeakFound("spectrum is flat".into()));
    }
    let offset = median(y);
    let peak = argmax(y);
    let height = y[peak] - offset;
    if height <= 0.0 {
        return Err(Error::NoPeakFound("no sample rises above the median".into()));
    }
    let span = x[x.len() - 1] - x[0];
    let excursion: Vec<f64> = y.iter().map(|v| v - offset).collect();
    // area per unit (height·fwhm) for each lineshape
    let shape_area = match family {
        CurveFamily::Lorentzian => PI / 2.0,
        _ => (PI / (4.0 * std::f64::consts::LN_2)).sqrt(),
    };
    let start = |fwhm: f64| {
        NamedValues::from_pairs([
            ("center", x[peak]),
            ("fwhm", fwhm),
            ("area", height * fwhm * shape_area),
            ("offset", offset),
        ])
    };
    let starts = vec![start(0.5 * span), start(half_height_width(x, &excursion, peak))];
    let mut fit = best_of(family, x, y, starts)?;

    let center = fit.param("center");
    let fwhm = fit.param("fwhm");
    let amplitude = fit.param("area") / (fwhm * shape_area);
    fit.derived.set("amplitude", amplitude);
    if !(x[0]..=x[x.len() - 1]).contains(&center) {
        return Err(Error::NoPeakFound(format!("fitted center {center} outside the data")));
    }
    if amplitude < PEAK_SIGNIFICANCE * fit.rms() || amplitude <= 0.0 {
        return Err(Error::NoPeakFound(format!(
            "amplitude {amplitude:.3e} below {PEAK_SIGNIFICANCE}x residual RMS {:.3e}",
            fit.rms()
        )));
    }
    Ok(fit)
}

/// Lorentzian line with area parameterization: {center, fwhm, area, offset}.
pub fn fit_lorentzian(s: &Spectrum) -> Result<FitResult> {
    single_peak(CurveFamily::Lorentzian, s)
}

/// Gaussian line with area parameterization: {center, fwhm, area, offset}.
pub fn fit_gaussian(s: &Spectrum) -> Result<FitResult> {
    single_peak(CurveFamily::Gaussian, s)
}

/// Two Gaussian lines on a shared offset, ordered by ascending center.
pub fn fit_gaussian_pair(s: &Spectrum) -> Result<FitResult> {
    let (x, y) = (s.abscissa(), s.intensity());
    if is_flat(y) {
        return Err(Error::NoPeakFound("spectrum is flat".into()));
    }
    let offset = y.iter().copied().fold(f64::INFINITY, f64::min);
    let g = (PI / (4.0 * std::f64::consts::LN_2)).sqrt();
    let excursion: Vec<f64> = y.iter().map(|v| v - offset).collect();
    let p1 = argmax(&excursion);
    let w1 = half_height_width(x, &excursion, p1);
    let h1 = excursion[p1];
    let first = [x[p1], w1, h1 * w1 * g];
    let remainder: Vec<f64> = x
        .iter()
        .zip(&excursion)
        .map(|(xi, e)| e - CurveFamily::Gaussian.value(*xi, &[first[0], first[1], first[2], 0.0]))
        .collect();
    let p2 = argmax(&remainder);
    let h2 = remainder[p2];
    if h2 <= 0.0 {
        return Err(Error::NoPeakFound("no second component".into()));
    }
    let w2 = half_height_width(x, &remainder, p2);
    let start = NamedValues::from_pairs([
        ("center1", first[0]),
        ("fwhm1", first[1]),
        ("area1", first[2]),
        ("center2", x[p2]),
        ("fwhm2", w2),
        ("area2", h2 * w2 * g),
        ("offset", offset),
    ]);
    let mut fit = fit_least_squares(CurveFamily::GaussianPair, x, y, &start)?;
    order_pair(&mut fit, &["center", "fwhm", "area"], "center");
    for k in ["1", "2"] {
        let amp = fit.param(&format!("area{k}")) / (fit.param(&format!("fwhm{k}")) * g);
        if amp < PEAK_SIGNIFICANCE * fit.rms() {
            return Err(Error::NoPeakFound(format!("component {k} below the noise")));
        }
    }
    Ok(fit)
}

/// Two inverted Lorentzians on a constant baseline (ODMR), centers ascending.
pub fn fit_odmr(s: &Spectrum) -> Result<FitResult> {
    let (x, y) = (s.abscissa(), s.intensity());
    let n = x.len();
    if is_flat(y) {
        return Err(Error::NoPeakFound("spectrum is flat".into()));
    }
    let baseline = median(y);
    let sigma = noise_sigma(y);
    // 5-point moving average for locating dips
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(n);
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let dips: Vec<f64> = smooth.iter().map(|v| baseline - v).collect();
    let d1 = argmax(&dips);
    let w1 = half_height_width(x, &dips, d1);
    let excluded = |xi: f64| (xi - x[d1]).abs() < 2.0 * w1;
    let d2 = (0..n)
        .filter(|&i| !excluded(x[i]))
        .max_by(|&a, &b| dips[a].total_cmp(&dips[b]))
        .ok_or_else(|| Error::NoPeakFound("single dip fills the spectrum".into()))?;
    if dips[d1] <= PEAK_SIGNIFICANCE * sigma || dips[d2] <= PEAK_SIGNIFICANCE * sigma {
        return Err(Error::NoPeakFound("fewer than two dips above the noise".into()));
    }
    let w2 = half_height_width(x, &dips, d2);
    let start = NamedValues::from_pairs([
        ("center1", x[d1]),
        ("center2", x[d2]),
        ("depth1", dips[d1] / baseline),
        ("depth2", dips[d2] / baseline),
        ("fwhm1", w1),
        ("fwhm2", w2),
        ("baseline", baseline),
    ]);
    let mut fit = match fit_least_squares(CurveFamily::OdmrDoublet, x, y, &start) {
        Err(Error::IllConditioned(m)) => {
            return Err(Error::NoPeakFound(format!("second dip not identifiable: {m}")))
        }
        other => other?,
    };
    order_pair(&mut fit, &["center", "depth", "fwhm"], "center");
    let b = fit.param("baseline");
    for k in ["1", "2"] {
        let c = fit.param(&format!("center{k}"));
        let depth = fit.param(&format!("depth{k}"));
        let se = fit.stderr_of(&format!("depth{k}")).unwrap_or(f64::INFINITY);
        if !(x[0]..=x[n - 1]).contains(&c)
            || depth * b < PEAK_SIGNIFICANCE * fit.rms().max(sigma)
            || depth < PEAK_SIGNIFICANCE * se
        {
            return Err(Error::NoPeakFound(format!("dip {k} is not significant")));
        }
    }
    Ok(fit)
}

/// Exponentially damped cosine (Rabi oscillation); reports pi_time = period/2.
pub fn fit_rabi(t: &TimeTrace) -> Result<FitResult> {
    let (x, y) = (t.times(), t.values());
    let n = x.len();
    if n < CurveFamily::DampedCosine.param_count() + 1 {
        return Err(Error::invalid(format!("{n} samples are too few for a Rabi fit")));
    }
    if is_flat(y) {
        return Err(Error::NoPeakFound("trace is flat".into()));
    }
    let span = x[n - 1] - x[0];
    let mean = y.iter().sum::<f64>() / n as f64;
    // dominant bin of the discrete spectrum at frequencies k/span
    let mut best = (0usize, 0.0_f64, 0.0_f64, 0.0_f64);
    for k in 1..=n / 2 {
        let f = k as f64 / span;
        let (mut re, mut im) = (0.0, 0.0);
        for (&ti, &yi) in x.iter().zip(y) {
            let (s, c) = (2.0 * PI * f * ti).sin_cos();
            re += (yi - mean) * c;
            im -= (yi - mean) * s;
        }
        let power = re * re + im * im;
        if power > best.1 {
            best = (k, power, re, im);
        }
    }
    let (k, power, re, im) = best;
    if k == 0 || power == 0.0 {
        return Err(Error::NoPeakFound("no oscillation in the trace".into()));
    }
    let period = span / k as f64;
    if span < 2.0 * period {
        return Err(Error::invalid(format!(
            "trace spans {span} but needs two periods of the {period} seed"
        )));
    }
    let start = NamedValues::from_pairs([
        ("amplitude", 2.0 * power.sqrt() / n as f64),
        ("period", period),
        ("phase", im.atan2(re)),
        ("decay_time", span),
        ("offset", mean),
    ]);
    let mut fit = fit_least_squares(CurveFamily::DampedCosine, x, y, &start)?;
    let amplitude = fit.param("amplitude");
    fit.derived.set("pi_time", fit.param("period") / 2.0);
    if amplitude < PEAK_SIGNIFICANCE * fit.rms() {
        return Err(Error::NoPeakFound(format!(
            "oscillation amplitude {amplitude:.3e} below the noise floor"
        )));
    }
    Ok(fit)
}

/// Least-squares line through (x, ln y) for the points with y > 0: (slope, intercept).
fn log_linear(points: impl Iterator<Item = (f64, f64)>) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = points.filter(|(_, y)| *y > 0.0).map(|(x, y)| (x, y.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// offset + a1·e^(−t/tau1) + a2·e^(−t/tau2) with tau1 ≥ tau2.
pub fn fit_double_exponential(t: &TimeTrace) -> Result<FitResult> {
    let (x, y) = (t.times(), t.values());
    let n = x.len();
    if let Some(v) = y.iter().find(|v| **v < 0.0) {
        return Err(Error::invalid(format!("decay trace has negative value {v}")));
    }
    if n < 6 {
        return Err(Error::invalid(format!("{n} samples are too few for two exponentials")));
    }
    if is_flat(y) {
        return Err(Error::NoPeakFound("trace is flat".into()));
    }
    let span = x[n - 1] - x[0];
    let tail = &y[n - (n / 10).max(1)..];
    let offset = tail.iter().sum::<f64>() / tail.len() as f64;
    let x0 = x[0];

    let slow = log_linear(
        x.iter()
            .zip(y)
            .skip(n / 4)
            .take(n / 2)
            .map(|(xi, yi)| (xi - x0, yi - offset)),
    );
    let (mut tau1, mut a1) = match slow {
        Some((slope, icpt)) if slope < 0.0 => (-1.0 / slope, icpt.exp()),
        _ => (span / 3.0, 0.5 * (y[0] - offset)),
    };
    if !(tau1.is_finite() && a1.is_finite()) {
        tau1 = span / 3.0;
        a1 = 0.5 * (y[0] - offset);
    }
    let fast = log_linear(x.iter().zip(y).take((n / 8).max(4)).map(|(xi, yi)| {
        let xr = xi - x0;
        (xr, yi - offset - a1 * (-xr / tau1).exp())
    }));
    let (mut tau2, mut a2) = match fast {
        Some((slope, icpt)) if slope < 0.0 && -1.0 / slope < tau1 => (-1.0 / slope, icpt.exp()),
        _ => (tau1 / 5.0, 0.3 * (y[0] - offset)),
    };
    if !(tau2.is_finite() && a2.is_finite()) {
        tau2 = tau1 / 5.0;
        a2 = 0.3 * (y[0] - offset);
    }
    // amplitudes are referred to t = 0, not to the first sample
    let start = NamedValues::from_pairs([
        ("a1", a1 * (x0 / tau1).exp()),
        ("tau1", tau1),
        ("a2", a2 * (x0 / tau2).exp()),
        ("tau2", tau2),
        ("offset", offset),
    ]);
    let mut fit = fit_least_squares(CurveFamily::DoubleExponential, x, y, &start)?;
    order_pair_desc_tau(&mut fit);
    let (t1, t2) = (fit.param("tau1"), fit.param("tau2"));
    if t1 - t2 < TAU_SEPARATION * t1 {
        return Err(Error::IllConditioned(format!(
            "decay times {t1:.4} and {t2:.4} are within {:.0}%",
            TAU_SEPARATION * 100.0
        )));
    }
    Ok(fit)
}

fn order_pair_desc_tau(fit: &mut FitResult) {
    if fit.param("tau1") >= fit.param("tau2") {
        return;
    }
    let swap = |v: &mut NamedValues| {
        let (a1, t1, a2, t2) = (v.value("a1"), v.value("tau1"), v.value("a2"), v.value("tau2"));
        v.set("a1", a2);
        v.set("tau1", t2);
        v.set("a2", a1);
        v.set("tau2", t1);
    };
    swap(&mut fit.params);
    if let Some(se) = fit.stderr.as_mut() {
        swap(se);
    }
}

/// Saturation curve I(P) = i_inf·P/(P + p_sat) + background_slope·P.
///
/// Powers in mW, counts in kHz. A p_sat whose standard error exceeds its
/// value (e.g. linear data) is reported as `IllConditioned`.
pub fn fit_saturation(powers: &[f64], counts: &[f64]) -> Result<FitResult> {
    if powers.len() != counts.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} powers vs {} counts",
            powers.len(),
            counts.len()
        )));
    }
    if powers.len() < 4 {
        return Err(Error::invalid("saturation fit needs at least 4 points"));
    }
    if let Some(p) = powers.iter().find(|p| !(**p > 0.0)) {
        return Err(Error::invalid(format!("power {p} mW is not positive")));
    }
    let i_max = counts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = NamedValues::from_pairs([
        ("i_inf", i_max),
        ("p_sat", median(powers)),
        ("background_slope", 0.0),
    ]);
    let fit = match fit_least_squares(CurveFamily::Saturation, powers, counts, &start) {
        Err(Error::FitNotConverged(best)) => {
            return Err(Error::IllConditioned(format!(
                "saturation power not constrained by the data (p_sat drifted to {:.3e})",
                best.param("p_sat")
            )))
        }
        other => other?,
    };
    let p_sat = fit.param("p_sat");
    if let Some(se) = fit.stderr_of("p_sat") {
        if se > p_sat {
            return Err(Error::IllConditioned(format!(
                "p_sat = {p_sat:.3e} with standard error {se:.3e}"
            )));
        }
    }
    Ok(fit)
}
