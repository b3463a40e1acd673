//! Spectral and statistical post-processing of sampled waveforms.
//!
//! Harmonics are extracted by direct correlation with sine and cosine at
//! the target frequency, over windows that span a whole number of base
//! periods, so no leakage occurs and no window function is applied.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MIN_SAMPLES_PER_PERIOD: f64 = 64.0;

/// Harmonic magnitudes and phases of a periodic waveform.
///
/// `magnitudes[k - 1]` and `phases[k - 1]` belong to harmonic order `k`.
/// Phases use the sine convention: `A·sin(kωt + θ)` reports `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub base_frequency: f64,
    pub dc: f64,
    pub magnitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

impl Spectrum {
    pub fn fundamental(&self) -> f64 {
        self.magnitudes.first().copied().unwrap_or(0.0)
    }

    pub fn max_order(&self) -> usize {
        self.magnitudes.len()
    }

    /// `order,magnitude,phase` rows, one per harmonic.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("order,magnitude,phase\n");
        for (k, (m, p)) in self.magnitudes.iter().zip(&self.phases).enumerate() {
            let _ = writeln!(out, "{},{},{}", k + 1, m, p);
        }
        out
    }
}

fn check_window(len: usize, dt: f64, base_frequency: f64) -> Result<()> {
    if !(dt > 0.0 && base_frequency > 0.0) {
        return Err(Error::Precondition("sample interval and base frequency must be positive".into()));
    }
    let per_period = 1.0 / (base_frequency * dt);
    if per_period < MIN_SAMPLES_PER_PERIOD - 1e-9 {
        return Err(Error::Precondition(format!(
            "{per_period:.1} samples per period, need at least {MIN_SAMPLES_PER_PERIOD}"
        )));
    }
    let periods = len as f64 * dt * base_frequency;
    if periods < 1.0 - 1e-9 || (periods - periods.round()).abs() > 1e-6 * periods.max(1.0) {
        return Err(Error::Precondition(format!(
            "window covers {periods} base periods; an integer number (at least 1) is required"
        )));
    }
    Ok(())
}

/// Amplitude and sine-convention phase of one frequency component.
fn correlate(samples: &[f64], dt: f64, frequency: f64) -> (f64, f64) {
    let w = TAU * frequency * dt;
    let (mut c, mut s) = (0.0, 0.0);
    for (n, &x) in samples.iter().enumerate() {
        let (sn, cn) = (w * n as f64).sin_cos();
        c += x * cn;
        s += x * sn;
    }
    let scale = 2.0 / samples.len() as f64;
    let (c, s) = (c * scale, s * scale);
    (c.hypot(s), c.atan2(s))
}

/// Fundamental amplitude and phase of `samples` taken every `dt` seconds.
pub fn dft_fundamental(samples: &[f64], dt: f64, base_frequency: f64) -> Result<(f64, f64)> {
    check_window(samples.len(), dt, base_frequency)?;
    Ok(correlate(samples, dt, base_frequency))
}

/// Harmonics `1..=max_order` of `samples`.
pub fn spectrum(samples: &[f64], dt: f64, base_frequency: f64, max_order: usize) -> Result<Spectrum> {
    check_window(samples.len(), dt, base_frequency)?;
    let (magnitudes, phases) =
        (1..=max_order).map(|k| correlate(samples, dt, k as f64 * base_frequency)).unzip();
    let dc = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(Spectrum { base_frequency, dc, magnitudes, phases })
}

/// Total harmonic distortion over orders `2..=max_order`, relative to the fundamental.
pub fn thd(spectrum: &Spectrum, max_order: usize) -> Result<f64> {
    if max_order < 2 {
        return Err(Error::Precondition(format!("max_order must be at least 2, got {max_order}")));
    }
    if max_order > spectrum.max_order() {
        return Err(Error::Precondition(format!(
            "spectrum only holds {} orders, {max_order} requested",
            spectrum.max_order()
        )));
    }
    let fundamental = spectrum.fundamental();
    // Round-off floor of the correlation sums.
    let scale = spectrum.magnitudes.iter().fold(spectrum.dc.abs(), |a, &m| a.max(m));
    if !(fundamental > 1e-12 * scale) {
        return Err(Error::UndefinedThd);
    }
    let harmonics: f64 = spectrum.magnitudes[1..max_order].iter().map(|m| m * m).sum();
    Ok(harmonics.sqrt() / fundamental)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation of a point from the fitted line.
    pub max_residual: f64,
}

fn distinct_x(points: &[(f64, f64)]) -> Result<()> {
    let first = points.first().map(|p| p.0);
    if points.len() < 2 || points.iter().all(|p| Some(p.0) == first) {
        return Err(Error::Precondition("line fit needs at least two distinct x values".into()));
    }
    Ok(())
}

fn worst_residual(points: &[(f64, f64)], slope: f64, intercept: f64) -> f64 {
    points.iter().map(|&(x, y)| (y - (slope * x + intercept)).abs()).fold(0.0, f64::max)
}

/// Ordinary least-squares line.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<LineFit> {
    distinct_x(points)?;
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(LineFit { slope, intercept, max_residual: worst_residual(points, slope, intercept) })
}

/// Least-squares line constrained through the origin.
pub fn proportional_fit(points: &[(f64, f64)]) -> Result<LineFit> {
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    if points.is_empty() || sxx == 0.0 {
        return Err(Error::Precondition("proportional fit needs a non-zero x value".into()));
    }
    let slope = points.iter().map(|p| p.0 * p.1).sum::<f64>() / sxx;
    Ok(LineFit { slope, intercept: 0.0, max_residual: worst_residual(points, slope, 0.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ripple {
    pub peak_to_peak: f64,
    pub mean: f64,
}

pub fn ripple(series: &[f64]) -> Result<Ripple> {
    if series.is_empty() {
        return Err(Error::Precondition("ripple of an empty series".into()));
    }
    let (lo, hi) = series.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    Ok(Ripple { peak_to_peak: hi - lo, mean })
}

/// Whether consecutive values strictly increase (`+1`) or strictly decrease (`-1`).
pub fn is_strictly_monotone(values: &[f64], direction: f64) -> bool {
    values.windows(2).all(|w| (w[1] - w[0]) * direction > 0.0)
}
