use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Harmonics of one day, `2πi/86400` for `i = 1..=count`.
pub fn daily_harmonics(count: usize) -> Vec<f64> {
    (1..=count).map(|i| TAU * i as f64 / 86_400.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralComponent {
    /// rad/s
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
}

impl SpectralComponent {
    fn eval(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * t - self.phase).cos()
    }
}

/// A periodic model of a quantity in [0, 1]: a mean plus its most prominent
/// spectral components, sorted by descending amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FremenModel {
    mean: f64,
    components: Vec<SpectralComponent>,
}

impl FremenModel {
    pub fn new(mean: f64, mut components: Vec<SpectralComponent>) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::NonFinite("fremen mean"));
        }
        for c in &components {
            if !(c.frequency.is_finite() && c.amplitude.is_finite() && c.phase.is_finite()) {
                return Err(Error::NonFinite("spectral component"));
            }
            if c.amplitude < 0.0 {
                return Err(Error::invalid("negative spectral amplitude"));
            }
        }
        components.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude));
        Ok(Self { mean, components })
    }

    pub fn constant(mean: f64) -> Result<Self> {
        Self::new(mean, Vec::new())
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn components(&self) -> &[SpectralComponent] {
        &self.components
    }

    pub fn is_degenerate(&self) -> bool {
        self.components.is_empty()
    }

    /// Unclipped model value at epoch time `t`.
    pub fn value(&self, t: f64) -> f64 {
        self.mean + self.components.iter().map(|c| c.eval(t)).sum::<f64>()
    }

    /// Model value clipped to [0, 1].
    pub fn probability(&self, t: f64) -> f64 {
        self.value(t).clamp(0.0, 1.0)
    }
}

/// Fits a model to a sampled series. Series shorter than `2m + 1` yield a
/// mean-only model.
pub fn fit_fremen(times: &[f64], values: &[f64], candidates: &[f64], m: usize) -> Result<FremenModel> {
    if times.len() != values.len() {
        return Err(Error::invalid(format!(
            "{} timestamps for {} values",
            times.len(),
            values.len()
        )));
    }
    if times.iter().chain(values).chain(candidates).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fremen series"));
    }
    let all_times = phase_sums(times.iter().copied(), candidates);
    fit_sparse(
        times.iter().copied().zip(values.iter().copied()),
        times.len(),
        &all_times,
        candidates,
        m,
    )
}

/// `Σ_t e^{-iωt}` over `times` for every candidate ω.
pub(crate) fn phase_sums(times: impl Iterator<Item = f64> + Clone, candidates: &[f64]) -> Vec<(f64, f64)> {
    candidates
        .iter()
        .map(|&w| {
            times.clone().fold((0.0, 0.0), |(re, im), t| {
                let (s, c) = (w * t).sin_cos();
                (re + c, im - s)
            })
        })
        .collect()
}

/// Fit from the nonzero entries of a series of `n` samples; `all_times` are
/// the phase sums over every sample time, zeros included.
pub(crate) fn fit_sparse(
    entries: impl Iterator<Item = (f64, f64)> + Clone,
    n: usize,
    all_times: &[(f64, f64)],
    candidates: &[f64],
    m: usize,
) -> Result<FremenModel> {
    if n == 0 {
        return FremenModel::constant(0.0);
    }
    let nf = n as f64;
    let mean = entries.clone().map(|(_, v)| v).sum::<f64>() / nf;
    if n < 2 * m + 1 {
        return FremenModel::constant(mean);
    }
    let mut spectrum: Vec<SpectralComponent> = candidates
        .iter()
        .zip(all_times)
        .map(|(&w, &(s_re, s_im))| {
            let (re, im) = entries.clone().fold((0.0, 0.0), |(re, im), (t, v)| {
                let (s, c) = (w * t).sin_cos();
                (re + v * c, im - v * s)
            });
            let re = (re - mean * s_re) / nf;
            let im = (im - mean * s_im) / nf;
            SpectralComponent {
                frequency: w,
                amplitude: 2.0 * re.hypot(im),
                // c = |c| e^{-iφ} for a signal A cos(ωt - φ)
                phase: -im.atan2(re),
            }
        })
        .collect();
    // stable: equal amplitudes keep candidate order
    spectrum.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude));
    spectrum.truncate(m);
    FremenModel::new(mean, spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64, n: usize, step: f64) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * step).collect();
        let v = t.iter().map(|&t| f(t)).collect();
        (t, v)
    }

    #[test]
    fn constant_series_has_flat_spectrum() {
        let (t, v) = series(|_| 0.7, 144 * 3, 600.0);
        let m = fit_fremen(&t, &v, &daily_harmonics(24), 2).unwrap();
        assert!((m.mean() - 0.7).abs() < 1e-12);
        assert_eq!(m.components().len(), 2);
        assert!(m.components().iter().all(|c| c.amplitude <= 1e-9));
    }

    #[test]
    fn recovers_single_sinusoid() {
        let w = daily_harmonics(24);
        let (t, v) = series(|t| 0.5 + 0.3 * (w[1] * t).cos(), 144 * 4, 600.0);
        let m = fit_fremen(&t, &v, &w, 2).unwrap();
        let c = m.components()[0];
        assert_eq!(c.frequency, w[1]);
        assert!((c.amplitude - 0.3).abs() < 0.01);
        assert!(c.phase.abs() < 0.05);
        assert!((m.mean() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn recovers_phase_shift() {
        let w = daily_harmonics(24);
        let (t, v) = series(|t| 0.5 + 0.2 * (w[0] * t - 1.0).cos(), 144 * 3, 600.0);
        let m = fit_fremen(&t, &v, &w, 1).unwrap();
        let c = m.components()[0];
        assert!((c.phase - 1.0).abs() < 1e-6);
        for &t in &[100.0, 30_000.0, 70_000.0] {
            assert!((m.value(t) - (0.5 + 0.2 * (w[0] * t - 1.0).cos())).abs() < 1e-6);
        }
    }

    #[test]
    fn two_sinusoids_in_amplitude_order() {
        let w = daily_harmonics(24);
        let f = |t: f64| 0.5 + 0.15 * (w[0] * t).cos() + 0.3 * (w[3] * t).cos();
        let (t, v) = series(f, 144 * 3, 600.0);
        let m = fit_fremen(&t, &v, &w, 2).unwrap();
        assert_eq!(m.components()[0].frequency, w[3]);
        assert_eq!(m.components()[1].frequency, w[0]);
        assert!((m.components()[0].amplitude - 0.3).abs() < 0.01);
        assert!((m.components()[1].amplitude - 0.15).abs() < 0.01);
    }

    #[test]
    fn short_series_is_degenerate() {
        let m = fit_fremen(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 1.0, 0.0], &daily_harmonics(24), 2).unwrap();
        assert!(m.is_degenerate());
        assert_eq!(m.mean(), 0.5);
        assert_eq!(m.value(0.0), m.value(12_345.0));
    }

    #[test]
    fn probability_evaluation_and_clipping() {
        let c = SpectralComponent {
            frequency: 1e-3,
            amplitude: 0.4,
            phase: 0.3,
        };
        let m = FremenModel::new(0.5, vec![c]).unwrap();
        assert!((m.probability(300.0) - 0.9).abs() < 1e-12);
        assert!((m.probability(300.0 + std::f64::consts::PI * 1000.0) - 0.1).abs() < 1e-12);
        let hi = FremenModel::new(0.9, vec![SpectralComponent { amplitude: 0.4, ..c }]).unwrap();
        assert_eq!(hi.probability(300.0), 1.0);
    }
}
