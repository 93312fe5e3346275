//! Wavenumber band and inverse synthesis of time traces.

use super::traces::TraceSet;
use crate::error::{Error, Result};
use crate::scene::Pulse;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Uniform wavenumber samples `k_min = k_0 < … < k_{n−1} = k_max` (rad/m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    pub k_min: f64,
    pub k_max: f64,
    pub n_k: usize,
}

impl FrequencyBand {
    pub fn new(k_min: f64, k_max: f64, n_k: usize) -> Result<Self> {
        let b = FrequencyBand { k_min, k_max, n_k };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_min > 0.0 && self.k_max > self.k_min) {
            return Err(Error::param("band", "need 0 < k_min < k_max"));
        }
        if self.n_k < 2 {
            return Err(Error::param("n_k", "need at least 2 samples"));
        }
        Ok(())
    }

    /// Instantaneous frequencies of the chirp, `ω0 ± ατ`, as wavenumbers.
    pub fn swept(pulse: &Pulse, c0: f64, n_k: usize) -> Result<Self> {
        let sweep = pulse.chirp_rate * pulse.tau;
        FrequencyBand::new((pulse.omega0 - sweep) / c0, (pulse.omega0 + sweep) / c0, n_k)
    }

    /// The interval where `|X(c0 k)|` is at least `fraction` of its peak.
    pub fn from_pulse(pulse: &Pulse, c0: f64, fraction: f64, n_k: usize) -> Result<Self> {
        let top = 2.0 * (pulse.omega0 + pulse.chirp_rate * pulse.tau) + 8.0 * std::f64::consts::PI / pulse.tau;
        let m = 2000;
        let mag: Vec<f64> = (1..=m)
            .map(|i| pulse.spectrum(top * i as f64 / m as f64).norm())
            .collect();
        let peak = mag.iter().cloned().fold(0.0, f64::max);
        let first = mag.iter().position(|v| *v >= fraction * peak).unwrap_or(0);
        let last = mag.iter().rposition(|v| *v >= fraction * peak).unwrap_or(m - 1);
        let w = |i: usize| top * (i + 1) as f64 / m as f64;
        FrequencyBand::new(w(first) / c0, w(last) / c0, n_k)
    }

    pub fn step(&self) -> f64 {
        (self.k_max - self.k_min) / (self.n_k - 1) as f64
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n_k).map(|i| self.k_min + i as f64 * self.step()).collect()
    }

    /// Trapezoid weights on [`FrequencyBand::wavenumbers`].
    pub fn weights(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.n_k)
            .map(|i| if i == 0 || i + 1 == self.n_k { 0.5 * h } else { h })
            .collect()
    }
}

/// Band-limited inverse transform
/// `u(t) = (c0/2π) ∫_{k_min}^{k_max} v(k) exp(−i k c0 t) dk` by the
/// trapezoid rule, sampled at `t = k·dt` for `t < t_max` (seconds).
///
/// `fields[n][i]` is the field of antenna `n` at the i-th wavenumber.
/// Returns complex traces.
pub fn synthesize_traces(
    fields: &[Vec<Complex64>],
    positions: &[f64],
    band: &FrequencyBand,
    c0: f64,
    dt: f64,
    t_max: f64,
) -> Result<TraceSet> {
    if fields.len() != positions.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} field rows for {} antennas",
            fields.len(),
            positions.len()
        )));
    }
    if fields.iter().any(|f| f.len() != band.n_k) {
        return Err(Error::ShapeMismatch("field rows must have n_k entries".into()));
    }
    if !(dt > 0.0 && t_max > 0.0) {
        return Err(Error::param("dt", "time step and record length must be positive"));
    }
    let ks = band.wavenumbers();
    let ws = band.weights();
    let samples = (t_max / dt).ceil() as usize;
    let scale = c0 / (2.0 * std::f64::consts::PI);
    let mut re = Vec::with_capacity(fields.len());
    let mut im = Vec::with_capacity(fields.len());
    for row in fields {
        let weighted: Vec<Complex64> = row.iter().zip(&ws).map(|(v, w)| v * (w * scale)).collect();
        let mut r = Vec::with_capacity(samples);
        let mut i_ = Vec::with_capacity(samples);
        for s in 0..samples {
            let t = s as f64 * dt;
            let u: Complex64 = weighted
                .iter()
                .zip(&ks)
                .map(|(v, k)| v * Complex64::from_polar(1.0, -k * c0 * t))
                .sum();
            r.push(u.re);
            i_.push(u.im);
        }
        re.push(r);
        im.push(i_);
    }
    TraceSet::new(dt, 0.0, positions.to_vec(), re, Some(im))
}

#[cfg(test)]
mod tests {
    use super::*;

    const C0: f64 = 299_792_458.0;

    #[test]
    fn band_brackets_the_carrier() {
        let p = Pulse::standard();
        let b = FrequencyBand::from_pulse(&p, C0, 0.05, 64).unwrap();
        let k0 = p.omega0 / C0;
        assert!(b.k_min < k0 && k0 < b.k_max, "{b:?}");
        // Instantaneous frequencies span ω0 ± ατ.
        assert!(b.k_min < (p.omega0 - 0.9 * p.chirp_rate * p.tau) / C0);
        assert!(b.k_max > (p.omega0 + 0.9 * p.chirp_rate * p.tau) / C0);
        assert!((b.weights().iter().sum::<f64>() - (b.k_max - b.k_min)).abs() < 1e-12);
        let s = FrequencyBand::swept(&p, C0, 32).unwrap();
        // (1.885e9 ∓ 0.9425e9) / c0
        assert!((s.k_min - 3.143842).abs() < 1e-6 && (s.k_max - 9.431525).abs() < 1e-6, "{s:?}");
    }

    #[test]
    fn zero_fields_zero_traces() {
        let b = FrequencyBand::new(1.0, 2.0, 8).unwrap();
        let t = synthesize_traces(&[vec![Complex64::new(0.0, 0.0); 8]], &[0.0], &b, C0, 1e-10, 1e-8).unwrap();
        assert!(t.re[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn phase_ramp_shifts_trace() {
        let b = FrequencyBand::new(3.0, 9.0, 256).unwrap();
        let dt = 1e-10;
        let t0 = 40.0 * dt;
        let flat = vec![Complex64::new(1.0, 0.0); 256];
        let shifted: Vec<Complex64> = b
            .wavenumbers()
            .iter()
            .map(|k| Complex64::from_polar(1.0, k * C0 * t0))
            .collect();
        let a = synthesize_traces(&[flat], &[0.0], &b, C0, dt, 2e-8).unwrap();
        let s = synthesize_traces(&[shifted], &[0.0], &b, C0, dt, 2e-8).unwrap();
        let argmax = |v: &[f64]| (0..v.len()).max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs())).unwrap();
        let ia = argmax(&a.re[0]);
        let is = argmax(&s.re[0]);
        assert!((is as f64 - (ia as f64 + 40.0)).abs() <= 1.0, "{ia} {is}");
    }
}
