//! Normalized temporal envelopes on a uniform grid of time bins.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Temporal mode sampled at bin centers `t_k = t0 + (k + 1/2) dt`, normalized
/// so that `sum |u_k|^2 dt = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalMode {
    samples: Vec<Complex64>,
    dt: f64,
}

const NORM_TOL: f64 = 1e-9;

impl TemporalMode {
    /// Wraps samples that are already normalized.
    pub fn new(samples: Vec<Complex64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        if samples.is_empty() {
            return Err(invalid("temporal mode has no samples"));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("temporal mode has non-finite samples"));
        }
        let norm: f64 = samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt;
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(invalid(format!(
                "temporal mode is not normalized (sum |u|^2 dt = {norm})"
            )));
        }
        Ok(TemporalMode { samples, dt })
    }

    /// Normalizes arbitrary nonzero samples.
    pub fn normalized(samples: Vec<Complex64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        let norm: f64 = samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt;
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(invalid("cannot normalize a zero or non-finite envelope"));
        }
        let s = 1.0 / norm.sqrt();
        TemporalMode::new(samples.into_iter().map(|z| z * s).collect(), dt)
    }

    pub fn from_real(samples: &[f64], dt: f64) -> Result<Self> {
        TemporalMode::normalized(samples.iter().map(|&x| Complex64::new(x, 0.0)).collect(), dt)
    }

    /// Gaussian envelope whose intensity `|u|^2` has the given FWHM, on `n`
    /// bins covering `[0, duration)`.
    pub fn gaussian(n: usize, duration: f64, center: f64, fwhm: f64) -> Result<Self> {
        if n == 0 || !(duration > 0.0) || !(fwhm > 0.0) {
            return Err(invalid("gaussian mode needs n > 0, duration > 0 and fwhm > 0"));
        }
        let dt = duration / n as f64;
        let samples = (0..n)
            .map(|k| {
                let t = (k as f64 + 0.5) * dt;
                let x = (t - center) / fwhm;
                Complex64::new((-2.0 * std::f64::consts::LN_2 * x * x).exp(), 0.0)
            })
            .collect();
        TemporalMode::normalized(samples, dt)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn is_real(&self) -> bool {
        self.samples.iter().all(|z| z.im == 0.0)
    }

    pub fn real_samples(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.re).collect()
    }

    /// Bin amplitudes `u_k sqrt(dt)`, a unit vector.
    pub fn bin_amplitudes(&self) -> Vec<Complex64> {
        let s = self.dt.sqrt();
        self.samples.iter().map(|z| z * s).collect()
    }

    /// Inner product `sum conj(self_k) other_k dt`.
    pub fn overlap(&self, other: &TemporalMode) -> Result<Complex64> {
        if self.len() != other.len() || (self.dt - other.dt).abs() > 1e-12 * self.dt {
            return Err(crate::Error::GridMismatch(format!(
                "modes on different grids ({} bins, dt {}) vs ({} bins, dt {})",
                self.len(),
                self.dt,
                other.len(),
                other.dt
            )));
        }
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.dt)
    }

    /// Multiplies by a global phase factor.
    pub fn with_phase(&self, phi: f64) -> TemporalMode {
        let f = Complex64::from_polar(1.0, phi);
        TemporalMode {
            samples: self.samples.iter().map(|z| z * f).collect(),
            dt: self.dt,
        }
    }

    /// Linear interpolation onto `n` bins spanning the same window, then
    /// renormalized.
    pub fn resample(&self, n: usize) -> Result<TemporalMode> {
        let duration = self.dt * self.len() as f64;
        let samples = resample_bins(&self.samples, n);
        TemporalMode::normalized(samples, duration / n as f64)
    }
}

/// Linear interpolation of bin-centered samples onto `n` bins over the same
/// window. Values beyond the outermost centers are held constant.
pub(crate) fn resample_bins(samples: &[Complex64], n: usize) -> Vec<Complex64> {
    let m = samples.len();
    (0..n)
        .map(|k| {
            // Position in units of the source bins, measured from bin centers.
            let pos = (k as f64 + 0.5) * m as f64 / n as f64 - 0.5;
            if pos <= 0.0 {
                samples[0]
            } else if pos >= (m - 1) as f64 {
                samples[m - 1]
            } else {
                let i = pos.floor() as usize;
                let f = pos - i as f64;
                samples[i] * (1.0 - f) + samples[i + 1] * f
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_mode_is_normalized_and_centered() {
        let m = TemporalMode::gaussian(64, 1.0, 0.5, 0.15).unwrap();
        let norm: f64 = m.samples().iter().map(|z| z.norm_sqr()).sum::<f64>() * m.dt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(m.is_real());
        let peak = m.real_samples().iter().cloned().fold(0.0, f64::max);
        assert_eq!(peak, m.samples()[31].re.max(m.samples()[32].re));
    }

    #[test]
    fn rejects_unnormalized() {
        let s = vec![Complex64::new(1.0, 0.0); 4];
        assert!(TemporalMode::new(s.clone(), 1.0).is_err());
        assert!(TemporalMode::new(s, 0.25).is_ok());
        assert!(TemporalMode::normalized(vec![Complex64::new(0.0, 0.0); 3], 1.0).is_err());
    }

    #[test]
    fn overlap_and_phase() {
        let m = TemporalMode::gaussian(32, 1.0, 0.5, 0.2).unwrap();
        assert!((m.overlap(&m).unwrap().re - 1.0).abs() < 1e-12);
        let p = m.with_phase(0.7);
        assert!((m.overlap(&p).unwrap().arg() - 0.7).abs() < 1e-12);
        let other = TemporalMode::gaussian(16, 1.0, 0.5, 0.2).unwrap();
        assert!(m.overlap(&other).is_err());
    }

    #[test]
    fn resample_preserves_shape() {
        let m = TemporalMode::gaussian(64, 1.0, 0.5, 0.2).unwrap();
        let fine = TemporalMode::gaussian(128, 1.0, 0.5, 0.2).unwrap();
        let r = m.resample(128).unwrap();
        assert!(r.overlap(&fine).unwrap().norm() > 0.9999);
    }
}
