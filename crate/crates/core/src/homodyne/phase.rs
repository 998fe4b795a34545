use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of the record at each end marked low-confidence.
pub const EDGE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecovery {
    /// Unwrapped phase, radians.
    pub phases: Vec<f64>,
    /// Instantaneous fringe amplitude `|f + i H[f]|`.
    pub amplitude: Vec<f64>,
    /// Samples within [`EDGE_FRACTION`] of either end, where the discrete
    /// Hilbert transform is least reliable.
    pub low_confidence: Vec<bool>,
}

/// Analytic signal `f + i H[f]` of a mean-removed real sequence.
fn analytic_signal(f: &[f64]) -> Vec<Complex64> {
    let n = f.len();
    let mean = f.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x - mean, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    let half = n / 2;
    for (k, z) in buf.iter_mut().enumerate().skip(1) {
        if k < half || (k == half && n % 2 == 1) {
            *z *= 2.0;
        } else if k > half {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|z| z * scale).collect()
}

fn unwrap(wrapped: &[f64]) -> Vec<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = Vec::with_capacity(wrapped.len());
    let mut offset = 0.0;
    let mut prev = wrapped[0];
    out.push(prev);
    for &p in &wrapped[1..] {
        let mut d = p - prev;
        if d > std::f64::consts::PI {
            offset -= two_pi;
            d -= two_pi;
        } else if d < -std::f64::consts::PI {
            offset += two_pi;
            d += two_pi;
        }
        debug_assert!(d.abs() <= std::f64::consts::PI);
        out.push(p + offset);
        prev = p;
    }
    out
}

/// Recovers the fringe phase `φ_i = atan2(Im H[f]_i, f_i)` and unwraps it.
pub fn recover_phase(fringes: &[f64]) -> Result<PhaseRecovery> {
    let n = fringes.len();
    if n < 8 {
        return Err(Error::PhaseUndefined(format!("need at least 8 fringe samples, got {n}")));
    }
    if fringes.iter().any(|x| !x.is_finite()) {
        return Err(Error::PhaseUndefined("fringe record has non-finite values".into()));
    }
    let mean = fringes.iter().sum::<f64>() / n as f64;
    let rms = (fringes.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let scale = fringes.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(rms > 1e-9 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::PhaseUndefined("fringe amplitude is zero".into()));
    }
    let z = analytic_signal(fringes);
    let wrapped: Vec<f64> = z.iter().map(|z| z.im.atan2(z.re)).collect();
    let phases = unwrap(&wrapped);
    let span = (phases[n - 1] - phases[0]).abs();
    let full = 2.0 * std::f64::consts::PI * (n - 1) as f64 / n as f64;
    if span < full - 0.1 {
        return Err(Error::PhaseUndefined(format!(
            "fringe record spans {span:.3} rad, less than one full period"
        )));
    }
    let edge = (EDGE_FRACTION * n as f64).ceil() as usize;
    let low_confidence = (0..n).map(|i| i < edge || i >= n - edge).collect();
    Ok(PhaseRecovery {
        phases,
        amplitude: z.iter().map(|z| z.norm()).collect(),
        low_confidence,
    })
}
