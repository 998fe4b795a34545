use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::TemporalMode;

/// `q = sum_k y_k u_k dt`, the projection of one trial onto a real mode.
pub fn matched_filter_quadrature(y: &[f64], mode: &TemporalMode) -> Result<f64> {
    if y.len() != mode.len() {
        return Err(Error::GridMismatch(format!(
            "photocurrent has {} bins, mode has {}",
            y.len(),
            mode.len()
        )));
    }
    let dt = mode.dt();
    Ok(y.iter().zip(mode.samples()).map(|(y, u)| y * u.re).sum::<f64>() * dt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEstimate {
    pub mode: TemporalMode,
    /// Pointwise variance minus the vacuum floor, per bin (SNU).
    pub excess: Vec<f64>,
    /// Summed excess divided by its standard error.
    pub significance: f64,
}

/// Below this significance the excess noise is treated as indistinguishable
/// from the vacuum floor.
const MIN_SIGNIFICANCE: f64 = 4.0;

/// Estimates the signal temporal mode from trials taken at a fixed LO phase,
/// as `u ∝ sqrt(|var_k dt - floor|)`.
///
/// `photocurrent` is row-major `n_trials x n_bins`; `floor` is the pointwise
/// vacuum level (1 plus any electronic noise, in SNU).
pub fn extract_temporal_mode(photocurrent: &[f64], n_bins: usize, dt: f64, floor: f64) -> Result<ModeEstimate> {
    if n_bins == 0 || !photocurrent.len().is_multiple_of(n_bins) {
        return Err(Error::GridMismatch(format!(
            "{} samples do not split into rows of {n_bins}",
            photocurrent.len()
        )));
    }
    let n = photocurrent.len() / n_bins;
    if n < 2 {
        return Err(Error::ModeExtraction(format!("need at least 2 trials, got {n}")));
    }
    let mut mean = vec![0.0; n_bins];
    for row in photocurrent.chunks(n_bins) {
        for (m, y) in mean.iter_mut().zip(row) {
            *m += y;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; n_bins];
    for row in photocurrent.chunks(n_bins) {
        for ((v, y), m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (y - m).powi(2);
        }
    }
    let excess: Vec<f64> = var.iter().map(|v| v / (n - 1) as f64 * dt - floor).collect();
    // Each pointwise estimate near the floor has standard error floor*sqrt(2/(n-1)).
    let se = floor * (2.0 * n_bins as f64 / (n - 1) as f64).sqrt();
    let significance = excess.iter().sum::<f64>().abs() / se;
    if !(significance >= MIN_SIGNIFICANCE) {
        return Err(Error::ModeExtraction(format!(
            "pointwise variance indistinguishable from the vacuum floor (significance {significance:.2})"
        )));
    }
    let shape: Vec<f64> = excess.iter().map(|e| e.abs().sqrt()).collect();
    let mode = TemporalMode::from_real(&shape, dt)?;
    Ok(ModeEstimate {
        mode,
        excess,
        significance,
    })
}

/// Sample variance of the quadratures falling in one phase bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseBin {
    /// Bin center in `[0, π)`.
    pub theta: f64,
    /// Unbiased sample variance; NaN when fewer than two samples.
    pub variance: f64,
    pub count: usize,
    /// Set when `count < 10`.
    pub low_count: bool,
}

impl PhaseBin {
    /// Standard error of a Gaussian sample variance.
    pub fn standard_error(&self) -> f64 {
        self.variance * (2.0 / (self.count as f64 - 1.0)).sqrt()
    }
}

const LOW_COUNT: usize = 10;

/// Bins quadratures by phase reduced modulo π and returns per-bin unbiased
/// variances.
pub fn bin_variances(q: &[f64], phases: &[f64], n_bins: usize) -> Result<Vec<PhaseBin>> {
    if q.is_empty() {
        return Err(Error::Empty("no quadrature samples to bin".into()));
    }
    if q.len() != phases.len() {
        return Err(Error::GridMismatch(format!("{} quadratures vs {} phases", q.len(), phases.len())));
    }
    if n_bins < 4 {
        return Err(crate::error::invalid(format!("need at least 4 phase bins, got {n_bins}")));
    }
    let pi = std::f64::consts::PI;
    let mut sum = vec![0.0; n_bins];
    let mut sum2 = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    // Two passes per bin (mean, then squared deviations) for accuracy.
    let idx: Vec<usize> = phases
        .iter()
        .map(|p| {
            let r = p.rem_euclid(pi);
            ((r / pi * n_bins as f64) as usize).min(n_bins - 1)
        })
        .collect();
    for (&j, &x) in idx.iter().zip(q) {
        sum[j] += x;
        count[j] += 1;
    }
    let mean: Vec<f64> = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    for (&j, &x) in idx.iter().zip(q) {
        sum2[j] += (x - mean[j]).powi(2);
    }
    Ok((0..n_bins)
        .map(|j| PhaseBin {
            theta: (j as f64 + 0.5) * pi / n_bins as f64,
            variance: if count[j] >= 2 {
                sum2[j] / (count[j] - 1) as f64
            } else {
                f64::NAN
            },
            count: count[j],
            low_count: count[j] < LOW_COUNT,
        })
        .collect())
}

/// Least-squares fit of `V(θ) = V_x cos²(θ-θ0) + V_p sin²(θ-θ0)`.
///
/// `θ0` is reported as the minimum-variance angle in `[0, π)`, so `V_x <= V_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceFit {
    pub v_x: f64,
    pub v_p: f64,
    pub theta0: f64,
    pub rms_residual: f64,
    pub bins_used: usize,
}

impl VarianceFit {
    pub fn eval(&self, theta: f64) -> f64 {
        let (s, c) = (theta - self.theta0).sin_cos();
        self.v_x * c * c + self.v_p * s * s
    }
}

/// Fits the variance curve to every bin not flagged as low-count. The model is
/// linear in `(a, b, c)` of `a + b cos 2θ + c sin 2θ`.
pub fn fit_variance_curve(bins: &[PhaseBin]) -> Result<VarianceFit> {
    let used: Vec<&PhaseBin> = bins.iter().filter(|b| !b.low_count && b.variance.is_finite()).collect();
    if used.len() < 4 {
        return Err(Error::RankDeficient(format!("{} usable bins, need at least 4", used.len())));
    }
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for b in &used {
        let row = Vector3::new(1.0, (2.0 * b.theta).cos(), (2.0 * b.theta).sin());
        ata += row * row.transpose();
        atb += row * b.variance;
    }
    let svd = ata.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficient(
            "bin phases do not resolve the cos/sin 2θ terms".into(),
        ));
    }
    let x = svd
        .solve(&atb, 0.0)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    let (a, b, c) = (x[0], x[1], x[2]);
    let r = b.hypot(c);
    let pi = std::f64::consts::PI;
    let theta0 = ((c.atan2(b) + pi) / 2.0).rem_euclid(pi);
    let fit = VarianceFit {
        v_x: a - r,
        v_p: a + r,
        theta0,
        rms_residual: 0.0,
        bins_used: used.len(),
    };
    let rss: f64 = used.iter().map(|b| (b.variance - fit.eval(b.theta)).powi(2)).sum();
    Ok(VarianceFit {
        rms_residual: (rss / used.len() as f64).sqrt(),
        ..fit
    })
}
