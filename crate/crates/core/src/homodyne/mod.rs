//! Dual-pulse time-domain homodyne detection: synthetic photocurrents for a
//! weak signal pulse, interference fringes of a delayed bright pulse that
//! tracks the LO phase, and the estimators that turn both into phase-binned
//! quadrature variances.
//!
//! Photocurrents are in SNU-normalized units: the vacuum contribution is white
//! with per-bin variance `1/dt`, so projecting onto a normalized temporal mode
//! with `sum y u dt` yields a quadrature with unit vacuum variance.

mod estimate;
mod io;
mod phase;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gaussian::GaussianState;
use crate::mode::TemporalMode;

pub use estimate::{
    bin_variances, extract_temporal_mode, fit_variance_curve, matched_filter_quadrature, ModeEstimate, PhaseBin,
    VarianceFit,
};
pub use io::{load_dataset, save_dataset};
pub use phase::{recover_phase, PhaseRecovery, EDGE_FRACTION};

/// Slow LO phase drift: an Ornstein–Uhlenbeck process with corner frequency
/// `bandwidth_hz` and stationary standard deviation `rms_rad`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDriftModel {
    #[serde(default = "default_drift_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_drift_rms")]
    pub rms_rad: f64,
    pub seed: u64,
}

fn default_drift_bandwidth() -> f64 {
    100e3
}

fn default_drift_rms() -> f64 {
    0.03
}

impl PhaseDriftModel {
    pub fn new(seed: u64) -> PhaseDriftModel {
        PhaseDriftModel {
            bandwidth_hz: default_drift_bandwidth(),
            rms_rad: default_drift_rms(),
            seed,
        }
    }

    pub fn none(seed: u64) -> PhaseDriftModel {
        PhaseDriftModel {
            bandwidth_hz: 0.0,
            rms_rad: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz >= 0.0) || !self.bandwidth_hz.is_finite() {
            return Err(invalid(format!("drift bandwidth must be >= 0, got {}", self.bandwidth_hz)));
        }
        if !(self.rms_rad >= 0.0) || !self.rms_rad.is_finite() {
            return Err(invalid(format!("drift rms must be >= 0, got {}", self.rms_rad)));
        }
        Ok(())
    }

    /// Exact OU transition over `tau` seconds.
    fn step(&self, x: f64, tau: f64, xi: f64) -> f64 {
        let decay = (-2.0 * std::f64::consts::PI * self.bandwidth_hz * tau).exp();
        x * decay + self.rms_rad * (1.0 - decay * decay).max(0.0).sqrt() * xi
    }
}

/// Acquisition settings shared by every trial of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomodyneConfig {
    pub n_trials: usize,
    /// Time between consecutive trials, seconds.
    #[serde(default = "default_trial_period")]
    pub trial_period_s: f64,
    /// LO phase scan rate; zero locks the phase at `scan_offset`.
    #[serde(default = "default_scan_hz")]
    pub scan_hz: f64,
    #[serde(default)]
    pub scan_offset: f64,
    /// Delay of the bright phase-reference pulse after the signal pulse.
    #[serde(default = "default_bright_delay")]
    pub bright_delay_s: f64,
    #[serde(default = "default_bright_amplitude")]
    pub bright_amplitude: f64,
    /// Additive fringe noise, relative to `bright_amplitude`.
    #[serde(default)]
    pub fringe_noise: f64,
    /// Electronic noise variance in SNU, added to the matched-filter output.
    #[serde(default)]
    pub electronic_noise: f64,
    /// Largest tolerated rms phase difference between the signal and bright
    /// pulses.
    #[serde(default = "default_max_delay_error")]
    pub max_delay_phase_error: f64,
}

fn default_trial_period() -> f64 {
    10e-6
}
fn default_scan_hz() -> f64 {
    100.0
}
fn default_bright_delay() -> f64 {
    500e-9
}
fn default_bright_amplitude() -> f64 {
    100.0
}
fn default_max_delay_error() -> f64 {
    0.05
}

impl HomodyneConfig {
    pub fn new(n_trials: usize) -> HomodyneConfig {
        HomodyneConfig {
            n_trials,
            trial_period_s: default_trial_period(),
            scan_hz: default_scan_hz(),
            scan_offset: 0.0,
            bright_delay_s: default_bright_delay(),
            bright_amplitude: default_bright_amplitude(),
            fringe_noise: 0.0,
            electronic_noise: 0.0,
            max_delay_phase_error: default_max_delay_error(),
        }
    }

    /// Phase held fixed at `offset` for every trial.
    pub fn locked(n_trials: usize, offset: f64) -> HomodyneConfig {
        HomodyneConfig {
            scan_hz: 0.0,
            scan_offset: offset,
            ..HomodyneConfig::new(n_trials)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(invalid("need at least one trial"));
        }
        let positive = [
            ("trial period", self.trial_period_s),
            ("bright amplitude", self.bright_amplitude),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("bright delay", self.bright_delay_s),
            ("fringe noise", self.fringe_noise),
            ("electronic noise", self.electronic_noise),
            ("max delay phase error", self.max_delay_phase_error),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !self.scan_hz.is_finite() || !self.scan_offset.is_finite() {
            return Err(invalid("scan rate and offset must be finite"));
        }
        if self.bright_delay_s >= self.trial_period_s {
            return Err(invalid("bright pulse delay must be shorter than the trial period"));
        }
        Ok(())
    }
}

/// Everything needed to reproduce or reinterpret a run, minus the bulk data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub state: GaussianState,
    pub mode: TemporalMode,
    pub config: HomodyneConfig,
    pub drift: PhaseDriftModel,
    pub seed: u64,
    /// Measured rms of (bright-pulse phase - signal-pulse phase).
    pub delay_phase_error_rms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneDataset {
    pub meta: DatasetMeta,
    /// Row-major `n_trials x n_bins` photocurrents.
    pub photocurrent: Vec<f64>,
    /// Integrated fringe of the bright pulse, one per trial.
    pub fringes: Vec<f64>,
    /// Ground-truth LO phase during the signal pulse.
    pub lo_phases: Vec<f64>,
    /// Ground-truth LO phase during the bright pulse.
    pub bright_phases: Vec<f64>,
}

impl HomodyneDataset {
    pub fn n_trials(&self) -> usize {
        self.fringes.len()
    }

    pub fn n_bins(&self) -> usize {
        self.meta.mode.len()
    }

    pub fn dt(&self) -> f64 {
        self.meta.mode.dt()
    }

    pub fn trial(&self, i: usize) -> &[f64] {
        let n = self.n_bins();
        &self.photocurrent[i * n..(i + 1) * n]
    }

    /// Temporal-mode estimate from this run's photocurrents, which should be
    /// taken at a fixed LO phase.
    pub fn extract_mode(&self) -> Result<ModeEstimate> {
        extract_temporal_mode(
            &self.photocurrent,
            self.n_bins(),
            self.dt(),
            1.0 + self.meta.config.electronic_noise,
        )
    }

    /// Matched-filter quadrature of every trial.
    pub fn quadratures(&self, mode: &TemporalMode) -> Result<Vec<f64>> {
        (0..self.n_trials())
            .map(|i| matched_filter_quadrature(self.trial(i), mode))
            .collect()
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Synthesizes one acquisition run.
///
/// Per trial the LO phase is the linear scan plus drift; the signal-mode
/// quadrature `q ~ N(0, V(θ))` replaces the vacuum component of white noise
/// `w` along the mode, `y = w + (q - <w,u>) u`. The bright pulse samples the
/// scan and drift `bright_delay_s` later.
pub fn simulate_dual_pulse_run(
    state: &GaussianState,
    mode: &TemporalMode,
    config: &HomodyneConfig,
    drift: &PhaseDriftModel,
    seed: u64,
) -> Result<HomodyneDataset> {
    config.validate()?;
    drift.validate()?;
    if !mode.is_real() {
        return Err(invalid("photocurrent synthesis needs a real temporal mode"));
    }
    let n = config.n_trials;
    let u = mode.real_samples();
    let nb = u.len();
    let dt = mode.dt();
    let two_pi = 2.0 * std::f64::consts::PI;

    let mut drift_rng = ChaCha8Rng::seed_from_u64(drift.seed);
    let mut lo_phases = Vec::with_capacity(n);
    let mut bright_phases = Vec::with_capacity(n);
    let mut x: f64 = {
        let xi: f64 = StandardNormal.sample(&mut drift_rng);
        drift.rms_rad * xi
    };
    let d = config.bright_delay_s;
    for i in 0..n {
        let t = i as f64 * config.trial_period_s;
        lo_phases.push(config.scan_offset + two_pi * config.scan_hz * t + x);
        x = drift.step(x, d, StandardNormal.sample(&mut drift_rng));
        bright_phases.push(config.scan_offset + two_pi * config.scan_hz * (t + d) + x);
        x = drift.step(x, config.trial_period_s - d, StandardNormal.sample(&mut drift_rng));
    }
    let delay_phase_error_rms = (lo_phases
        .iter()
        .zip(&bright_phases)
        .map(|(a, b)| (b - a).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    if delay_phase_error_rms > config.max_delay_phase_error {
        return Err(invalid(format!(
            "phase drift over the {:.0} ns pulse delay is {delay_phase_error_rms:.3e} rad rms, above {}",
            d * 1e9,
            config.max_delay_phase_error
        )));
    }

    let inv_sqrt_dt = 1.0 / dt.sqrt();
    let el = config.electronic_noise.sqrt();
    let mut photocurrent = vec![0.0; n * nb];
    let mut fringes = vec![0.0; n];
    photocurrent
        .par_chunks_mut(nb)
        .zip(fringes.par_iter_mut())
        .enumerate()
        .for_each(|(i, (y, f))| {
            let mut rng = trial_rng(seed, i);
            let mut proj = 0.0;
            for (yk, uk) in y.iter_mut().zip(&u) {
                let w: f64 = StandardNormal.sample(&mut rng);
                *yk = w * inv_sqrt_dt;
                proj += *yk * uk * dt;
            }
            let g: f64 = StandardNormal.sample(&mut rng);
            let q = state.quadrature_variance(lo_phases[i]).sqrt() * g;
            for (yk, uk) in y.iter_mut().zip(&u) {
                *yk += (q - proj) * uk;
            }
            if el > 0.0 {
                for yk in y.iter_mut() {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    *yk += el * e * inv_sqrt_dt;
                }
            }
            let nf: f64 = StandardNormal.sample(&mut rng);
            *f = config.bright_amplitude * (bright_phases[i].cos() + config.fringe_noise * nf);
        });

    Ok(HomodyneDataset {
        meta: DatasetMeta {
            state: *state,
            mode: mode.clone(),
            config: config.clone(),
            drift: *drift,
            seed,
            delay_phase_error_rms,
        },
        photocurrent,
        fringes,
        lo_phases,
        bright_phases,
    })
}

/// Gaussian pulse mode of intensity FWHM `fwhm_s` sampled on `n_bins` bins
/// spanning one FWHM either side of the peak.
pub fn pulse_mode(fwhm_s: f64, n_bins: usize) -> Result<TemporalMode> {
    if !(fwhm_s > 0.0) || !fwhm_s.is_finite() {
        return Err(invalid(format!("pulse FWHM must be > 0, got {fwhm_s}")));
    }
    TemporalMode::gaussian(n_bins, 2.0 * fwhm_s, fwhm_s, fwhm_s)
}

/// Which phase is attached to each trial when binning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSource {
    /// Hilbert-transform recovery from the bright-pulse fringes.
    Recovered,
    /// Simulation ground truth, for diagnostics.
    Truth,
}

/// Matched filter, phase assignment and binning in one pass.
pub fn variance_curve(
    dataset: &HomodyneDataset,
    mode: &TemporalMode,
    n_bins: usize,
    source: PhaseSource,
) -> Result<Vec<PhaseBin>> {
    let q = dataset.quadratures(mode)?;
    let phases = match source {
        PhaseSource::Recovered => recover_phase(&dataset.fringes)?.phases,
        PhaseSource::Truth => dataset.lo_phases.clone(),
    };
    bin_variances(&q, &phases, n_bins)
}

#[cfg(test)]
mod tests;
