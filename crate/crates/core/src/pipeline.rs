//! Measurement chain shared by the command line and the tests: synthetic
//! dual-pulse homodyne runs on the input and channel-output states, binned
//! variance curves, excess-noise estimation and MLE reconstruction.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{apply_noisy_channel, estimate_excess_noise, ChannelParams, GaussianState};
use crate::homodyne::{
    bin_variances, fit_variance_curve, pulse_mode, recover_phase, simulate_dual_pulse_run, HomodyneConfig,
    HomodyneDataset, PhaseBin, PhaseDriftModel, PhaseSource, VarianceFit,
};
use crate::mode::TemporalMode;
use crate::tomography::{mle_reconstruct, MleConfig, MleResult, QuadratureSample};

/// Independent sub-seed number `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Sub-seed streams used by the measurement chain.
pub mod streams {
    pub const INPUT_DATA: u64 = 1;
    pub const INPUT_DRIFT: u64 = 2;
    pub const OUTPUT_DATA: u64 = 3;
    pub const OUTPUT_DRIFT: u64 = 4;
    pub const OPTIMIZER: u64 = 5;
    pub const MONTE_CARLO: u64 = 6;
}

/// Seed of Monte Carlo repeat `k` for sweep row `row`.
pub fn monte_carlo_seed(seed: u64, row: usize, k: usize) -> u64 {
    derive_seed(derive_seed(seed, streams::MONTE_CARLO), ((row as u64) << 32) | k as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    /// Matched filter on the known Gaussian pulse envelope.
    #[default]
    Known,
    /// Matched filter on the mode estimated from the pointwise excess noise.
    Extracted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSettings {
    #[serde(default = "default_drift_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_drift_rms")]
    pub rms_rad: f64,
}

fn default_drift_bandwidth() -> f64 {
    PhaseDriftModel::new(0).bandwidth_hz
}

fn default_drift_rms() -> f64 {
    PhaseDriftModel::new(0).rms_rad
}

impl Default for DriftSettings {
    fn default() -> Self {
        DriftSettings {
            bandwidth_hz: default_drift_bandwidth(),
            rms_rad: default_drift_rms(),
        }
    }
}

impl DriftSettings {
    pub fn model(&self, seed: u64) -> PhaseDriftModel {
        PhaseDriftModel {
            bandwidth_hz: self.bandwidth_hz,
            rms_rad: self.rms_rad,
            seed,
        }
    }
}

/// How one state is measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSetup {
    pub acquisition: HomodyneConfig,
    #[serde(default)]
    pub drift: DriftSettings,
    /// Intensity FWHM of the signal pulse, seconds.
    pub pulse_fwhm_s: f64,
    #[serde(default = "default_mode_bins")]
    pub mode_bins: usize,
    #[serde(default = "default_phase_bins")]
    pub phase_bins: usize,
    #[serde(default = "default_phase_source")]
    pub phase_source: PhaseSource,
    #[serde(default)]
    pub mode: ModeChoice,
}

fn default_mode_bins() -> usize {
    16
}

fn default_phase_bins() -> usize {
    24
}

fn default_phase_source() -> PhaseSource {
    PhaseSource::Recovered
}

impl AcquisitionSetup {
    pub fn new(n_trials: usize, pulse_fwhm_s: f64) -> Self {
        AcquisitionSetup {
            acquisition: HomodyneConfig::new(n_trials),
            drift: DriftSettings::default(),
            pulse_fwhm_s,
            mode_bins: default_mode_bins(),
            phase_bins: default_phase_bins(),
            phase_source: default_phase_source(),
            mode: ModeChoice::Known,
        }
    }

    pub fn pulse_mode(&self) -> Result<TemporalMode> {
        pulse_mode(self.pulse_fwhm_s, self.mode_bins)
    }
}

/// Result of measuring one state.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub dataset: HomodyneDataset,
    /// Mode used for the matched filter.
    pub mode: TemporalMode,
    /// `|<mode, true mode>|`.
    pub mode_overlap: f64,
    /// Matched-filter quadratures, SNU.
    pub quadratures: Vec<f64>,
    /// Phase attached to each trial.
    pub phases: Vec<f64>,
    pub bins: Vec<PhaseBin>,
    pub fit: VarianceFit,
}

impl Measurement {
    /// Quadrature samples in the vacuum-1/2 convention for tomography.
    pub fn samples(&self) -> Result<Vec<QuadratureSample>> {
        self.quadratures
            .iter()
            .zip(&self.phases)
            .map(|(&q, &t)| QuadratureSample::from_snu(q, t))
            .collect()
    }

    /// `(θ, variance)` pairs for the excess-noise estimator.
    pub fn curve(&self) -> Vec<(f64, f64)> {
        self.bins.iter().map(|b| (b.theta, b.variance)).collect()
    }
}

/// Simulates and analyses one homodyne run of `state`.
pub fn measure_state(
    state: &GaussianState,
    setup: &AcquisitionSetup,
    data_seed: u64,
    drift_seed: u64,
) -> Result<Measurement> {
    let truth = setup.pulse_mode()?;
    let dataset = simulate_dual_pulse_run(state, &truth, &setup.acquisition, &setup.drift.model(drift_seed), data_seed)?;
    let mode = match setup.mode {
        ModeChoice::Known => truth.clone(),
        ModeChoice::Extracted => dataset.extract_mode()?.mode,
    };
    let mode_overlap = mode.overlap(&truth)?.norm();
    let quadratures = dataset.quadratures(&mode)?;
    let phases = match setup.phase_source {
        PhaseSource::Recovered => recover_phase(&dataset.fringes)?.phases,
        PhaseSource::Truth => dataset.lo_phases.clone(),
    };
    let bins = bin_variances(&quadratures, &phases, setup.phase_bins)?;
    if let Some(b) = bins.iter().find(|b| !b.variance.is_finite()) {
        return Err(Error::Empty(format!("phase bin at θ = {:.3} has fewer than two samples", b.theta)));
    }
    let fit = fit_variance_curve(&bins)?;
    Ok(Measurement {
        dataset,
        mode,
        mode_overlap,
        quadratures,
        phases,
        bins,
        fit,
    })
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub injected: ChannelParams,
    /// Phase-averaged excess-noise estimate using the injected `η`.
    pub delta: f64,
    pub input: Measurement,
    pub output: Measurement,
}

/// Measures `input` and its image under `channel` with independent seeds
/// derived from `seed`, then estimates `δ` from the two variance curves.
pub fn estimate_channel(
    input: &GaussianState,
    channel: &ChannelParams,
    setup: &AcquisitionSetup,
    seed: u64,
) -> Result<ChannelEstimate> {
    let output_state = apply_noisy_channel(input, channel);
    let m_in = measure_state(
        input,
        setup,
        derive_seed(seed, streams::INPUT_DATA),
        derive_seed(seed, streams::INPUT_DRIFT),
    )?;
    let m_out = measure_state(
        &output_state,
        setup,
        derive_seed(seed, streams::OUTPUT_DATA),
        derive_seed(seed, streams::OUTPUT_DRIFT),
    )?;
    let delta = estimate_excess_noise(&m_in.curve(), &m_out.curve(), channel.eta(), 1.0)?;
    Ok(ChannelEstimate {
        injected: *channel,
        delta,
        input: m_in,
        output: m_out,
    })
}

/// MLE reconstruction from a measurement.
pub fn reconstruct(m: &Measurement, cfg: &MleConfig) -> Result<MleResult> {
    mle_reconstruct(&m.samples()?, cfg)
}

/// Squeezing in dB below shot noise of a fitted curve (negative when the
/// minimum lies above shot noise).
pub fn fitted_squeezing_db(fit: &VarianceFit) -> f64 {
    -10.0 * fit.v_x.log10()
}

pub fn fitted_antisqueezing_db(fit: &VarianceFit) -> f64 {
    10.0 * fit.v_p.log10()
}
