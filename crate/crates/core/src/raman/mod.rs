//! Linearized three-field Raman memory in the co-moving frame: signal `A`,
//! conjugate anti-Stokes `B = a_a^dagger` and spin wave `S`, driven by a
//! control Rabi frequency `Ω(t)`:
//!
//! ```text
//! ∂z A = g_s Ω S
//! ∂z B = g_a Ω S e^{iΔk z}
//! ∂t S = -g_s Ω* A + g_a Ω* B e^{-iΔk z}
//! ```
//!
//! With this sign choice the signal–spin coupling is a beam splitter and the
//! anti-Stokes–spin coupling a two-mode amplifier, so the excitation
//! `|A|^2 + |S|^2 - |B|^2` (fluxes through the faces plus stored spin energy)
//! is conserved. At `g_a = 0` the memory is passive.
//!
//! Units are dimensionless: the medium length and each stage's time window
//! default to 1, couplings are quoted so that `g * Ω * sqrt(L T)` is the
//! relevant interaction strength.
//!
//! Integration uses an exactly solvable cell lattice: the grid of `n_t` time
//! bins by `n_z` slices is swept bin by bin (the co-moving field crosses the
//! medium within one bin), and each (bin, slice) cell applies the exact
//! exponential of the locally frozen three-mode generator. Every cell map
//! preserves the indefinite excitation form, so passivity and commutator
//! preservation hold to rounding error on any grid.

mod lattice;
mod sweep;
mod transfer;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mode::{resample_bins, TemporalMode};

pub use lattice::StageLattice;
pub use sweep::{retrieval_power_sweep, retrieved_mode_channel, write_sweep_csv, ReadPowerRow};
pub use transfer::{bogoliubov_channel, BogoliubovChannel, ModeBlock, ModeKind, StageKind, TransferMatrix};

/// Direction of the read pulse relative to the write pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Retrieval {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryParams {
    pub g_s: f64,
    #[serde(default)]
    pub g_a: f64,
    #[serde(default)]
    pub delta_k: f64,
    #[serde(default = "default_length")]
    pub length: f64,
    pub n_z: usize,
    pub n_t: usize,
    pub retrieval: Retrieval,
}

fn default_length() -> f64 {
    1.0
}

impl MemoryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_s > 0.0) || !self.g_s.is_finite() {
            return Err(invalid(format!("g_s must be > 0, got {}", self.g_s)));
        }
        if !(self.g_a >= 0.0) || !self.g_a.is_finite() {
            return Err(invalid(format!("g_a must be >= 0, got {}", self.g_a)));
        }
        if !self.delta_k.is_finite() {
            return Err(invalid("delta_k must be finite"));
        }
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(invalid(format!("length must be > 0, got {}", self.length)));
        }
        if self.n_z < 16 || self.n_t < 16 {
            return Err(invalid(format!(
                "grids need n_z >= 16 and n_t >= 16 (got {}, {})",
                self.n_z, self.n_t
            )));
        }
        Ok(())
    }

    pub fn dz(&self) -> f64 {
        self.length / self.n_z as f64
    }

    pub fn with_grid(&self, n_z: usize, n_t: usize) -> MemoryParams {
        MemoryParams { n_z, n_t, ..*self }
    }

    pub fn with_retrieval(&self, retrieval: Retrieval) -> MemoryParams {
        MemoryParams { retrieval, ..*self }
    }
}

/// Complex Rabi-frequency envelope sampled at the centers of `n` bins
/// spanning `[0, duration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPulse {
    samples: Vec<Complex64>,
    duration: f64,
}

impl ControlPulse {
    pub fn new(samples: Vec<Complex64>, duration: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("control pulse has no samples"));
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(invalid(format!("pulse duration must be > 0, got {duration}")));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("control pulse has non-finite samples"));
        }
        Ok(ControlPulse { samples, duration })
    }

    pub fn zero(n: usize, duration: f64) -> Result<Self> {
        ControlPulse::new(vec![Complex64::new(0.0, 0.0); n], duration)
    }

    /// Real Gaussian `peak * exp(-4 ln2 (t - center)^2 / fwhm^2)`.
    pub fn gaussian(n: usize, duration: f64, center: f64, fwhm: f64, peak: f64) -> Result<Self> {
        if !(fwhm > 0.0) {
            return Err(invalid(format!("pulse FWHM must be > 0, got {fwhm}")));
        }
        let dt = duration / n as f64;
        let samples = (0..n)
            .map(|k| {
                let t = (k as f64 + 0.5) * dt;
                let x = (t - center) / fwhm;
                Complex64::new(peak * (-4.0 * std::f64::consts::LN_2 * x * x).exp(), 0.0)
            })
            .collect();
        ControlPulse::new(samples, duration)
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

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.samples.len() as f64
    }

    /// `sum |Ω|^2 dt`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dt()
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|z| z.norm_sqr() == 0.0)
    }

    /// Amplitude scaled by `factor` (power by `factor^2`).
    pub fn scaled(&self, factor: f64) -> ControlPulse {
        ControlPulse {
            samples: self.samples.iter().map(|z| z * factor).collect(),
            duration: self.duration,
        }
    }

    pub fn resample(&self, n: usize) -> ControlPulse {
        ControlPulse {
            samples: resample_bins(&self.samples, n),
            duration: self.duration,
        }
    }
}

/// Fields over the (z, t) lattice for one stage, in continuous normalization
/// (`sum |A|^2 dt` and `sum |S|^2 dz` are energies).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub n_t: usize,
    pub n_z: usize,
    pub dt: f64,
    pub dz: f64,
    /// `A(z_i, t_k)` at slice boundaries `i = 0..=n_z`, stored row-major in `k`.
    pub signal: Vec<Complex64>,
    /// Conjugate anti-Stokes field, same layout as `signal`.
    pub anti_stokes: Vec<Complex64>,
    /// Spin wave at slice centers at the end of the stage.
    pub spin_wave: Vec<Complex64>,
}

impl FieldState {
    pub fn signal_at(&self, k: usize, i: usize) -> Complex64 {
        self.signal[k * (self.n_z + 1) + i]
    }

    /// Signal envelope leaving the medium.
    pub fn transmitted_signal(&self) -> Vec<Complex64> {
        (0..self.n_t).map(|k| self.signal_at(k, self.n_z)).collect()
    }

    pub fn input_signal(&self) -> Vec<Complex64> {
        (0..self.n_t).map(|k| self.signal_at(k, 0)).collect()
    }

    pub fn anti_stokes_out(&self) -> Vec<Complex64> {
        (0..self.n_t)
            .map(|k| self.anti_stokes[k * (self.n_z + 1) + self.n_z])
            .collect()
    }

    pub fn input_energy(&self) -> f64 {
        self.input_signal().iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dt
    }

    pub fn transmitted_energy(&self) -> f64 {
        self.transmitted_signal().iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dt
    }

    pub fn anti_stokes_energy(&self) -> f64 {
        self.anti_stokes_out().iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dt
    }

    pub fn spin_energy(&self) -> f64 {
        self.spin_wave.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dz
    }
}

/// Result of a read stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadOutcome {
    /// Retrieved signal envelope at the exit face (continuous normalization).
    pub retrieved: Vec<Complex64>,
    /// Spin wave left behind, in the lab frame of the write stage.
    pub residual_spin: Vec<Complex64>,
    pub field: FieldState,
}

impl ReadOutcome {
    pub fn retrieved_energy(&self) -> f64 {
        self.retrieved.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.field.dt
    }
}

fn check_pulse(params: &MemoryParams, pulse: &ControlPulse, what: &str) -> Result<()> {
    if pulse.len() != params.n_t {
        return Err(Error::GridMismatch(format!(
            "{what} pulse has {} samples but n_t = {}",
            pulse.len(),
            params.n_t
        )));
    }
    Ok(())
}

fn check_mode(pulse: &ControlPulse, mode: &TemporalMode, what: &str) -> Result<()> {
    if mode.len() != pulse.len() || (mode.dt() - pulse.dt()).abs() > 1e-12 * pulse.dt() {
        return Err(Error::GridMismatch(format!(
            "{what} mode grid ({} bins, dt {}) differs from pulse grid ({} bins, dt {})",
            mode.len(),
            mode.dt(),
            pulse.len(),
            pulse.dt()
        )));
    }
    Ok(())
}

/// Write stage: the input signal mode enters an initially empty medium.
pub fn solve_write(
    params: &MemoryParams,
    write: &ControlPulse,
    input_mode: &TemporalMode,
) -> Result<FieldState> {
    params.validate()?;
    check_pulse(params, write, "write")?;
    check_mode(write, input_mode, "input")?;
    let lattice = StageLattice::new(params, write);
    let zeros_t = vec![Complex64::new(0.0, 0.0); params.n_t];
    let zeros_z = vec![Complex64::new(0.0, 0.0); params.n_z];
    let out = lattice.propagate(&input_mode.bin_amplitudes(), &zeros_t, &zeros_z, true);
    Ok(out.into_field_state(&lattice))
}

/// Read stage acting on a stored spin wave (continuous normalization over
/// slice centers). Backward retrieval mirrors the spin wave along z and then
/// propagates forward.
pub fn solve_read(
    params: &MemoryParams,
    read: &ControlPulse,
    spin_wave: &[Complex64],
) -> Result<ReadOutcome> {
    params.validate()?;
    check_pulse(params, read, "read")?;
    if spin_wave.len() != params.n_z {
        return Err(Error::GridMismatch(format!(
            "spin wave has {} points but n_z = {}",
            spin_wave.len(),
            params.n_z
        )));
    }
    if spin_wave.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(invalid("spin wave has non-finite values"));
    }
    let lattice = StageLattice::new(params, read);
    let sq = params.dz().sqrt();
    let mut s0: Vec<Complex64> = spin_wave.iter().map(|z| z * sq).collect();
    if params.retrieval == Retrieval::Backward {
        s0.reverse();
    }
    let zeros_t = vec![Complex64::new(0.0, 0.0); params.n_t];
    let out = lattice.propagate(&zeros_t, &zeros_t, &s0, true);
    let field = out.into_field_state(&lattice);
    let mut residual = field.spin_wave.clone();
    if params.retrieval == Retrieval::Backward {
        residual.reverse();
    }
    Ok(ReadOutcome {
        retrieved: field.transmitted_signal(),
        residual_spin: residual,
        field,
    })
}

/// Energy ratios of the write, read and combined stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryEfficiency {
    pub write: f64,
    /// `None` when nothing was stored.
    pub read: Option<f64>,
    pub total: f64,
    /// Set when any ratio exceeds one, which only four-wave-mixing gain can cause.
    pub gain: bool,
}

const GAIN_EPS: f64 = 1e-9;

pub fn memory_efficiency(
    params: &MemoryParams,
    write: &ControlPulse,
    read: &ControlPulse,
    input_mode: &TemporalMode,
) -> Result<MemoryEfficiency> {
    let w = solve_write(params, write, input_mode)?;
    let stored = w.spin_energy();
    let input = w.input_energy();
    let eta_write = stored / input;
    if !(stored > 0.0) {
        return Ok(MemoryEfficiency {
            write: 0.0,
            read: None,
            total: 0.0,
            gain: false,
        });
    }
    let r = solve_read(params, read, &w.spin_wave)?;
    let retrieved = r.retrieved_energy();
    let eta_read = retrieved / stored;
    let total = retrieved / input;
    Ok(MemoryEfficiency {
        write: eta_write,
        read: Some(eta_read),
        total,
        gain: eta_write > 1.0 + GAIN_EPS || eta_read > 1.0 + GAIN_EPS || total > 1.0 + GAIN_EPS,
    })
}

/// Fraction of the input energy left in the spin wave after the write stage.
pub fn write_efficiency(
    params: &MemoryParams,
    write: &ControlPulse,
    input_mode: &TemporalMode,
) -> Result<f64> {
    params.validate()?;
    check_pulse(params, write, "write")?;
    check_mode(write, input_mode, "input")?;
    if write.is_zero() {
        return Ok(0.0);
    }
    let lattice = StageLattice::new(params, write);
    let zeros_t = vec![Complex64::new(0.0, 0.0); params.n_t];
    let zeros_z = vec![Complex64::new(0.0, 0.0); params.n_z];
    let out = lattice.propagate(&input_mode.bin_amplitudes(), &zeros_t, &zeros_z, false);
    Ok(out.spin.iter().map(|z| z.norm_sqr()).sum())
}

/// Memory efficiency on the given grid and on a grid refined by two in both
/// directions; fails when the total efficiency moves by more than `tol`
/// (relative).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub coarse: MemoryEfficiency,
    pub fine: MemoryEfficiency,
    pub relative_change: f64,
}

pub fn check_grid_convergence(
    params: &MemoryParams,
    write: &ControlPulse,
    read: &ControlPulse,
    input_mode: &TemporalMode,
    tol: f64,
) -> Result<ConvergenceReport> {
    let coarse = memory_efficiency(params, write, read, input_mode)?;
    let fine_params = params.with_grid(params.n_z * 2, params.n_t * 2);
    let fine = memory_efficiency(
        &fine_params,
        &write.resample(params.n_t * 2),
        &read.resample(params.n_t * 2),
        &input_mode.resample(params.n_t * 2)?,
    )?;
    let scale = fine.total.abs().max(1e-12);
    let relative_change = (fine.total - coarse.total).abs() / scale;
    if relative_change > tol {
        return Err(Error::GridConvergence {
            quantity: "memory efficiency".into(),
            change: relative_change,
            tolerance: tol,
        });
    }
    Ok(ConvergenceReport {
        coarse,
        fine,
        relative_change,
    })
}
