use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{ChannelParams, GaussianState};
use crate::mode::TemporalMode;
use crate::optim::DeConfig;
use crate::pipeline::AcquisitionSetup;
use crate::raman::{ControlPulse, MemoryParams};
use crate::tomography::MleConfig;

/// A run description. Unknown keys anywhere are errors and the top-level
/// `seed` has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<MemorySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homodyne: Option<AcquisitionSetup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tomography: Option<TomographySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_sweep: Option<BandwidthSweepSection>,
    #[serde(default)]
    pub outputs: OutputsSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    pub squeeze_db: f64,
    pub antisqueeze_db: f64,
    #[serde(default)]
    pub angle: f64,
}

impl StateSection {
    pub fn state(&self) -> Result<GaussianState> {
        GaussianState::squeezed_vacuum(self.squeeze_db, self.antisqueeze_db, self.angle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub eta: f64,
    pub delta: f64,
    /// Further transmissions evaluated with the same `δ` for comparison.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compare_eta: Vec<f64>,
}

impl ChannelSection {
    pub fn params(&self) -> Result<ChannelParams> {
        ChannelParams::new(self.eta, self.delta)
    }
}

/// Gaussian envelope on the unit stage window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub center: f64,
    pub fwhm: f64,
    pub peak: f64,
}

impl PulseSpec {
    pub fn pulse(&self, n_t: usize) -> Result<ControlPulse> {
        ControlPulse::gaussian(n_t, 1.0, self.center, self.fwhm, self.peak)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub center: f64,
    pub fwhm: f64,
}

impl ModeSpec {
    pub fn mode(&self, n_t: usize) -> Result<TemporalMode> {
        TemporalMode::gaussian(n_t, 1.0, self.center, self.fwhm)
    }
}

/// Differential-evolution settings for the write pulse. The run seed is
/// derived from the scenario seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    /// `[[tau0_lo, tau0_hi], [fwhm_lo, fwhm_hi]]`.
    pub bounds: Vec<(f64, f64)>,
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default = "default_mutation")]
    pub mutation: f64,
    #[serde(default = "default_crossover")]
    pub crossover: f64,
    #[serde(default = "default_generations")]
    pub generations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_window")]
    pub window: usize,
}

fn defaults() -> DeConfig {
    DeConfig::new(Vec::new(), 0)
}
fn default_population() -> usize {
    defaults().population
}
fn default_mutation() -> f64 {
    defaults().mutation
}
fn default_crossover() -> f64 {
    defaults().crossover
}
fn default_generations() -> usize {
    defaults().generations
}
fn default_tolerance() -> f64 {
    defaults().tolerance
}
fn default_window() -> usize {
    defaults().window
}

impl OptimizerSection {
    pub fn config(&self, seed: u64) -> DeConfig {
        DeConfig {
            population: self.population,
            mutation: self.mutation,
            crossover: self.crossover,
            generations: self.generations,
            tolerance: self.tolerance,
            window: self.window,
            bounds: self.bounds.clone(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemorySection {
    pub params: MemoryParams,
    pub write: PulseSpec,
    pub read: PulseSpec,
    pub input_mode: ModeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerSection>,
    /// Read energies relative to `read`, for the read-power sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub read_powers: Vec<f64>,
    /// Also solve on a grid refined by two and require this relative
    /// agreement of the total efficiency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographySection {
    #[serde(default)]
    pub mle: MleConfig,
    /// Wigner grid: `points` per axis over `[-extent, extent]` (vacuum-1/2
    /// convention).
    #[serde(default = "default_wigner_points")]
    pub wigner_points: usize,
    #[serde(default = "default_wigner_extent")]
    pub wigner_extent: f64,
}

fn default_wigner_points() -> usize {
    61
}

fn default_wigner_extent() -> f64 {
    3.0
}

impl TomographySection {
    pub fn grid(&self) -> Vec<f64> {
        let n = self.wigner_points;
        let e = self.wigner_extent;
        (0..n).map(|i| -e + 2.0 * e * i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthRow {
    pub bandwidth_mhz: f64,
    pub eta: f64,
    pub delta: f64,
    pub input_squeeze_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthSweepSection {
    pub rows: Vec<BandwidthRow>,
    /// Input anti-squeezing levels scanned per row; values below the row's
    /// squeezing are raised to it (pure state).
    pub antisqueeze_db: Vec<f64>,
    /// Number of Monte Carlo estimation repeats per row, using the
    /// `homodyne` section with the pulse FWHM set to `1 / B`. Zero disables.
    #[serde(default)]
    pub monte_carlo_seeds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    /// Run directory used when `--out` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// CSV and JSON are always written; `svg` adds figures.
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection {
            directory: None,
            formats: default_formats(),
        }
    }
}

impl OutputsSection {
    pub fn svg(&self) -> bool {
        self.formats.contains(&Format::Svg)
    }
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::MissingArtifact(format!("scenario {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Scenario(m) => Error::Scenario(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Section-level checks that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(schema(format!("name '{}' must be non-empty without path separators", self.name)));
        }
        if !self.outputs.formats.contains(&Format::Csv) || !self.outputs.formats.contains(&Format::Json) {
            return Err(schema("outputs.formats must include csv and json"));
        }
        let wrap = |what: &str, r: Result<()>| r.map_err(|e| schema(format!("{what}: {e}")));
        if let Some(s) = &self.state {
            wrap("state", s.state().map(|_| ()))?;
        }
        if let Some(c) = &self.channel {
            wrap("channel", c.params().map(|_| ()))?;
            for &eta in &c.compare_eta {
                wrap("channel.compare_eta", ChannelParams::new(eta, c.delta).map(|_| ()))?;
            }
        }
        if let Some(m) = &self.memory {
            wrap("memory.params", m.params.validate())?;
            wrap("memory.write", m.write.pulse(m.params.n_t).map(|_| ()))?;
            wrap("memory.read", m.read.pulse(m.params.n_t).map(|_| ()))?;
            wrap("memory.input_mode", m.input_mode.mode(m.params.n_t).map(|_| ()))?;
            if let Some(o) = &m.optimizer {
                wrap("memory.optimizer", o.config(0).validate())?;
            }
        }
        if let Some(h) = &self.homodyne {
            wrap("homodyne.acquisition", h.acquisition.validate())?;
            wrap("homodyne", h.pulse_mode().map(|_| ()))?;
        }
        if let Some(t) = &self.tomography {
            wrap("tomography.mle", t.mle.validate())?;
            if t.wigner_points < 2 || !(t.wigner_extent > 0.0) {
                return Err(schema("tomography: wigner grid needs >= 2 points and a positive extent"));
            }
        }
        if let Some(b) = &self.bandwidth_sweep {
            if b.rows.is_empty() || b.antisqueeze_db.is_empty() {
                return Err(schema("bandwidth_sweep needs rows and antisqueeze_db"));
            }
            for r in &b.rows {
                if !(r.bandwidth_mhz > 0.0) {
                    return Err(schema(format!("bandwidth_sweep: bandwidth {} must be > 0", r.bandwidth_mhz)));
                }
                wrap("bandwidth_sweep", ChannelParams::new(r.eta, r.delta).map(|_| ()))?;
            }
            if b.monte_carlo_seeds > 0 && self.homodyne.is_none() {
                return Err(schema("bandwidth_sweep.monte_carlo_seeds needs a homodyne section"));
            }
        }
        Ok(())
    }

    pub fn require<'a, T>(section: &'a Option<T>, name: &str, command: &str) -> Result<&'a T> {
        section
            .as_ref()
            .ok_or_else(|| schema(format!("command {command} needs a '{name}' section")))
    }
}
