//! Zero-mean single-mode Gaussian states, the noisy beam-splitter channel and
//! the phase-averaged excess-noise estimator.
//!
//! All public variances are in shot-noise units (SNU): the vacuum has
//! variance 1 in every quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Slack allowed on the uncertainty product so that states built from
/// decibel values (e.g. `10^-0.16 * 10^0.16`) are not rejected by rounding.
const PURITY_SLACK: f64 = 1e-12;

/// Zero-mean single-mode Gaussian state described by its principal quadrature
/// variances and the orientation of the minimum-variance quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawState", into = "RawState")]
pub struct GaussianState {
    v_min: f64,
    v_max: f64,
    angle: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    v_min: f64,
    v_max: f64,
    angle: f64,
}

impl TryFrom<RawState> for GaussianState {
    type Error = Error;
    fn try_from(raw: RawState) -> Result<Self> {
        GaussianState::new(raw.v_min, raw.v_max, raw.angle)
    }
}

impl From<GaussianState> for RawState {
    fn from(s: GaussianState) -> Self {
        RawState {
            v_min: s.v_min,
            v_max: s.v_max,
            angle: s.angle,
        }
    }
}

impl GaussianState {
    pub fn new(v_min: f64, v_max: f64, angle: f64) -> Result<Self> {
        if !(v_min.is_finite() && v_max.is_finite() && angle.is_finite()) {
            return Err(invalid("state variances and angle must be finite"));
        }
        if v_min <= 0.0 || v_max <= 0.0 {
            return Err(invalid(format!(
                "variances must be positive (v_min = {v_min}, v_max = {v_max})"
            )));
        }
        if v_min > v_max {
            return Err(invalid(format!(
                "v_min = {v_min} exceeds v_max = {v_max}"
            )));
        }
        if v_min * v_max < 1.0 - PURITY_SLACK {
            return Err(Error::Uncertainty { v_min, v_max });
        }
        Ok(GaussianState {
            v_min,
            v_max,
            angle,
        })
    }

    pub fn vacuum() -> Self {
        GaussianState {
            v_min: 1.0,
            v_max: 1.0,
            angle: 0.0,
        }
    }

    /// Squeezed vacuum with the given squeezing and anti-squeezing levels in
    /// dB relative to shot noise. The anti-squeezing is not forced to match the
    /// squeezing, so mixed states are allowed; states below the uncertainty
    /// bound are rejected.
    pub fn squeezed_vacuum(squeeze_db: f64, antisqueeze_db: f64, angle: f64) -> Result<Self> {
        if squeeze_db < 0.0 || antisqueeze_db < 0.0 {
            return Err(invalid(format!(
                "squeezing levels must be non-negative dB (got {squeeze_db}, {antisqueeze_db})"
            )));
        }
        GaussianState::new(db_to_snu(squeeze_db), 1.0 / db_to_snu(antisqueeze_db), angle)
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// Orientation of the minimum-variance quadrature, radians.
    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        (self.v_min * self.v_max - 1.0).abs() <= tol
    }

    /// Variance of the quadrature at LO phase `theta`. Periodic with period π.
    pub fn quadrature_variance(&self, theta: f64) -> f64 {
        let (s, c) = (theta - self.angle).sin_cos();
        self.v_min * c * c + self.v_max * s * s
    }

    /// Squeezing of the minimum quadrature in dB below shot noise.
    pub fn squeezing_db(&self) -> f64 {
        -10.0 * self.v_min.log10()
    }

    /// Anti-squeezing of the maximum quadrature in dB above shot noise.
    pub fn antisqueezing_db(&self) -> f64 {
        10.0 * self.v_max.log10()
    }

    /// 2x2 covariance matrix of (x, p) in SNU.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.angle.sin_cos();
        let xx = self.v_min * c * c + self.v_max * s * s;
        let pp = self.v_min * s * s + self.v_max * c * c;
        let xp = (self.v_min - self.v_max) * s * c;
        [[xx, xp], [xp, pp]]
    }

    /// Same state rotated by `phi` in phase space.
    pub fn rotated(&self, phi: f64) -> Self {
        GaussianState {
            angle: self.angle + phi,
            ..*self
        }
    }
}

/// Transmission `eta` and excess noise `delta` (SNU) of the noisy
/// beam-splitter channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel", into = "RawChannel")]
pub struct ChannelParams {
    eta: f64,
    delta: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    eta: f64,
    delta: f64,
}

impl TryFrom<RawChannel> for ChannelParams {
    type Error = Error;
    fn try_from(raw: RawChannel) -> Result<Self> {
        ChannelParams::new(raw.eta, raw.delta)
    }
}

impl From<ChannelParams> for RawChannel {
    fn from(c: ChannelParams) -> Self {
        RawChannel {
            eta: c.eta,
            delta: c.delta,
        }
    }
}

impl ChannelParams {
    pub fn new(eta: f64, delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(invalid(format!("transmission eta = {eta} outside [0, 1]")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(invalid(format!("excess noise delta = {delta} must be >= 0")));
        }
        Ok(ChannelParams { eta, delta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Channel equivalent to applying `self` first and then `next`.
    pub fn then(&self, next: &ChannelParams) -> ChannelParams {
        ChannelParams {
            eta: self.eta * next.eta,
            delta: next.eta * self.delta + next.delta,
        }
    }

    /// Output variance for an input quadrature variance.
    pub fn map_variance(&self, v_in: f64) -> f64 {
        self.eta * v_in + (1.0 - self.eta) + self.delta
    }
}

/// Passes a state through `a_out = sqrt(eta) a_in + sqrt(1-eta) v + b_th`.
pub fn apply_noisy_channel(state: &GaussianState, ch: &ChannelParams) -> GaussianState {
    // The map is affine and increasing in V, so it preserves the ordering of
    // the principal variances and the orientation.
    GaussianState {
        v_min: ch.map_variance(state.v_min),
        v_max: ch.map_variance(state.v_max),
        angle: state.angle,
    }
}

/// Converts a variance in SNU to dB relative to shot noise, positive for
/// squeezing: `dB = -10 log10(V)`.
pub fn snu_to_db(v: f64) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid(format!("variance must be positive, got {v}")));
    }
    Ok(-10.0 * v.log10())
}

/// Inverse of [`snu_to_db`].
pub fn db_to_snu(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(r1) r2 sqrt(r1)))^2` between two zero-mean
/// single-mode Gaussian states, from their covariance matrices.
pub fn gaussian_fidelity(s1: &GaussianState, s2: &GaussianState) -> f64 {
    // Covariances in the vacuum-variance-1/2 convention.
    let a = s1.covariance();
    let b = s2.covariance();
    let det = |m: [[f64; 2]; 2]| m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let half = |m: [[f64; 2]; 2]| [[m[0][0] / 2.0, m[0][1] / 2.0], [m[1][0] / 2.0, m[1][1] / 2.0]];
    let (a, b) = (half(a), half(b));
    let sum = [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ];
    let big_delta = det(sum);
    let lambda = (4.0 * (det(a) - 0.25) * (det(b) - 0.25)).max(0.0);
    let f = 1.0 / ((big_delta + lambda).sqrt() - lambda.sqrt());
    f.clamp(0.0, 1.0)
}

/// Phase-averaged excess noise from binned input and output variance curves:
///
/// ```text
/// delta = 1/N sum_i [V_out(θ_i) - η V_in(θ_i) - (1-η) V_vac] / V_vac
/// ```
///
/// Both curves must share the same phase bins. The result is not clamped and
/// may be negative on noisy data.
pub fn estimate_excess_noise(
    v_in: &[(f64, f64)],
    v_out: &[(f64, f64)],
    eta: f64,
    v_vac: f64,
) -> Result<f64> {
    if v_in.is_empty() {
        return Err(Error::Empty("no phase bins".into()));
    }
    if v_in.len() != v_out.len() {
        return Err(Error::GridMismatch(format!(
            "{} input bins vs {} output bins",
            v_in.len(),
            v_out.len()
        )));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!("eta = {eta} outside [0, 1]")));
    }
    if !(v_vac > 0.0) {
        return Err(invalid(format!("vacuum variance must be positive, got {v_vac}")));
    }
    let mut acc = 0.0;
    for (i, (&(ti, vi), &(to, vo))) in v_in.iter().zip(v_out).enumerate() {
        if (ti - to).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!(
                "bin {i}: input phase {ti} vs output phase {to}"
            )));
        }
        acc += (vo - eta * vi - (1.0 - eta) * v_vac) / v_vac;
    }
    Ok(acc / v_in.len() as f64)
}

/// Bandwidth from pulse FWHM, `B = 1 / FWHM`.
pub fn fwhm_to_bandwidth(fwhm_s: f64) -> Result<f64> {
    if !(fwhm_s > 0.0) || !fwhm_s.is_finite() {
        return Err(invalid(format!("FWHM must be positive, got {fwhm_s}")));
    }
    Ok(1.0 / fwhm_s)
}

pub fn bandwidth_to_fwhm(bandwidth_hz: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
        return Err(invalid(format!("bandwidth must be positive, got {bandwidth_hz}")));
    }
    Ok(1.0 / bandwidth_hz)
}
