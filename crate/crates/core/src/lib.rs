//! Desk-scale simulation and estimation toolkit for a Raman quantum memory
//! storing pulsed squeezed light.
//!
//! The signal chain runs from the memory dynamics ([`raman`]) through the
//! effective noisy Gaussian channel ([`gaussian`]), synthetic dual-pulse
//! homodyne data ([`homodyne`]) and finally state reconstruction and
//! channel-parameter estimation ([`tomography`], [`gaussian::estimate_excess_noise`]).
//! Write-pulse shaping by differential evolution lives in [`optim`], and the
//! scenario-driven command line front end in [`cli`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod gaussian;
pub mod homodyne;
pub mod mode;
pub mod optim;
pub mod pipeline;
pub mod raman;
pub mod tomography;

pub use error::{Error, Result};
pub use gaussian::{ChannelParams, GaussianState};
pub use mode::TemporalMode;
