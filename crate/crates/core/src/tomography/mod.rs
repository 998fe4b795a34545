//! Fock-basis state reconstruction from quadrature samples.
//!
//! Internally quadratures follow the vacuum-variance-1/2 convention,
//! `x = (a + a†)/√2`; SNU values are divided by √2 at the boundary
//! ([`QuadratureSample::from_snu`]).

mod fock;
mod mle;
mod wigner;


use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fock::{apply_fock_channel, gaussian_to_fock, gaussian_to_fock_with_bound};
pub use mle::{mle_reconstruct, MleConfig, MleResult};
pub use wigner::{wigner_evaluate, write_wigner_csv, WignerGrid};

pub type C64 = Complex<f64>;

/// Largest cutoff for which the Hermite recurrence is used.
pub const MAX_CUTOFF: usize = 200;

/// Default bound on the population of the top Fock level.
pub const DEFAULT_LEAKAGE_BOUND: f64 = 1e-4;

const INVARIANT_TOL: f64 = 1e-10;

/// One homodyne outcome in the vacuum-variance-1/2 convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSample {
    pub x: f64,
    pub theta: f64,
}

impl QuadratureSample {
    pub fn new(x: f64, theta: f64) -> Result<Self> {
        if !(x.is_finite() && theta.is_finite()) {
            return Err(crate::error::invalid(format!("non-finite sample ({x}, {theta})")));
        }
        Ok(QuadratureSample { x, theta })
    }

    /// From a quadrature in shot-noise units (vacuum variance 1).
    pub fn from_snu(x_snu: f64, theta: f64) -> Result<Self> {
        Self::new(x_snu * std::f64::consts::FRAC_1_SQRT_2, theta)
    }
}

/// `⟨n|x,θ⟩ = e^{inθ} ψ_n(x)` for `n = 0..cutoff`, with `ψ_n` the
/// harmonic-oscillator eigenfunctions evaluated by the normalized recurrence
/// `ψ_{n+1} = sqrt(2/(n+1)) x ψ_n - sqrt(n/(n+1)) ψ_{n-1}`.
pub fn quadrature_amplitudes(x: f64, theta: f64, cutoff: usize) -> Result<Vec<C64>> {
    let psi = hermite_functions(x, cutoff)?;
    Ok(psi
        .iter()
        .enumerate()
        .map(|(n, &p)| C64::from_polar(p, n as f64 * theta))
        .collect())
}

/// Real harmonic-oscillator eigenfunctions `ψ_0..ψ_{cutoff-1}` at `x`.
pub fn hermite_functions(x: f64, cutoff: usize) -> Result<Vec<f64>> {
    if cutoff == 0 || cutoff > MAX_CUTOFF {
        return Err(crate::error::invalid(format!(
            "Fock cutoff must be in 1..={MAX_CUTOFF}, got {cutoff}"
        )));
    }
    if !x.is_finite() {
        return Err(crate::error::invalid(format!("quadrature value {x} is not finite")));
    }
    let mut psi = Vec::with_capacity(cutoff);
    psi.push(PI.powf(-0.25) * (-0.5 * x * x).exp());
    if cutoff > 1 {
        psi.push(std::f64::consts::SQRT_2 * x * psi[0]);
    }
    for n in 1..cutoff.saturating_sub(1) {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * psi[n] - (nf / (nf + 1.0)).sqrt() * psi[n - 1];
        psi.push(next);
    }
    Ok(psi)
}

/// Density matrix on the truncated Fock space `|0⟩..|cutoff-1⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity, each within 1e-10.
    pub fn new(rho: DMatrix<C64>) -> Result<Self> {
        let dm = DensityMatrix { rho };
        dm.validate()?;
        Ok(dm)
    }

    /// Hermitizes and renormalizes `rho`, then validates it.
    pub fn from_unnormalized(rho: DMatrix<C64>) -> Result<Self> {
        let h = hermitize(&rho);
        let tr = h.trace().re;
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} is not positive")));
        }
        Self::new(h / C64::new(tr, 0.0))
    }

    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(amplitudes);
        let rho = &v * v.adjoint();
        Self::from_unnormalized(rho)
    }

    pub fn fock(n: usize, cutoff: usize) -> Result<Self> {
        if n >= cutoff {
            return Err(crate::error::invalid(format!("|{n}⟩ outside cutoff {cutoff}")));
        }
        let mut rho = DMatrix::zeros(cutoff, cutoff);
        rho[(n, n)] = C64::new(1.0, 0.0);
        Self::new(rho)
    }

    pub fn maximally_mixed(cutoff: usize) -> Self {
        let w = 1.0 / cutoff as f64;
        DensityMatrix {
            rho: DMatrix::from_diagonal_element(cutoff, cutoff, C64::new(w, 0.0)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rho = &self.rho;
        if rho.nrows() != rho.ncols() || rho.nrows() == 0 {
            return Err(Error::InvalidDensityMatrix(format!(
                "shape {}x{} is not square and non-empty",
                rho.nrows(),
                rho.ncols()
            )));
        }
        if rho.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidDensityMatrix("non-finite entries".into()));
        }
        let herm = (rho - rho.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if herm > INVARIANT_TOL {
            return Err(Error::InvalidDensityMatrix(format!("Hermiticity violated by {herm:.3e}")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > INVARIANT_TOL || tr.im.abs() > INVARIANT_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} differs from 1")));
        }
        let min_eig = self.eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -INVARIANT_TOL {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(())
    }

    pub fn cutoff(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn get(&self, m: usize, n: usize) -> C64 {
        self.rho[(m, n)]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.rho.clone().symmetric_eigen().eigenvalues.iter().cloned().collect()
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    /// Population of the highest retained Fock level.
    pub fn tail_population(&self) -> f64 {
        let n = self.cutoff();
        self.rho[(n - 1, n - 1)].re
    }

    pub fn check_leakage(&self, bound: f64) -> Result<()> {
        let tail = self.tail_population();
        if tail > bound {
            return Err(Error::Truncation {
                cutoff: self.cutoff(),
                leakage: tail,
                bound,
            });
        }
        Ok(())
    }

    pub fn photon_number(&self) -> f64 {
        (0..self.cutoff()).map(|n| n as f64 * self.rho[(n, n)].re).sum()
    }

    /// `⟨a²⟩ = Σ_m sqrt(m(m-1)) ρ_{m,m-2}`.
    pub fn a_squared(&self) -> C64 {
        (2..self.cutoff())
            .map(|m| self.rho[(m, m - 2)] * ((m * (m - 1)) as f64).sqrt())
            .sum()
    }

    /// Variance of the quadrature at LO phase `theta`, in SNU. The state is
    /// assumed zero-mean.
    pub fn quadrature_variance_snu(&self, theta: f64) -> f64 {
        // <x_θ²> = Re(<a²> e^{-2iθ}) + <n> + 1/2 in the vacuum-1/2 convention.
        let a2 = self.a_squared() * C64::from_polar(1.0, -2.0 * theta);
        2.0 * (a2.re + self.photon_number() + 0.5)
    }

    /// Probability density of outcome `x` at phase `theta`, `⟨x,θ|ρ|x,θ⟩`.
    pub fn quadrature_density(&self, x: f64, theta: f64) -> Result<f64> {
        let v = DVector::from_vec(quadrature_amplitudes(x, theta, self.cutoff())?);
        Ok((v.adjoint() * &self.rho * &v)[(0, 0)].re)
    }

    /// `(1-eps) ρ + eps I/N`.
    pub fn depolarized(&self, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(crate::error::invalid(format!("depolarizing weight {eps} outside [0, 1]")));
        }
        let mixed = Self::maximally_mixed(self.cutoff());
        Self::from_unnormalized(self.rho.scale(1.0 - eps) + mixed.rho.scale(eps))
    }

    /// JSON with `cutoff`, row-major `re` and `im` arrays and caller metadata.
    pub fn to_json(&self, metadata: serde_json::Value) -> Result<String> {
        let n = self.cutoff();
        let rows = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> {
            (0..n).map(|i| (0..n).map(|j| f(&self.rho[(i, j)])).collect()).collect()
        };
        let out = RhoFile {
            cutoff: n,
            re: rows(|z| z.re),
            im: rows(|z| z.im),
            metadata,
        };
        Ok(serde_json::to_string_pretty(&out)?)
    }

    pub fn from_json(s: &str) -> Result<(Self, serde_json::Value)> {
        let f: RhoFile = serde_json::from_str(s)?;
        let n = f.cutoff;
        if f.re.len() != n || f.im.len() != n || f.re.iter().chain(&f.im).any(|r| r.len() != n) {
            return Err(Error::InvalidDensityMatrix(format!("arrays do not match cutoff {n}")));
        }
        let rho = DMatrix::from_fn(n, n, |i, j| C64::new(f.re[i][j], f.im[i][j]));
        Ok((Self::new(rho)?, f.metadata))
    }
}

#[derive(Serialize, Deserialize)]
struct RhoFile {
    cutoff: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
    #[serde(default)]
    metadata: serde_json::Value,
}

pub(crate) fn hermitize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues below this are rounding noise; their square roots (~1e-8)
/// would otherwise bias the fidelity.
const EIG_FLOOR: f64 = 1e-14;

fn clipped_sqrt(l: f64) -> f64 {
    if l > EIG_FLOOR {
        l.sqrt()
    } else {
        0.0
    }
}

/// Positive square root of a Hermitian positive semidefinite matrix.
fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = hermitize(m).symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(clipped_sqrt(l), 0.0)));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(ρ1) ρ2 sqrt(ρ1)))²`, clamped to `[0, 1]`.
pub fn uhlmann_fidelity(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.cutoff() != rho2.cutoff() {
        return Err(Error::GridMismatch(format!(
            "cutoffs {} and {} differ",
            rho1.cutoff(),
            rho2.cutoff()
        )));
    }
    rho1.validate()?;
    rho2.validate()?;
    let s = psd_sqrt(&rho1.rho);
    let inner = hermitize(&(&s * &rho2.rho * &s));
    let tr: f64 = inner
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&l| clipped_sqrt(l))
        .sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}
