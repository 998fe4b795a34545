use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{hermitize, quadrature_amplitudes, DensityMatrix, QuadratureSample, C64, DEFAULT_LEAKAGE_BOUND};
use crate::error::{invalid, Error, Result};

/// Lower bound applied to bin probabilities before dividing by them.
const PROB_FLOOR: f64 = 1e-12;

/// Relative slack on the log-likelihood before a step counts as a decrease.
const LL_SLACK: f64 = 1e-9;

const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MleConfig {
    pub cutoff: usize,
    pub iterations: usize,
    /// Dilution `ε` of the first attempt at each step,
    /// `R_ε = (I + εR)/(1 + ε)`. `None` starts from the undiluted `R`.
    /// On a log-likelihood decrease `ε` is halved.
    pub damping: Option<f64>,
    pub x_bins: usize,
    /// Lattice spans `[-x_max, x_max]` in the vacuum-1/2 convention.
    pub x_max: f64,
    pub theta_bins: usize,
    /// Stop once the relative log-likelihood gain of a step falls below this.
    pub tolerance: f64,
    /// Warn when the top Fock level holds more than this.
    pub leakage_bound: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        MleConfig {
            cutoff: 20,
            iterations: 2000,
            damping: None,
            x_bins: 200,
            x_max: 6.0,
            theta_bins: 24,
            tolerance: 1e-10,
            leakage_bound: DEFAULT_LEAKAGE_BOUND,
        }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cutoff == 0 || self.cutoff > super::MAX_CUTOFF {
            return Err(invalid(format!("cutoff {} outside 1..={}", self.cutoff, super::MAX_CUTOFF)));
        }
        if self.iterations == 0 {
            return Err(invalid("MLE needs at least one iteration"));
        }
        if let Some(d) = self.damping {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid(format!("damping must be positive, got {d}")));
            }
        }
        if self.x_bins < 2 || self.theta_bins < 1 {
            return Err(invalid("MLE lattice needs at least 2 x-bins and 1 θ-bin"));
        }
        if !(self.x_max > 0.0 && self.x_max.is_finite()) {
            return Err(invalid(format!("x_max must be positive, got {}", self.x_max)));
        }
        if !(self.tolerance >= 0.0) {
            return Err(invalid("tolerance must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MleResult {
    pub rho: DensityMatrix,
    /// Log-likelihood after each accepted step, starting with the initial
    /// maximally mixed state.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub samples_used: usize,
    /// Samples outside `[-x_max, x_max]`.
    pub samples_dropped: usize,
    pub warnings: Vec<String>,
}

struct Lattice {
    /// Columns are `⟨n|x_b, θ_b⟩` for occupied bins.
    amps: DMatrix<C64>,
    counts: Vec<f64>,
    dx: f64,
}

fn build_lattice(samples: &[QuadratureSample], cfg: &MleConfig) -> Result<(Lattice, usize)> {
    let nx = cfg.x_bins;
    let nt = cfg.theta_bins;
    let dx = 2.0 * cfg.x_max / nx as f64;
    let mut counts = vec![0usize; nx * nt];
    let mut dropped = 0;
    for s in samples {
        let mut theta = s.theta.rem_euclid(2.0 * PI);
        let mut x = s.x;
        // x_{θ+π} = -x_θ.
        if theta >= PI {
            theta -= PI;
            x = -x;
        }
        let ix = ((x + cfg.x_max) / dx).floor();
        if !(ix >= 0.0 && ix < nx as f64) {
            dropped += 1;
            continue;
        }
        let it = ((theta / PI * nt as f64) as usize).min(nt - 1);
        counts[it * nx + ix as usize] += 1;
    }
    let occupied: Vec<(usize, usize)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (i, c))
        .collect();
    let cols: Vec<Vec<C64>> = occupied
        .par_iter()
        .map(|&(i, _)| {
            let (it, ix) = (i / nx, i % nx);
            let x = -cfg.x_max + (ix as f64 + 0.5) * dx;
            let theta = (it as f64 + 0.5) * PI / nt as f64;
            quadrature_amplitudes(x, theta, cfg.cutoff)
        })
        .collect::<Result<_>>()?;
    let n = cfg.cutoff;
    let amps = DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]);
    Ok((
        Lattice {
            amps,
            counts: occupied.iter().map(|&(_, c)| c as f64).collect(),
            dx,
        },
        dropped,
    ))
}

impl Lattice {
    /// Per-bin densities `⟨x,θ|ρ|x,θ⟩`.
    fn probabilities(&self, rho: &DMatrix<C64>) -> Vec<f64> {
        let ra = rho * &self.amps;
        (0..self.amps.ncols())
            .map(|b| {
                self.amps
                    .column(b)
                    .iter()
                    .zip(ra.column(b).iter())
                    .map(|(v, w)| (v.conj() * w).re)
                    .sum()
            })
            .collect()
    }

    fn log_likelihood(&self, probs: &[f64]) -> f64 {
        probs
            .iter()
            .zip(&self.counts)
            .map(|(p, c)| c * (p.max(PROB_FLOOR) * self.dx).ln())
            .sum()
    }

    /// `R = Σ_b (c_b/N) / p_b |x_b,θ_b⟩⟨x_b,θ_b|`.
    fn r_operator(&self, probs: &[f64], total: f64) -> DMatrix<C64> {
        let mut scaled = self.amps.clone();
        for (b, mut col) in scaled.column_iter_mut().enumerate() {
            let w = self.counts[b] / total / probs[b].max(PROB_FLOOR);
            col.scale_mut(w);
        }
        hermitize(&(scaled * self.amps.adjoint()))
    }
}

/// Iterative maximum-likelihood reconstruction, `ρ ← R ρ R / Tr(R ρ R)`,
/// on a binned `(x, θ)` lattice. Samples with `θ ∈ [π, 2π)` are folded onto
/// `(θ - π, -x)`.
pub fn mle_reconstruct(samples: &[QuadratureSample], cfg: &MleConfig) -> Result<MleResult> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("no quadrature samples".into()));
    }
    let mut warnings = Vec::new();
    if samples.len() < 10 * cfg.cutoff {
        warnings.push(format!(
            "{} samples for cutoff {}: at least {} recommended",
            samples.len(),
            cfg.cutoff,
            10 * cfg.cutoff
        ));
    }
    let (lattice, dropped) = build_lattice(samples, cfg)?;
    let used = samples.len() - dropped;
    if used == 0 {
        return Err(Error::Empty(format!("all samples fall outside ±{}", cfg.x_max)));
    }
    if dropped > 0 {
        warnings.push(format!("{dropped} samples outside ±{} dropped", cfg.x_max));
    }
    let total = used as f64;
    let n = cfg.cutoff;
    let eye = DMatrix::<C64>::identity(n, n);

    let mut rho = DensityMatrix::maximally_mixed(n).matrix().clone();
    let mut probs = lattice.probabilities(&rho);
    let mut ll = lattice.log_likelihood(&probs);
    let mut history = vec![ll];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.iterations {
        let r = lattice.r_operator(&probs, total);
        let mut eps = cfg.damping;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let step = match eps {
                None => r.clone(),
                Some(e) => (&eye + r.scale(e)).unscale(1.0 + e),
            };
            let next = hermitize(&(&step * &rho * &step));
            let tr = next.trace().re;
            let next = next.unscale(tr);
            let p = lattice.probabilities(&next);
            let l = lattice.log_likelihood(&p);
            if l >= ll - LL_SLACK * ll.abs() {
                accepted = Some((next, p, l));
                break;
            }
            eps = Some(eps.map_or(1.0, |e| e / 2.0));
        }
        let Some((next, p, l)) = accepted else {
            converged = true;
            break;
        };
        iterations += 1;
        if cfg!(debug_assertions) {
            DensityMatrix::new(next.clone())?;
        }
        let gain = l - ll;
        rho = next;
        probs = p;
        ll = l;
        history.push(ll);
        if gain <= cfg.tolerance * ll.abs() {
            converged = true;
            break;
        }
    }

    let rho = DensityMatrix::from_unnormalized(rho)?;
    if rho.tail_population() > cfg.leakage_bound {
        warnings.push(format!(
            "top Fock level population {:.2e} exceeds {:.0e}; increase the cutoff",
            rho.tail_population(),
            cfg.leakage_bound
        ));
    }
    Ok(MleResult {
        rho,
        log_likelihood: history,
        iterations,
        converged,
        samples_used: used,
        samples_dropped: dropped,
        warnings,
    })
}
