use nalgebra::DMatrix;

use super::{DensityMatrix, C64, DEFAULT_LEAKAGE_BOUND, MAX_CUTOFF};
use crate::error::{invalid, Error, Result};
use crate::gaussian::{ChannelParams, GaussianState};

/// Extra Fock levels carried while building and transmitting a state before
/// truncation to the requested cutoff.
const PAD: usize = 40;

/// Extra levels for the matrix-exponential squeeze, beyond the working space.
const SQUEEZE_PAD: usize = 60;

/// Thermal populations are kept until the remaining tail `q^k` drops below
/// this.
const THERMAL_TAIL: f64 = 1e-15;

const PURE_TOL: f64 = 1e-9;

/// Fock-space density matrix of a zero-mean Gaussian state, optionally sent
/// through the noisy channel, with the default leakage bound.
pub fn gaussian_to_fock(state: &GaussianState, ch: Option<&ChannelParams>, cutoff: usize) -> Result<DensityMatrix> {
    gaussian_to_fock_with_bound(state, ch, cutoff, DEFAULT_LEAKAGE_BOUND)
}

/// As [`gaussian_to_fock`]. Fails when the population discarded by truncating
/// to `cutoff` exceeds `bound`; otherwise the retained block is renormalized.
pub fn gaussian_to_fock_with_bound(
    state: &GaussianState,
    ch: Option<&ChannelParams>,
    cutoff: usize,
    bound: f64,
) -> Result<DensityMatrix> {
    if cutoff == 0 || cutoff > MAX_CUTOFF {
        return Err(invalid(format!("Fock cutoff must be in 1..={MAX_CUTOFF}, got {cutoff}")));
    }
    let work = cutoff + PAD;
    let mut rho = if state.is_pure(PURE_TOL) {
        squeezed_vacuum_matrix(state, work)
    } else {
        squeezed_thermal_matrix(state, work)?
    };
    if let Some(ch) = ch {
        rho = channel_matrix(&rho, ch, work)?;
    }
    truncate(&rho, cutoff, bound)
}

/// Applies the noisy channel to `rho` on its own cutoff. The output is
/// renormalized after truncation, which must discard less than `bound`.
pub fn apply_fock_channel(rho: &DensityMatrix, ch: &ChannelParams, bound: f64) -> Result<DensityMatrix> {
    let n = rho.cutoff();
    let mut padded = DMatrix::zeros(n + PAD, n + PAD);
    padded.view_mut((0, 0), (n, n)).copy_from(rho.matrix());
    let out = channel_matrix(&padded, ch, n + PAD)?;
    truncate(&out, n, bound)
}

fn truncate(rho: &DMatrix<C64>, cutoff: usize, bound: f64) -> Result<DensityMatrix> {
    let kept = rho.view((0, 0), (cutoff, cutoff)).into_owned();
    let total = rho.trace().re;
    let leakage = (total - kept.trace().re).max(0.0);
    if leakage > bound {
        return Err(Error::Truncation { cutoff, leakage, bound });
    }
    DensityMatrix::from_unnormalized(kept)
}

/// Squeeze parameters `(r, φ)` with `φ = 2θ0` for a state whose minimum
/// quadrature sits at LO phase `θ0`.
fn squeeze_params(state: &GaussianState) -> (f64, f64) {
    (0.25 * (state.v_max() / state.v_min()).ln(), 2.0 * state.angle())
}

/// `|ξ⟩ = cosh(r)^{-1/2} Σ_n (-e^{iφ} tanh r)^n sqrt((2n)!)/(2^n n!) |2n⟩`.
fn squeezed_vacuum_matrix(state: &GaussianState, dim: usize) -> DMatrix<C64> {
    let (r, phi) = squeeze_params(state);
    let t = r.tanh();
    let mut amp = vec![C64::new(0.0, 0.0); dim];
    let ratio = C64::from_polar(-t, phi);
    // c_{2n} / c_{2n-2} = ratio * sqrt((2n)(2n-1)) / (2n).
    let mut c = C64::new(1.0 / r.cosh().sqrt(), 0.0);
    for k in (0..dim).step_by(2) {
        if k > 0 {
            let kf = k as f64;
            c *= ratio * (kf * (kf - 1.0)).sqrt() / kf;
        }
        amp[k] = c;
    }
    let v = nalgebra::DVector::from_vec(amp);
    &v * v.adjoint()
}

/// `S(ξ) ρ_th S(ξ)†` with the squeeze operator from a matrix exponential on a
/// padded space, then rotated to the state's angle.
fn squeezed_thermal_matrix(state: &GaussianState, dim: usize) -> Result<DMatrix<C64>> {
    let nu = (state.v_min() * state.v_max()).sqrt();
    let nbar = 0.5 * (nu - 1.0);
    let (r, phi) = squeeze_params(state);
    let big = dim + SQUEEZE_PAD;
    let pops = thermal_populations(nbar, big)?;
    // S(r) = exp(r/2 (a² - a†²)), real for real r.
    let mut gen = DMatrix::<f64>::zeros(big, big);
    for m in 2..big {
        let a2 = ((m * (m - 1)) as f64).sqrt() * 0.5 * r;
        gen[(m - 2, m)] = a2;
        gen[(m, m - 2)] = -a2;
    }
    let s = gen.exp();
    let mut rho = DMatrix::<f64>::zeros(big, big);
    for (k, &p) in pops.iter().enumerate() {
        let col = s.column(k);
        rho += (col * col.transpose()).scale(p);
    }
    Ok(DMatrix::from_fn(dim, dim, |m, n| {
        C64::from_polar(rho[(m, n)], (m as f64 - n as f64) * 0.5 * phi)
    }))
}

fn thermal_populations(nbar: f64, max_len: usize) -> Result<Vec<f64>> {
    if nbar <= 0.0 {
        return Ok(vec![1.0]);
    }
    let q = nbar / (nbar + 1.0);
    let mut p = 1.0 / (nbar + 1.0);
    let mut pops = Vec::new();
    // After k levels the remaining population is exactly q^k.
    let mut tail: f64 = 1.0;
    while tail > THERMAL_TAIL {
        if pops.len() == max_len {
            return Err(Error::Truncation {
                cutoff: max_len,
                leakage: tail,
                bound: THERMAL_TAIL,
            });
        }
        pops.push(p);
        tail *= q;
        p *= q;
    }
    Ok(pops)
}

/// Beam splitter of transmissivity `η` against a thermal ancilla with
/// `n̄ = δ/(2(1-η))`, ancilla traced out.
fn channel_matrix(rho: &DMatrix<C64>, ch: &ChannelParams, dim: usize) -> Result<DMatrix<C64>> {
    let eta = ch.eta();
    let delta = ch.delta();
    if eta == 1.0 {
        if delta > 0.0 {
            return Err(invalid(
                "a unit-transmission channel cannot add noise through a thermal ancilla",
            ));
        }
        return Ok(rho.clone());
    }
    let nbar = delta / (2.0 * (1.0 - eta));
    let pops = thermal_populations(nbar, 4 * MAX_CUTOFF)?;
    let n_in = rho.nrows();
    let kmax = pops.len();
    let table = BeamSplitter::new(eta, n_in + kmax);
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    for (k, &pk) in pops.iter().enumerate() {
        let amp = table.amplitudes(k, n_in);
        for n in 0..n_in {
            for p in 0..dim.min(n + k + 1) {
                let a = amp[n][p] * pk;
                if a == 0.0 {
                    continue;
                }
                // Same ancilla output photon number: n' - p' = n - p.
                for pp in 0..dim {
                    let np = n as isize - p as isize + pp as isize;
                    if np < 0 || np as usize >= n_in {
                        continue;
                    }
                    let np = np as usize;
                    let b = amp[np][pp];
                    if b != 0.0 {
                        out[(p, pp)] += rho[(n, np)] * (a * b);
                    }
                }
            }
        }
    }
    Ok(out)
}

struct BeamSplitter {
    t: f64,
    s: f64,
    ln_fact: Vec<f64>,
    binom: Vec<Vec<f64>>,
}

impl BeamSplitter {
    fn new(eta: f64, max_n: usize) -> Self {
        let mut ln_fact = vec![0.0; max_n + 1];
        for i in 1..=max_n {
            ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
        }
        let mut binom = vec![vec![1.0]];
        for n in 1..=max_n {
            let prev = &binom[n - 1];
            let mut row = vec![1.0; n + 1];
            for i in 1..n {
                row[i] = prev[i - 1] + prev[i];
            }
            binom.push(row);
        }
        BeamSplitter {
            t: eta.sqrt(),
            s: (1.0 - eta).sqrt(),
            ln_fact,
            binom,
        }
    }

    /// `A[n][p] = ⟨p, n+k-p| U |n, k⟩` for `U a† U† = t a† - s b†`,
    /// `U b† U† = s a† + t b†`.
    fn amplitudes(&self, k: usize, n_in: usize) -> Vec<Vec<f64>> {
        let (t, s) = (self.t, self.s);
        (0..n_in)
            .map(|n| {
                (0..=n + k)
                    .map(|p| {
                        let q = n + k - p;
                        let norm =
                            (0.5 * (self.ln_fact[p] + self.ln_fact[q] - self.ln_fact[n] - self.ln_fact[k])).exp();
                        let lo = p.saturating_sub(k);
                        let hi = p.min(n);
                        let mut acc = 0.0;
                        for i in lo..=hi {
                            let l = p - i;
                            acc += self.binom[n][i]
                                * self.binom[k][l]
                                * t.powi((i + k - l) as i32)
                                * (-s).powi((n - i) as i32)
                                * s.powi(l as i32);
                        }
                        acc * norm
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
pub(super) fn beam_splitter_norms(eta: f64, k: usize, n_in: usize) -> Vec<f64> {
    let bs = BeamSplitter::new(eta, n_in + k);
    bs.amplitudes(k, n_in)
        .iter()
        .map(|row| row.iter().map(|a| a * a).sum())
        .collect()
}

#[cfg(test)]
pub(super) fn squeezed_thermal_for_test(state: &GaussianState, dim: usize) -> Result<DMatrix<C64>> {
    squeezed_thermal_matrix(state, dim)
}
