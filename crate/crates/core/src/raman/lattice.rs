use num_complex::Complex64;

use super::{ControlPulse, FieldState, MemoryParams};

type C = Complex64;

/// Row-major 3x3 map on the local amplitudes `(a, b, s)`.
type Cell = [C; 9];

const IDENTITY: Cell = [
    C::new(1.0, 0.0),
    C::new(0.0, 0.0),
    C::new(0.0, 0.0),
    C::new(0.0, 0.0),
    C::new(1.0, 0.0),
    C::new(0.0, 0.0),
    C::new(0.0, 0.0),
    C::new(0.0, 0.0),
    C::new(1.0, 0.0),
];

/// Precomputed cell maps for one stage (one control pulse on one grid).
///
/// Amplitudes are bin-normalized: `a_k = A(t_k) sqrt(dt)`, `s_j = S(z_j) sqrt(dz)`,
/// so `|a|^2 + |s|^2 - |b|^2` summed over the lattice boundary is the conserved
/// excitation.
#[derive(Debug, Clone)]
pub struct StageLattice {
    cells: Vec<Cell>,
    n_t: usize,
    n_z: usize,
    dt: f64,
    dz: f64,
}

pub(crate) struct StageOutput {
    pub a_out: Vec<C>,
    pub b_out: Vec<C>,
    pub spin: Vec<C>,
    /// Bin amplitudes at slice boundaries when recorded.
    pub a_field: Option<Vec<C>>,
    pub b_field: Option<Vec<C>>,
}

impl StageOutput {
    pub fn into_field_state(self, lattice: &StageLattice) -> FieldState {
        let ta = 1.0 / lattice.dt.sqrt();
        let za = 1.0 / lattice.dz.sqrt();
        FieldState {
            n_t: lattice.n_t,
            n_z: lattice.n_z,
            dt: lattice.dt,
            dz: lattice.dz,
            signal: self
                .a_field
                .unwrap_or_default()
                .into_iter()
                .map(|z| z * ta)
                .collect(),
            anti_stokes: self
                .b_field
                .unwrap_or_default()
                .into_iter()
                .map(|z| z * ta)
                .collect(),
            spin_wave: self.spin.into_iter().map(|z| z * za).collect(),
        }
    }
}

/// Exact exponential of the frozen generator over one cell.
///
/// The generator `M` has the block form `[[0, c], [-c^† G, 0]]` with
/// `G = diag(1, -1)`, hence `M^3 = -μ M` where `μ = c^† G c`, and
/// `exp(M) = I + f1(μ) M + f2(μ) M^2`.
fn cell_map(kappa: f64, g_s: f64, g_a: f64, omega: C, phase: C) -> Cell {
    if omega.norm_sqr() == 0.0 {
        return IDENTITY;
    }
    let zero = C::new(0.0, 0.0);
    let c0 = omega * (kappa * g_s);
    let c1 = omega * phase * (kappa * g_a);
    let r0 = -omega.conj() * (kappa * g_s);
    let r1 = omega.conj() * phase.conj() * (kappa * g_a);
    let m = [zero, zero, c0, zero, zero, c1, r0, r1, zero];
    let mu = kappa * kappa * omega.norm_sqr() * (g_s * g_s - g_a * g_a);
    let (f1, f2) = if mu.abs() < 1e-8 {
        (1.0 - mu / 6.0, 0.5 - mu / 24.0)
    } else if mu > 0.0 {
        let x = mu.sqrt();
        (x.sin() / x, (1.0 - x.cos()) / mu)
    } else {
        let x = (-mu).sqrt();
        (x.sinh() / x, (x.cosh() - 1.0) / (-mu))
    };
    let mut out = IDENTITY;
    for i in 0..3 {
        for j in 0..3 {
            let mut sq = zero;
            for l in 0..3 {
                sq += m[3 * i + l] * m[3 * l + j];
            }
            out[3 * i + j] += m[3 * i + j] * f1 + sq * f2;
        }
    }
    out
}

impl StageLattice {
    pub fn new(params: &MemoryParams, pulse: &ControlPulse) -> StageLattice {
        let n_t = pulse.len();
        let n_z = params.n_z;
        let dt = pulse.dt();
        let dz = params.dz();
        let kappa = (dt * dz).sqrt();
        let phases: Vec<C> = (0..n_z)
            .map(|j| C::from_polar(1.0, params.delta_k * (j as f64 + 0.5) * dz))
            .collect();
        let mut cells = Vec::with_capacity(n_t * n_z);
        for &omega in pulse.samples() {
            for &ph in &phases {
                cells.push(cell_map(kappa, params.g_s, params.g_a, omega, ph));
            }
        }
        StageLattice {
            cells,
            n_t,
            n_z,
            dt,
            dz,
        }
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    /// Sweeps the lattice for bin-normalized inputs: signal and conjugate
    /// anti-Stokes amplitudes entering at `z = 0` in each time bin, and the
    /// initial spin wave.
    pub(crate) fn propagate(&self, a_in: &[C], b_in: &[C], s0: &[C], record: bool) -> StageOutput {
        debug_assert_eq!(a_in.len(), self.n_t);
        debug_assert_eq!(b_in.len(), self.n_t);
        debug_assert_eq!(s0.len(), self.n_z);
        let stride = self.n_z + 1;
        let mut spin = s0.to_vec();
        let mut a_out = Vec::with_capacity(self.n_t);
        let mut b_out = Vec::with_capacity(self.n_t);
        let (mut a_field, mut b_field) = if record {
            (
                Some(Vec::with_capacity(self.n_t * stride)),
                Some(Vec::with_capacity(self.n_t * stride)),
            )
        } else {
            (None, None)
        };
        for k in 0..self.n_t {
            let mut a = a_in[k];
            let mut b = b_in[k];
            if let (Some(af), Some(bf)) = (a_field.as_mut(), b_field.as_mut()) {
                af.push(a);
                bf.push(b);
            }
            let row = &self.cells[k * self.n_z..(k + 1) * self.n_z];
            for (cell, s) in row.iter().zip(spin.iter_mut()) {
                let na = cell[0] * a + cell[1] * b + cell[2] * *s;
                let nb = cell[3] * a + cell[4] * b + cell[5] * *s;
                let ns = cell[6] * a + cell[7] * b + cell[8] * *s;
                a = na;
                b = nb;
                *s = ns;
                if let (Some(af), Some(bf)) = (a_field.as_mut(), b_field.as_mut()) {
                    af.push(a);
                    bf.push(b);
                }
            }
            a_out.push(a);
            b_out.push(b);
        }
        StageOutput {
            a_out,
            b_out,
            spin,
            a_field,
            b_field,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn form(v: &[C; 3]) -> f64 {
        v[0].norm_sqr() - v[1].norm_sqr() + v[2].norm_sqr()
    }

    fn apply(cell: &Cell, v: [C; 3]) -> [C; 3] {
        let mut o = [C::new(0.0, 0.0); 3];
        for i in 0..3 {
            for j in 0..3 {
                o[i] += cell[3 * i + j] * v[j];
            }
        }
        o
    }

    #[test]
    fn cell_preserves_indefinite_form() {
        let v = [C::new(0.3, -0.2), C::new(0.1, 0.4), C::new(-0.5, 0.05)];
        for &(gs, ga) in &[(1.0, 0.0), (1.0, 0.3), (0.5, 0.5), (0.2, 1.0)] {
            for &om in &[C::new(0.7, 0.0), C::new(3.0, -2.0), C::new(1e-5, 1e-5)] {
                let cell = cell_map(0.3, gs, ga, om, C::from_polar(1.0, 0.4));
                let w = apply(&cell, v);
                assert!((form(&v) - form(&w)).abs() < 1e-13, "gs {gs} ga {ga} om {om}");
            }
        }
    }

    #[test]
    fn cell_matches_series_exponential() {
        let kappa = 0.2;
        let (gs, ga) = (1.3, 0.4);
        let om = C::new(1.1, 0.6);
        let ph = C::from_polar(1.0, 0.9);
        let zero = C::new(0.0, 0.0);
        let m = [
            zero,
            zero,
            om * kappa * gs,
            zero,
            zero,
            om * ph * kappa * ga,
            -om.conj() * kappa * gs,
            om.conj() * ph.conj() * kappa * ga,
            zero,
        ];
        // Taylor series of exp(M) to high order.
        let mut term = IDENTITY;
        let mut sum = IDENTITY;
        for n in 1..30 {
            let mut next = [zero; 9];
            for i in 0..3 {
                for j in 0..3 {
                    for l in 0..3 {
                        next[3 * i + j] += term[3 * i + l] * m[3 * l + j];
                    }
                    next[3 * i + j] /= n as f64;
                }
            }
            term = next;
            for i in 0..9 {
                sum[i] += term[i];
            }
        }
        let cell = cell_map(kappa, gs, ga, om, ph);
        for i in 0..9 {
            assert!((cell[i] - sum[i]).norm() < 1e-14);
        }
    }
}
