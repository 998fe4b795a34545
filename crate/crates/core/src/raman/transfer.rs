use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::lattice::StageLattice;
use super::{check_mode, check_pulse, ControlPulse, MemoryParams, Retrieval};
use crate::error::{Error, Result};
use crate::gaussian::ChannelParams;
use crate::mode::TemporalMode;

type C = Complex64;

/// Allowed deviation of `sum |B|^2 - sum |G|^2` from its exact value. The cell
/// lattice is exactly symplectic, so only rounding contributes.
pub const COMMUTATOR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Signal,
    AntiStokes,
    Spin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Write,
    Read,
    /// Spin wave at the start of the write or end of the read.
    Medium,
}

/// Contiguous range of matrix indices carrying one family of modes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModeBlock {
    pub kind: ModeKind,
    pub stage: StageKind,
    /// Creation-operator channel (anti-Stokes); counts with a minus sign in the
    /// commutator.
    pub conjugated: bool,
    pub start: usize,
    pub len: usize,
}

impl ModeBlock {
    fn new(kind: ModeKind, stage: StageKind, start: usize, len: usize) -> ModeBlock {
        ModeBlock {
            kind,
            stage,
            conjugated: kind == ModeKind::AntiStokes,
            start,
            len,
        }
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }

    pub fn label(&self) -> String {
        let kind = match self.kind {
            ModeKind::Signal => "signal",
            ModeKind::AntiStokes => "anti_stokes",
            ModeKind::Spin => "spin",
        };
        let stage = match self.stage {
            StageKind::Write => "write",
            StageKind::Read => "read",
            StageKind::Medium => "medium",
        };
        format!("{stage}_{kind}")
    }
}

/// Linear input-output map of mode operators, `out = M in`, with block
/// annotations for both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub matrix: DMatrix<C>,
    pub inputs: Vec<ModeBlock>,
    pub outputs: Vec<ModeBlock>,
}

fn signs(blocks: &[ModeBlock], n: usize) -> Vec<f64> {
    let mut s = vec![1.0; n];
    for b in blocks.iter().filter(|b| b.conjugated) {
        for i in b.range() {
            s[i] = -1.0;
        }
    }
    s
}

impl TransferMatrix {
    /// Single stage: inputs and outputs are `[signal, anti-Stokes, spin]`.
    pub fn stage(lattice: &StageLattice) -> TransferMatrix {
        let (n_t, n_z) = (lattice.n_t(), lattice.n_z());
        let n = 2 * n_t + n_z;
        let zero = C::new(0.0, 0.0);
        let columns: Vec<Vec<C>> = (0..n)
            .into_par_iter()
            .map(|c| {
                let mut a = vec![zero; n_t];
                let mut b = vec![zero; n_t];
                let mut s = vec![zero; n_z];
                if c < n_t {
                    a[c] = C::new(1.0, 0.0);
                } else if c < 2 * n_t {
                    b[c - n_t] = C::new(1.0, 0.0);
                } else {
                    s[c - 2 * n_t] = C::new(1.0, 0.0);
                }
                let out = lattice.propagate(&a, &b, &s, false);
                let mut col = out.a_out;
                col.extend(out.b_out);
                col.extend(out.spin);
                col
            })
            .collect();
        let mut matrix = DMatrix::from_element(n, n, zero);
        for (c, col) in columns.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                matrix[(r, c)] = *v;
            }
        }
        let blocks = |stage| {
            vec![
                ModeBlock::new(ModeKind::Signal, stage, 0, n_t),
                ModeBlock::new(ModeKind::AntiStokes, stage, n_t, n_t),
                ModeBlock::new(ModeKind::Spin, StageKind::Medium, 2 * n_t, n_z),
            ]
        };
        TransferMatrix {
            matrix,
            inputs: blocks(StageKind::Write),
            outputs: blocks(StageKind::Write),
        }
    }

    /// Full write-then-read map.
    ///
    /// Inputs: `[write signal, write anti-Stokes, initial spin, read signal, read anti-Stokes]`.
    /// Outputs: `[transmitted signal, write anti-Stokes, retrieved signal, read anti-Stokes, final spin]`.
    pub fn memory(write: &StageLattice, read: &StageLattice, retrieval: Retrieval) -> TransferMatrix {
        let w = TransferMatrix::stage(write);
        let r = TransferMatrix::stage(read);
        let (nw, nr, nz) = (write.n_t(), read.n_t(), write.n_z());
        let w_n = 2 * nw + nz;
        let r_n = 2 * nr + nz;
        let n = w_n + 2 * nr;
        let zero = C::new(0.0, 0.0);
        let mirror = |j: usize| match retrieval {
            Retrieval::Forward => j,
            Retrieval::Backward => nz - 1 - j,
        };

        // Spin wave after writing, as rows over the write inputs, in read frame.
        let mut s1 = DMatrix::from_element(nz, w_n, zero);
        for j in 0..nz {
            let src = 2 * nw + mirror(j);
            for c in 0..w_n {
                s1[(j, c)] = w.matrix[(src, c)];
            }
        }
        let read_from_spin = r.matrix.columns(2 * nr, nz) * &s1; // r_n x w_n

        let mut m = DMatrix::from_element(n, n, zero);
        // Write outputs depend on write inputs only.
        for i in 0..2 * nw {
            for c in 0..w_n {
                m[(i, c)] = w.matrix[(i, c)];
            }
        }
        // Read outputs; the final spin rows are mirrored back to the lab frame.
        for i in 0..r_n {
            let row = if i < 2 * nr {
                2 * nw + i
            } else {
                2 * nw + 2 * nr + mirror(i - 2 * nr)
            };
            for c in 0..w_n {
                m[(row, c)] = read_from_spin[(i, c)];
            }
            for c in 0..2 * nr {
                m[(row, w_n + c)] = r.matrix[(i, c)];
            }
        }
        let inputs = vec![
            ModeBlock::new(ModeKind::Signal, StageKind::Write, 0, nw),
            ModeBlock::new(ModeKind::AntiStokes, StageKind::Write, nw, nw),
            ModeBlock::new(ModeKind::Spin, StageKind::Medium, 2 * nw, nz),
            ModeBlock::new(ModeKind::Signal, StageKind::Read, w_n, nr),
            ModeBlock::new(ModeKind::AntiStokes, StageKind::Read, w_n + nr, nr),
        ];
        let outputs = vec![
            ModeBlock::new(ModeKind::Signal, StageKind::Write, 0, nw),
            ModeBlock::new(ModeKind::AntiStokes, StageKind::Write, nw, nw),
            ModeBlock::new(ModeKind::Signal, StageKind::Read, 2 * nw, nr),
            ModeBlock::new(ModeKind::AntiStokes, StageKind::Read, 2 * nw + nr, nr),
            ModeBlock::new(ModeKind::Spin, StageKind::Medium, 2 * nw + 2 * nr, nz),
        ];
        TransferMatrix {
            matrix: m,
            inputs,
            outputs,
        }
    }

    pub fn input_signs(&self) -> Vec<f64> {
        signs(&self.inputs, self.matrix.ncols())
    }

    pub fn output_signs(&self) -> Vec<f64> {
        signs(&self.outputs, self.matrix.nrows())
    }

    /// `sum_c sign_c |row_c|^2` for a row vector over the inputs.
    pub fn row_form(&self, row: &[C]) -> f64 {
        row.iter()
            .zip(self.input_signs())
            .map(|(z, s)| s * z.norm_sqr())
            .sum()
    }

    /// Largest deviation of any row from the canonical commutator.
    pub fn commutator_residual(&self) -> f64 {
        let cs = self.input_signs();
        let rs = self.output_signs();
        (0..self.matrix.nrows())
            .map(|r| {
                let form: f64 = (0..self.matrix.ncols())
                    .map(|c| cs[c] * self.matrix[(r, c)].norm_sqr())
                    .sum();
                (form - rs[r]).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn block(&self, blocks: &[ModeBlock], kind: ModeKind, stage: StageKind) -> Option<ModeBlock> {
        blocks
            .iter()
            .find(|b| b.kind == kind && b.stage == stage)
            .cloned()
    }

    /// Dense CSV with one line per entry. Block labels make the layout
    /// self-describing.
    pub fn to_csv(&self) -> String {
        let label = |blocks: &[ModeBlock], i: usize| -> (String, usize) {
            blocks
                .iter()
                .find(|b| b.range().contains(&i))
                .map(|b| (b.label(), i - b.start))
                .unwrap_or_default()
        };
        let mut s = String::from("row,col,output_block,output_index,input_block,input_index,re,im\n");
        for r in 0..self.matrix.nrows() {
            let (ob, oi) = label(&self.outputs, r);
            for c in 0..self.matrix.ncols() {
                let (ib, ii) = label(&self.inputs, c);
                let z = self.matrix[(r, c)];
                s.push_str(&format!("{r},{c},{ob},{oi},{ib},{ii},{},{}\n", z.re, z.im));
            }
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (nr, nc) = self.matrix.shape();
        let mut re = Vec::with_capacity(nr * nc);
        let mut im = Vec::with_capacity(nr * nc);
        for r in 0..nr {
            for c in 0..nc {
                re.push(self.matrix[(r, c)].re);
                im.push(self.matrix[(r, c)].im);
            }
        }
        serde_json::json!({
            "rows": nr,
            "cols": nc,
            "layout": "row-major",
            "inputs": self.inputs,
            "outputs": self.outputs,
            "re": re,
            "im": im,
        })
    }
}

/// Effective single-mode channel of the memory for a chosen output mode.
#[derive(Debug, Clone)]
pub struct BogoliubovChannel {
    /// `|T|^2`, with `T` the coefficient of the input signal mode.
    pub eta: f64,
    /// `2 sum |G|^2` over conjugated (anti-Stokes) input coefficients.
    pub delta: f64,
    pub transmission: C,
    /// Output-mode operator as a row over all input modes.
    pub row: Vec<C>,
    /// `sum |B|^2 - sum |G|^2` of `row`; exactly one for a valid solution.
    pub commutator: f64,
    pub transfer: TransferMatrix,
}

impl BogoliubovChannel {
    /// Channel parameters; fails when amplification pushes `eta` above one.
    pub fn channel(&self) -> Result<ChannelParams> {
        ChannelParams::new(self.eta, self.delta)
    }

    /// Output quadrature variance (SNU) at LO phase `theta` when the input
    /// signal mode carries `state` and every other input is vacuum.
    pub fn output_variance(&self, state: &crate::GaussianState, theta: f64) -> f64 {
        let others = self
            .row
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            - self.eta;
        self.eta * state.quadrature_variance(theta - self.transmission.arg()) + others
    }
}

pub fn bogoliubov_channel(
    params: &MemoryParams,
    write: &ControlPulse,
    read: &ControlPulse,
    input_mode: &TemporalMode,
    output_mode: &TemporalMode,
) -> Result<BogoliubovChannel> {
    params.validate()?;
    check_pulse(params, write, "write")?;
    check_pulse(params, read, "read")?;
    check_mode(write, input_mode, "input")?;
    check_mode(read, output_mode, "output")?;
    let wl = StageLattice::new(params, write);
    let rl = StageLattice::new(params, read);
    let transfer = TransferMatrix::memory(&wl, &rl, params.retrieval);

    let residual = transfer.commutator_residual();
    if residual > COMMUTATOR_TOL {
        return Err(Error::SolverAccuracy(format!(
            "transfer matrix violates commutator preservation by {residual:.3e}"
        )));
    }

    let retrieved = transfer
        .block(&transfer.outputs, ModeKind::Signal, StageKind::Read)
        .expect("memory transfer has a retrieved-signal block");
    let w_out = output_mode.bin_amplitudes();
    let ncols = transfer.matrix.ncols();
    let row: Vec<C> = (0..ncols)
        .map(|c| {
            retrieved
                .range()
                .zip(&w_out)
                .map(|(r, w)| w.conj() * transfer.matrix[(r, c)])
                .sum()
        })
        .collect();

    let w_in = input_mode.bin_amplitudes();
    let signal_in = transfer
        .block(&transfer.inputs, ModeKind::Signal, StageKind::Write)
        .expect("memory transfer has a write-signal block");
    let t: C = signal_in.range().zip(&w_in).map(|(c, w)| row[c] * w).sum();

    let signs = transfer.input_signs();
    let commutator = transfer.row_form(&row);
    if (commutator - 1.0).abs() > COMMUTATOR_TOL {
        return Err(Error::SolverAccuracy(format!(
            "output mode commutator {commutator} differs from 1"
        )));
    }
    let g2: f64 = row
        .iter()
        .zip(&signs)
        .filter(|(_, s)| **s < 0.0)
        .map(|(z, _)| z.norm_sqr())
        .sum();
    Ok(BogoliubovChannel {
        eta: t.norm_sqr(),
        delta: 2.0 * g2,
        transmission: t,
        row,
        commutator,
        transfer,
    })
}
