use std::f64::consts::PI;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DensityMatrix, C64};
use crate::error::{Error, Result};

/// Wigner function sampled on a rectangular `(x, p)` grid, vacuum-1/2
/// convention (vacuum `W(0,0) = 1/π`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    /// Row-major `[ix][ip]`.
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn at(&self, ix: usize, ip: usize) -> f64 {
        self.values[ix * self.ps.len() + ip]
    }

    fn spacing(v: &[f64]) -> f64 {
        if v.len() < 2 {
            0.0
        } else {
            (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64
        }
    }

    /// `∬ W dx dp` by the rectangle rule on a uniform grid.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * Self::spacing(&self.xs) * Self::spacing(&self.ps)
    }

    /// `∫ W(x, p) dp` for every grid `x`.
    pub fn marginal_x(&self) -> Vec<f64> {
        let dp = Self::spacing(&self.ps);
        self.values.chunks(self.ps.len()).map(|row| row.iter().sum::<f64>() * dp).collect()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `W(x,p) = Σ_{m,n} ρ_{mn} W_{mn}(x,p)` with, for `m >= n`,
///
/// ```text
/// W_mn = (-1)^n/π sqrt(n!/m!) (√2 (x - ip))^{m-n} e^{-(x²+p²)} L_n^{(m-n)}(2(x²+p²))
/// ```
///
/// and `W_nm = conj(W_mn)`.
pub fn wigner_evaluate(rho: &DensityMatrix, xs: &[f64], ps: &[f64]) -> Result<WignerGrid> {
    if xs.is_empty() || ps.is_empty() {
        return Err(Error::Empty("Wigner grid has no points".into()));
    }
    let values = xs
        .par_iter()
        .flat_map_iter(|&x| ps.iter().map(move |&p| wigner_point(rho, x, p)))
        .collect();
    Ok(WignerGrid {
        xs: xs.to_vec(),
        ps: ps.to_vec(),
        values,
    })
}

fn wigner_point(rho: &DensityMatrix, x: f64, p: f64) -> f64 {
    let n_c = rho.cutoff();
    let r2 = x * x + p * p;
    let y = 2.0 * r2;
    let gauss = (-r2).exp() / PI;
    let z = C64::new(x, -p) * std::f64::consts::SQRT_2;
    let mut total = 0.0;
    let mut zk = C64::new(1.0, 0.0);
    for k in 0..n_c {
        if k > 0 {
            zk *= z;
        }
        let kf = k as f64;
        // L_n^{(k)} by recurrence, and sqrt(n!/(n+k)!) incrementally.
        let mut l_prev = 0.0;
        let mut l = 1.0;
        let mut ratio = (1..=k).fold(1.0, |acc, j| acc / (j as f64).sqrt());
        let mut sign = 1.0;
        for n in 0..n_c - k {
            let nf = n as f64;
            if n > 0 {
                let next = ((2.0 * nf - 1.0 + kf - y) * l - (nf - 1.0 + kf) * l_prev) / nf;
                l_prev = l;
                l = next;
                ratio *= (nf / (nf + kf)).sqrt();
                sign = -sign;
            }
            let w = zk * (sign * ratio * l * gauss);
            let term = rho.get(n + k, n) * w;
            total += if k == 0 { term.re } else { 2.0 * term.re };
        }
    }
    total
}

/// Writes `x,p,W` rows.
pub fn write_wigner_csv(grid: &WignerGrid, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,p,W")?;
    for (ix, x) in grid.xs.iter().enumerate() {
        for (ip, p) in grid.ps.iter().enumerate() {
            writeln!(w, "{x},{p},{}", grid.at(ix, ip))?;
        }
    }
    w.flush()?;
    Ok(())
}
