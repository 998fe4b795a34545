use serde::{Deserialize, Serialize};

use super::{bogoliubov_channel, solve_read, solve_write, BogoliubovChannel, ControlPulse, MemoryParams, Retrieval};
use crate::error::{invalid, Error, Result};
use crate::mode::TemporalMode;

/// Channel whose output mode is the normalized classical retrieved envelope,
/// so that `eta` equals the energy efficiency of the memory.
pub fn retrieved_mode_channel(
    params: &MemoryParams,
    write: &ControlPulse,
    read: &ControlPulse,
    input_mode: &TemporalMode,
) -> Result<BogoliubovChannel> {
    let w = solve_write(params, write, input_mode)?;
    let r = solve_read(params, read, &w.spin_wave)?;
    let mode = TemporalMode::normalized(r.retrieved.clone(), read.dt()).map_err(|_| {
        Error::SolverAccuracy("nothing retrieved; output mode undefined".into())
    })?;
    bogoliubov_channel(params, write, read, input_mode, &mode)
}

/// One point of a read-power sweep. `power` is the read pulse energy relative
/// to the reference pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadPowerRow {
    pub power: f64,
    pub eta_forward: f64,
    pub eta_backward: f64,
    pub delta_forward: f64,
    pub delta_backward: f64,
}

/// Memory channel in both retrieval directions for each relative read power.
pub fn retrieval_power_sweep(
    params: &MemoryParams,
    write: &ControlPulse,
    read_reference: &ControlPulse,
    input_mode: &TemporalMode,
    powers: &[f64],
) -> Result<Vec<ReadPowerRow>> {
    if powers.is_empty() {
        return Err(invalid("read-power sweep needs at least one power"));
    }
    if let Some(p) = powers.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
        return Err(invalid(format!("read powers must be > 0, got {p}")));
    }
    let fwd = params.with_retrieval(Retrieval::Forward);
    let bwd = params.with_retrieval(Retrieval::Backward);
    powers
        .iter()
        .map(|&p| {
            let read = read_reference.scaled(p.sqrt());
            let f = retrieved_mode_channel(&fwd, write, &read, input_mode)?;
            let b = retrieved_mode_channel(&bwd, write, &read, input_mode)?;
            Ok(ReadPowerRow {
                power: p,
                eta_forward: f.eta,
                eta_backward: b.eta,
                delta_forward: f.delta,
                delta_backward: b.delta,
            })
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[ReadPowerRow]) -> String {
    let mut s = String::from("read_power,eta_forward,eta_backward,delta_forward,delta_backward\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.power, r.eta_forward, r.eta_backward, r.delta_forward, r.delta_backward
        ));
    }
    s
}
