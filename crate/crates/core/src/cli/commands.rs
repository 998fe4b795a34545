use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::output::{RunDir, RunReport, Table};
use super::scenario::{BandwidthSweepSection, MemorySection, Scenario, TomographySection};
use super::Command;
use crate::error::{Error, Result};
use crate::gaussian::{apply_noisy_channel, gaussian_fidelity, ChannelParams, GaussianState};
use crate::homodyne::save_dataset;
use crate::optim::{gaussian_write_pulse, history_csv, optimize_write_pulse, write_fitness, WritePulseGenes};
use crate::pipeline::{
    derive_seed, estimate_channel, fitted_antisqueezing_db, fitted_squeezing_db, measure_state, monte_carlo_seed,
    reconstruct, streams, AcquisitionSetup, Measurement,
};
use crate::raman::{
    check_grid_convergence, memory_efficiency, retrieval_power_sweep, retrieved_mode_channel, solve_read, solve_write,
    write_sweep_csv,
};
use crate::tomography::{gaussian_to_fock, uhlmann_fidelity, wigner_evaluate, write_wigner_csv, MleResult};

/// Fock cutoff for analytic fidelities when no tomography section is given.
const DEFAULT_FOCK_CUTOFF: usize = 30;

/// Points of the fitted variance curve written for plotting.
const FIT_POINTS: usize = 181;

/// Fails with a schema error when a section the command reads is absent.
pub fn check_sections(cmd: Command, sc: &Scenario) -> Result<()> {
    let name = cmd.name();
    let memory = || Scenario::require(&sc.memory, "memory", name).map(|_| ());
    match cmd {
        Command::SimulateMemory => memory(),
        Command::OptimizeWrite => {
            let m = Scenario::require(&sc.memory, "memory", name)?;
            Scenario::require(&m.optimizer, "memory.optimizer", name).map(|_| ())
        }
        Command::SweepReadPower => {
            let m = Scenario::require(&sc.memory, "memory", name)?;
            if m.read_powers.is_empty() {
                return Err(Error::Scenario(format!("command {name} needs memory.read_powers")));
            }
            Ok(())
        }
        Command::SimulateHomodyne => {
            Scenario::require(&sc.state, "state", name)?;
            Scenario::require(&sc.homodyne, "homodyne", name).map(|_| ())
        }
        Command::Tomography => {
            Scenario::require(&sc.state, "state", name)?;
            Scenario::require(&sc.homodyne, "homodyne", name)?;
            Scenario::require(&sc.tomography, "tomography", name).map(|_| ())
        }
        Command::EstimateChannel => {
            Scenario::require(&sc.state, "state", name)?;
            Scenario::require(&sc.channel, "channel", name)?;
            Scenario::require(&sc.homodyne, "homodyne", name).map(|_| ())
        }
        Command::FullPipeline => {
            Scenario::require(&sc.state, "state", name)?;
            Scenario::require(&sc.homodyne, "homodyne", name)?;
            if sc.channel.is_none() && sc.memory.is_none() {
                return Err(Error::Scenario(format!(
                    "command {name} needs a 'channel' or a 'memory' section"
                )));
            }
            Ok(())
        }
        Command::SweepBandwidth => Scenario::require(&sc.bandwidth_sweep, "bandwidth_sweep", name).map(|_| ()),
        Command::Plot => Ok(()),
    }
}

pub fn execute(cmd: Command, sc: &Scenario, run: &RunDir, report: &mut RunReport) -> Result<()> {
    check_sections(cmd, sc)?;
    match cmd {
        Command::SimulateMemory => simulate_memory(sc, run, report),
        Command::OptimizeWrite => optimize_write(sc, run, report),
        Command::SimulateHomodyne => simulate_homodyne(sc, run, report),
        Command::Tomography => tomography(sc, run, report),
        Command::EstimateChannel => channel_command(sc, run, report, false),
        Command::FullPipeline => channel_command(sc, run, report, true),
        Command::SweepBandwidth => sweep_bandwidth(sc, run, report),
        Command::SweepReadPower => sweep_read_power(sc, run, report),
        Command::Plot => Err(Error::InvalidParameter("plot does not run a scenario".into())),
    }
}

fn time_grid(n: usize, duration: f64) -> Vec<f64> {
    let dt = duration / n as f64;
    (0..n).map(|k| (k as f64 + 0.5) * dt).collect()
}

fn simulate_memory(sc: &Scenario, run: &RunDir, report: &mut RunReport) -> Result<()> {
    let m = sc.memory.as_ref().expect("checked");
    let p = &m.params;
    let write = m.write.pulse(p.n_t)?;
    let read = m.read.pulse(p.n_t)?;
    let mode = m.input_mode.mode(p.n_t)?;

    let eff = memory_efficiency(p, &write, &read, &mode)?;
    let ch = retrieved_mode_channel(p, &write, &read, &mode)?;
    run.write_json(
        "channel.json",
        &json!({
            "retrieval": p.retrieval,
            "eta": ch.eta,
            "delta": ch.delta,
            "transmission": {"re": ch.transmission.re, "im": ch.transmission.im},
            "commutator": ch.commutator,
            "efficiency": eff,
        }),
    )?;
    run.write("transfer_matrix.csv", ch.transfer.to_csv().as_bytes())?;
    report.metric("eta", ch.eta, "1", "channel.json");
    report.metric("delta", ch.delta, "SNU", "channel.json");
    report.metric("write_efficiency", eff.write, "1", "channel.json");
    report.metric("memory_efficiency", eff.total, "1", "channel.json");
    if eff.gain {
        report.notes.push("four-wave-mixing gain: an efficiency exceeds one".into());
    }

    let w = solve_write(p, &write, &mode)?;
    let r = solve_read(p, &read, &w.spin_wave)?;
    let leaked = w.transmitted_signal();
    let mut env = Table::new(&[
        "t", "write_re", "write_im", "read_re", "read_im", "input_re", "input_im", "transmitted_re",
        "transmitted_im", "retrieved_re", "retrieved_im",
    ]);
    for (k, t) in time_grid(p.n_t, write.duration()).into_iter().enumerate() {
        let (wp, rp, u) = (write.samples()[k], read.samples()[k], mode.samples()[k]);
        env.push(vec![
            t, wp.re, wp.im, rp.re, rp.im, u.re, u.im, leaked[k].re, leaked[k].im, r.retrieved[k].re,
            r.retrieved[k].im,
        ]);
    }
    run.write_table("envelopes.csv", &env)?;
    let mut spin = Table::new(&["z", "stored_re", "stored_im", "residual_re", "residual_im"]);
    for k in 0..p.n_z {
        let (s, res) = (w.spin_wave[k], r.residual_spin[k]);
        spin.push(vec![(k as f64 + 0.5) * p.dz(), s.re, s.im, res.re, res.im]);
    }
    run.write_table("spin_wave.csv", &spin)?;

    if let Some(tol) = m.convergence_tolerance {
        let c = check_grid_convergence(p, &write, &read, &mode, tol)?;
        run.write_json("grid_convergence.json", &c)?;
        report.metric("grid_relative_change", c.relative_change, "1", "grid_convergence.json");
    }
    Ok(())
}

fn optimize_write(sc: &Scenario, run: &RunDir, report: &mut RunReport) -> Result<()> {
    let m: &MemorySection = sc.memory.as_ref().expect("checked");
    let o = m.optimizer.as_ref().expect("checked");
    let p = &m.params;
    let mode = m.input_mode.mode(p.n_t)?;
    let seed = derive_seed(sc.seed, streams::OPTIMIZER);
    report.seeds.insert("optimizer".into(), seed);
    let cfg = o.config(seed);
    let (genes, res) = optimize_write_pulse(p, &mode, m.write.peak, &cfg)?;
    let baseline = WritePulseGenes {
        tau0: m.input_mode.center,
        fwhm: m.input_mode.fwhm,
    };
    let baseline_eff = write_fitness(p, baseline, &mode, m.write.peak)?;
    run.write("de_history.csv", history_csv(&res).as_bytes())?;
    run.write_json(
        "optimized_write.json",
        &json!({
            "tau0": genes.tau0,
            "fwhm": genes.fwhm,
            "peak": m.write.peak,
            "write_efficiency": res.best_fitness,
            "generations": res.history.len().saturating_sub(1),
            "converged": res.converged,
            "baseline": {
                "tau0": baseline.tau0,
                "fwhm": baseline.fwhm,
                "write_efficiency": baseline_eff,
            },
        }),
    )?;
    let duration = mode.dt() * mode.len() as f64;
    let opt_pulse = gaussian_write_pulse(genes, p.n_t, duration, m.write.peak)?;
    let base_pulse = gaussian_write_pulse(baseline, p.n_t, duration, m.write.peak)?;
    let mut t = Table::new(&["t", "optimized", "baseline", "input_mode"]);
    for (k, x) in time_grid(p.n_t, duration).into_iter().enumerate() {
        t.push(vec![x, opt_pulse.samples()[k].re, base_pulse.samples()[k].re, mode.samples()[k].re]);
    }
    run.write_table("write_pulse.csv", &t)?;
    report.metric("optimized_write_efficiency", res.best_fitness, "1", "optimized_write.json");
    report.metric("baseline_write_efficiency", baseline_eff, "1", "optimized_write.json");
    if res.best_fitness < baseline_eff {
        report
            .notes
            .push("optimized write pulse stores less than the input-matched pulse".into());
    }
    Ok(())
}

#[derive(Serialize)]
struct FitSummary {
    v_x: f64,
    v_p: f64,
    theta0: f64,
    rms_residual: f64,
    bins_used: usize,
    squeeze_db: f64,
    antisqueeze_db: f64,
    mode_overlap: f64,
    trials: usize,
    model_v_min: f64,
    model_v_max: f64,
}

/// Variance bins, fitted curve and fit summary of one measurement.
fn measurement_artifacts(
    run: &RunDir,
    report: &mut RunReport,
    m: &Measurement,
    model: &GaussianState,
    suffix: &str,
) -> Result<()> {
    let mut bins = Table::new(&["theta", "variance", "count", "standard_error", "low_count"]);
    for b in &m.bins {
        bins.push(vec![
            b.theta,
            b.variance,
            b.count as f64,
            b.standard_error(),
            if b.low_count { 1.0 } else { 0.0 },
        ]);
    }
    run.write_table(&format!("variance_bins{suffix}.csv"), &bins)?;
    let mut fit = Table::new(&["theta", "variance_fit", "variance_model"]);
    for k in 0..FIT_POINTS {
        let th = std::f64::consts::TAU * k as f64 / (FIT_POINTS - 1) as f64;
        fit.push(vec![th, m.fit.eval(th), model.quadrature_variance(th)]);
    }
    run.write_table(&format!("variance_fit{suffix}.csv"), &fit)?;
    let file = format!("fit{suffix}.json");
    let s = FitSummary {
        v_x: m.fit.v_x,
        v_p: m.fit.v_p,
        theta0: m.fit.theta0,
        rms_residual: m.fit.rms_residual,
        bins_used: m.fit.bins_used,
        squeeze_db: fitted_squeezing_db(&m.fit),
        antisqueeze_db: fitted_antisqueezing_db(&m.fit),
        mode_overlap: m.mode_overlap,
        trials: m.quadratures.len(),
        model_v_min: model.v_min(),
        model_v_max: model.v_max(),
    };
    run.write_json(&file, &s)?;
    report.metric(&format!("fitted_squeeze_db{suffix}"), s.squeeze_db, "dB", &file);
    report.metric(&format!("fitted_antisqueeze_db{suffix}"), s.antisqueeze_db, "dB", &file);
    Ok(())
}

fn record_seeds(report: &mut RunReport, seed: u64, output: bool) -> (u64, u64) {
    let (d, p) = (derive_seed(seed, streams::INPUT_DATA), derive_seed(seed, streams::INPUT_DRIFT));
    report.seeds.insert("input_data".into(), d);
    report.seeds.insert("input_drift".into(), p);
    if output {
        report
            .seeds
            .insert("output_data".into(), derive_seed(seed, streams::OUTPUT_DATA));
        report
            .seeds
            .insert("output_drift".into(), derive_seed(seed, streams::OUTPUT_DRIFT));
    }
    (d, p)
}

fn simulate_homodyne(sc: &Scenario, run: &RunDir, report: &mut RunReport) -> Result<()> {
    let state = sc.state.as_ref().expect("checked").state()?;
    let setup = sc.homodyne.as_ref().expect("checked");
    let (d, p) = record_seeds(report, sc.seed, false);
    let m = measure_state(&state, setup, d, p)?;
    save_dataset(&m.dataset, &run.path("dataset"))?;
    measurement_artifacts(run, report, &m, &state, "")
}

/// MLE, log-likelihood trace, Wigner grid and fidelity to the model state.
fn tomography_artifacts(
    run: &RunDir,
    report: &mut RunReport,
    m: &Measurement,
    model: &GaussianState,
    t: &TomographySection,
    suffix: &str,
) -> Result<MleResult> {
    let res = reconstruct(m, &t.mle)?;
    let truth = gaussian_to_fock(model, None, t.mle.cutoff)?;
    let fidelity = uhlmann_fidelity(&res.rho, &truth)?;
    let rho_file = format!("rho{suffix}.json");
    let mut text = res.rho.to_json(json!({
        "iterations": res.iterations,
        "converged": res.converged,
        "samples_used": res.samples_used,
        "samples_dropped": res.samples_dropped,
        "log_likelihood": res.log_likelihood.last(),
        "purity": res.rho.purity(),
        "photon_number": res.rho.photon_number(),
        "fidelity_to_model": fidelity,
        "warnings": res.warnings,
    }))?;
    text.push('\n');
    run.write(&rho_file, text.as_bytes())?;
    let mut ll = Table::new(&["iteration", "log_likelihood"]);
    for (i, l) in res.log_likelihood.iter().enumerate() {
        ll.push(vec![i as f64, *l]);
    }
    run.write_table(&format!("loglik{suffix}.csv"), &ll)?;
    let g = t.grid();
    let w = wigner_evaluate(&res.rho, &g, &g)?;
    write_wigner_csv(&w, &run.path(&format!("wigner{suffix}.csv")))?;
    report.metric(&format!("mle_fidelity_to_model{suffix}"), fidelity, "1", &rho_file);
    report.metric(&format!("mle_purity{suffix}"), res.rho.purity(), "1", &rho_file);
    for warn in &res.warnings {
        report.notes.push(format!("MLE{suffix}: {warn}"));
    }
    if !res.converged {
        report.notes.push(format!(
            "MLE{suffix}: stopped after {} iterations without meeting the tolerance",
            res.iterations
        ));
    }
    Ok(res)
}

fn tomography(sc: &Scenario, run: &RunDir, report: &mut RunReport) -> Result<()> {
    let state = sc.state.as_ref().expect("checked").state()?;
    let setup = sc.homodyne.as_ref().expect("checked");
    let t = sc.tomography.as_ref().expect("checked");
    let (d, p) = record_seeds(report, sc.seed, false);
    let m = measure_state(&state, setup, d, p)?;
    measurement_artifacts(run, report, &m, &state, "")?;
    tomography_artifacts(run, report, &m, &state, t, "")?;
    Ok(())
}

fn channel_source(sc: &Scenario, report: &mut RunReport) -> Result<(ChannelParams, serde_json::Value)> {
    if let Some(c) = &sc.channel {
        if sc.memory.is_some() {
            report
                .notes
                .push("channel section given; memory section not used for the channel".into());
        }
        return Ok((c.params()?, json!({"source": "channel"})));
    }
    let m = sc.memory.as_ref().expect("checked");
    let p = &m.params;
    let ch = retrieved_mode_channel(p, &m.write.pulse(p.n_t)?, &m.read.pulse(p.n_t)?, &m.input_mode.mode(p.n_t)?)?;
    Ok((ch.channel()?, json!({"source": "memory", "commutator": ch.commutator})))
}

fn prediction_row(input: &GaussianState, eta: f64, delta: f64) -> Result<[f64; 5]> {
    let out = apply_noisy_channel(input, &ChannelParams::new(eta, delta)?);
    Ok([eta, delta, out.squeezing_db(), out.antisqueezing_db(), gaussian_fidelity(input, &out)])
}

/// `estimate-channel`, and with `full` the whole chain including Fock-space
/// fidelities and reconstruction of both states.
fn channel_command(sc: &Scenario, run: &RunDir, report: &mut RunReport, full: bool) -> Result<()> {
    let input = sc.state.as_ref().expect("checked").state()?;
    let setup: &AcquisitionSetup = sc.homodyne.as_ref().expect("checked");
    let (ch, source) = if full {
        channel_source(sc, report)?
    } else {
        (sc.channel.as_ref().expect("checked").params()?, json!({"source": "channel"}))
    };
    record_seeds(report, sc.seed, true);
    let output = apply_noisy_channel(&input, &ch);
    let est = estimate_channel(&input, &ch, setup, sc.seed)?;
    measurement_artifacts(run, report, &est.input, &input, "_input")?;
    measurement_artifacts(run, report, &est.output, &output, "_output")?;

    let bandwidth = 1.0 / setup.pulse_fwhm_s;
    run.write_json(
        "channel_estimate.json",
        &json!({
            "channel": source,
            "eta": ch.eta(),
            "delta_injected": ch.delta(),
            "delta_estimate": est.delta,
            "phase_bins": setup.phase_bins,
            "trials": setup.acquisition.n_trials,
            "pulse_fwhm_s": setup.pulse_fwhm_s,
            "bandwidth_hz": bandwidth,
        }),
    )?;
    report.metric("eta", ch.eta(), "1", "channel_estimate.json");
    report.metric("delta_injected", ch.delta(), "SNU", "channel_estimate.json");
    report.metric("delta_estimate", est.delta, "SNU", "channel_estimate.json");
    report.metric("bandwidth_mhz", bandwidth * 1e-6, "MHz", "channel_estimate.json");

    let mut pred = Table::new(&["eta", "delta", "output_squeeze_db", "output_antisqueeze_db", "gaussian_fidelity"]);
    pred.push(prediction_row(&input, ch.eta(), ch.delta())?.to_vec());
    let compare = sc.channel.as_ref().map(|c| c.compare_eta.clone()).unwrap_or_default();
    for &eta in &compare {
        pred.push(prediction_row(&input, eta, ch.delta())?.to_vec());
    }
    run.write_table("channel_prediction.csv", &pred)?;
    report.metric("input_squeeze_db", input.squeezing_db(), "dB", "scenario.json");
    report.metric("output_squeeze_db", output.squeezing_db(), "dB", "channel_prediction.csv");
    report.metric("gaussian_fidelity", pred.rows[0][4], "1", "channel_prediction.csv");
    for row in &pred.rows[1..] {
        report.metric(
            &format!("output_squeeze_db_eta_{}", row[0]),
            row[2],
            "dB",
            "channel_prediction.csv",
        );
        report.notes.push(format!(
            "predicted output squeezing {:.3} dB at eta {} versus {:.3} dB at eta {}",
            row[2],
            row[0],
            output.squeezing_db(),
            ch.eta()
        ));
    }
    if !full {
        return Ok(());
    }

    let cutoff = sc.tomography.as_ref().map_or(DEFAULT_FOCK_CUTOFF, |t| t.mle.cutoff);
    let rho_in = gaussian_to_fock(&input, None, cutoff)?;
    let rho_out = gaussian_to_fock(&input, Some(&ch), cutoff)?;
    let fock = uhlmann_fidelity(&rho_in, &rho_out)?;
    let mut fid = json!({
        "cutoff": cutoff,
        "gaussian": gaussian_fidelity(&input, &output),
        "fock": fock,
    });
    if let Some(t) = &sc.tomography {
        let a = tomography_artifacts(run, report, &est.input, &input, t, "_input")?;
        let b = tomography_artifacts(run, report, &est.output, &output, t, "_output")?;
        let recon = uhlmann_fidelity(&a.rho, &b.rho)?;
        fid["reconstructed"] = json!(recon);
        report.metric("reconstructed_fidelity", recon, "1", "fidelity.json");
    }
    run.write_json("fidelity.json", &fid)?;
    report.metric("fock_fidelity", fock, "1", "fidelity.json");
    Ok(())
}

fn sweep_bandwidth(sc: &Scenario, run: &RunDir, report: &mut RunReport) -> Result<()> {
    let b: &BandwidthSweepSection = sc.bandwidth_sweep.as_ref().expect("checked");
    let mut rows = Table::new(&[
        "bandwidth_mhz",
        "fwhm_ns",
        "eta",
        "delta",
        "input_squeeze_db",
        "output_squeeze_db",
        "min_fidelity",
        "max_fidelity",
    ]);
    let mut scan = Table::new(&[
        "bandwidth_mhz",
        "scan_antisqueeze_db",
        "input_antisqueeze_db",
        "output_squeeze_db",
        "output_antisqueeze_db",
        "fidelity",
    ]);
    let mut overall_min = f64::INFINITY;
    for r in &b.rows {
        let ch = ChannelParams::new(r.eta, r.delta)?;
        let pure = GaussianState::squeezed_vacuum(r.input_squeeze_db, r.input_squeeze_db, 0.0)?;
        let out = apply_noisy_channel(&pure, &ch);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &a in &b.antisqueeze_db {
            let input = GaussianState::squeezed_vacuum(r.input_squeeze_db, a.max(r.input_squeeze_db), 0.0)?;
            let o = apply_noisy_channel(&input, &ch);
            let f = gaussian_fidelity(&input, &o);
            lo = lo.min(f);
            hi = hi.max(f);
            scan.push(vec![r.bandwidth_mhz, a, input.antisqueezing_db(), o.squeezing_db(), o.antisqueezing_db(), f]);
        }
        overall_min = overall_min.min(lo);
        rows.push(vec![
            r.bandwidth_mhz,
            1e3 / r.bandwidth_mhz,
            r.eta,
            r.delta,
            r.input_squeeze_db,
            out.squeezing_db(),
            lo,
            hi,
        ]);
        report.metric(
            &format!("output_squeeze_db_{}MHz", r.bandwidth_mhz),
            out.squeezing_db(),
            "dB",
            "bandwidth_sweep.csv",
        );
    }
    run.write_table("bandwidth_sweep.csv", &rows)?;
    run.write_table("fidelity_scan.csv", &scan)?;
    report.metric("min_fidelity", overall_min, "1", "bandwidth_sweep.csv");

    if b.monte_carlo_seeds > 0 {
        let setup = sc.homodyne.as_ref().expect("validated");
        report
            .seeds
            .insert("monte_carlo".into(), derive_seed(sc.seed, streams::MONTE_CARLO));
        let jobs: Vec<(usize, usize)> = (0..b.rows.len())
            .flat_map(|i| (0..b.monte_carlo_seeds).map(move |k| (i, k)))
            .collect();
        let estimates: Vec<f64> = jobs
            .par_iter()
            .map(|&(i, k)| {
                let r = &b.rows[i];
                let mut s = setup.clone();
                s.pulse_fwhm_s = 1e-6 / r.bandwidth_mhz;
                let input = GaussianState::squeezed_vacuum(r.input_squeeze_db, r.input_squeeze_db, 0.0)?;
                let ch = ChannelParams::new(r.eta, r.delta)?;
                Ok(estimate_channel(&input, &ch, &s, monte_carlo_seed(sc.seed, i, k))?.delta)
            })
            .collect::<Result<_>>()?;
        let mut per = Table::new(&["bandwidth_mhz", "seed_index", "delta_injected", "delta_estimate"]);
        let mut summary = Table::new(&[
            "bandwidth_mhz",
            "delta_injected",
            "delta_mean",
            "delta_sd",
            "fraction_within_0.01",
        ]);
        for (i, r) in b.rows.iter().enumerate() {
            let est = &estimates[i * b.monte_carlo_seeds..(i + 1) * b.monte_carlo_seeds];
            for (k, e) in est.iter().enumerate() {
                per.push(vec![r.bandwidth_mhz, k as f64, r.delta, *e]);
            }
            let n = est.len() as f64;
            let mean = est.iter().sum::<f64>() / n;
            let sd = if est.len() > 1 {
                (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let within = est.iter().filter(|e| (*e - r.delta).abs() <= 0.01).count() as f64 / n;
            summary.push(vec![r.bandwidth_mhz, r.delta, mean, sd, within]);
        }
        run.write_table("delta_monte_carlo.csv", &per)?;
        run.write_table("delta_monte_carlo_summary.csv", &summary)?;
        let worst = summary.rows.iter().map(|r| r[4]).fold(f64::INFINITY, f64::min);
        report.metric("min_fraction_within_0.01", worst, "1", "delta_monte_carlo_summary.csv");
    }
    Ok(())
}

fn sweep_read_power(sc: &Scenario, run: &RunDir, report: &mut RunReport) -> Result<()> {
    let m = sc.memory.as_ref().expect("checked");
    let p = &m.params;
    let rows = retrieval_power_sweep(
        p,
        &m.write.pulse(p.n_t)?,
        &m.read.pulse(p.n_t)?,
        &m.input_mode.mode(p.n_t)?,
        &m.read_powers,
    )?;
    run.write("read_power_sweep.csv", write_sweep_csv(&rows).as_bytes())?;
    let first = |f: fn(&crate::raman::ReadPowerRow) -> f64| rows.iter().find(|r| f(r) >= 0.7).map(|r| r.power);
    if let Some(pw) = first(|r| r.eta_forward) {
        report.metric("forward_power_eta_0.7", pw, "1", "read_power_sweep.csv");
    }
    if let Some(pw) = first(|r| r.eta_backward) {
        report.metric("backward_power_eta_0.7", pw, "1", "read_power_sweep.csv");
    }
    let last = rows.last().expect("non-empty sweep");
    report.metric("forward_delta_max_power", last.delta_forward, "SNU", "read_power_sweep.csv");
    report.metric("backward_delta_max_power", last.delta_backward, "SNU", "read_power_sweep.csv");
    if rows.windows(2).any(|w| w[1].delta_forward < w[0].delta_forward) {
        report
            .notes
            .push("forward excess noise is not monotone in read power on this sweep".into());
    }
    Ok(())
}
