use super::*;
use crate::error::Error;
use num_complex::Complex64;
use std::f64::consts::PI;

const FWHM: f64 = 227.2e-9;

fn mode() -> TemporalMode {
    pulse_mode(FWHM, 16).unwrap()
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

fn squeezed() -> GaussianState {
    GaussianState::squeezed_vacuum(1.6, 1.6, 0.0).unwrap()
}

#[test]
fn vacuum_calibration() {
    let u = mode();
    let ds = simulate_dual_pulse_run(&GaussianState::vacuum(), &u, &HomodyneConfig::new(100_000), &PhaseDriftModel::new(1), 2)
        .unwrap();
    let q = ds.quadratures(&u).unwrap();
    let v = sample_variance(&q);
    let se = (2.0 / (q.len() - 1) as f64).sqrt();
    assert!((v - 1.0).abs() < 3.0 * se, "{v}");
}

#[test]
fn locked_squeezed_quadrature() {
    let u = mode();
    let ds = simulate_dual_pulse_run(&squeezed(), &u, &HomodyneConfig::locked(100_000, 0.0), &PhaseDriftModel::none(1), 3)
        .unwrap();
    let v = sample_variance(&ds.quadratures(&u).unwrap());
    assert!((v - 0.6918).abs() < 0.01, "{v}");
}

#[test]
fn electronic_noise_adds_to_quadrature_variance() {
    let u = mode();
    let cfg = HomodyneConfig {
        electronic_noise: 0.2,
        ..HomodyneConfig::locked(50_000, 0.0)
    };
    let ds = simulate_dual_pulse_run(&GaussianState::vacuum(), &u, &cfg, &PhaseDriftModel::none(1), 4).unwrap();
    let v = sample_variance(&ds.quadratures(&u).unwrap());
    assert!((v - 1.2).abs() < 4.0 * 1.2 * (2.0 / 50_000.0f64).sqrt(), "{v}");
}

#[test]
fn pointwise_variance_follows_mode_shape() {
    let u = mode();
    let state = GaussianState::squeezed_vacuum(3.0, 3.0, 0.0).unwrap();
    let n = 100_000;
    let ds = simulate_dual_pulse_run(&state, &u, &HomodyneConfig::locked(n, PI / 2.0), &PhaseDriftModel::none(1), 5)
        .unwrap();
    let v = state.v_max();
    let dt = u.dt();
    for k in 0..u.len() {
        let col: Vec<f64> = (0..n).map(|i| ds.trial(i)[k]).collect();
        let measured = sample_variance(&col) * dt;
        let expected = 1.0 + (v - 1.0) * u.samples()[k].re.powi(2) * dt;
        let se = expected * (2.0 / (n - 1) as f64).sqrt();
        assert!((measured - expected).abs() < 4.0 * se, "bin {k}: {measured} vs {expected}");
    }
}

#[test]
fn matched_filter_projection_identities() {
    let u = mode();
    let y = u.real_samples();
    assert!((matched_filter_quadrature(&y, &u).unwrap() - 1.0).abs() < 1e-12);
    // Odd function of time about the pulse center is orthogonal to the even mode.
    let n = u.len();
    let perp: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5 - n as f64 / 2.0) * y[k]).collect();
    let perp = TemporalMode::from_real(&perp, u.dt()).unwrap();
    assert!(matched_filter_quadrature(&perp.real_samples(), &u).unwrap().abs() < 1e-9);
    assert!(matches!(matched_filter_quadrature(&y[1..], &u), Err(Error::GridMismatch(_))));
}

#[test]
fn mode_extraction_recovers_anti_squeezed_mode() {
    let u = mode();
    let state = GaussianState::squeezed_vacuum(6.0, 6.0, 0.0).unwrap();
    let ds = simulate_dual_pulse_run(&state, &u, &HomodyneConfig::locked(10_000, PI / 2.0), &PhaseDriftModel::none(1), 6)
        .unwrap();
    let est = ds.extract_mode().unwrap();
    let overlap = est.mode.overlap(&u).unwrap().norm();
    assert!(overlap >= 0.99, "{overlap}");
}

#[test]
fn mode_extraction_fails_on_vacuum() {
    let u = mode();
    let ds = simulate_dual_pulse_run(
        &GaussianState::vacuum(),
        &u,
        &HomodyneConfig::locked(10_000, 0.0),
        &PhaseDriftModel::none(1),
        7,
    )
    .unwrap();
    assert!(matches!(ds.extract_mode(), Err(Error::ModeExtraction(_))));
}

#[test]
fn mode_overlap_improves_with_trials() {
    let u = mode();
    let state = GaussianState::squeezed_vacuum(6.0, 6.0, 0.0).unwrap();
    let mean_overlap = |n: usize| -> f64 {
        let seeds = 0..6u64;
        let total: f64 = seeds
            .clone()
            .map(|s| {
                let ds = simulate_dual_pulse_run(&state, &u, &HomodyneConfig::locked(n, PI / 2.0), &PhaseDriftModel::none(1), 100 + s)
                    .unwrap();
                ds.extract_mode().map(|e| e.mode.overlap(&u).unwrap().norm()).unwrap_or(0.0)
            })
            .sum();
        total / seeds.count() as f64
    };
    let o = [mean_overlap(100), mean_overlap(1_000), mean_overlap(10_000)];
    assert!(o[0] < o[1] && o[1] < o[2], "{o:?}");
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn interior_line(phases: &[f64]) -> (f64, f64) {
    let n = phases.len();
    let lo = n / 10;
    let hi = n - n / 10;
    let x: Vec<f64> = (lo..hi).map(|i| i as f64).collect();
    linear_fit(&x, &phases[lo..hi])
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

#[test]
fn phase_recovery_of_clean_cosine() {
    let n = 1024;
    let f: Vec<f64> = (0..n).map(|i| (2.0 * PI * 3.0 * i as f64 / n as f64 + 0.7).cos()).collect();
    let rec = recover_phase(&f).unwrap();
    let (slope, offset) = interior_line(&rec.phases);
    let true_slope = 2.0 * PI * 3.0 / n as f64;
    assert!((slope - true_slope).abs() < 0.01 * true_slope);
    assert!(wrap_angle(offset - 0.7).abs() < 0.01 * 0.7);
    assert_eq!(rec.low_confidence.iter().filter(|&&b| b).count(), 2 * 103);
    assert!(rec.low_confidence[0] && !rec.low_confidence[n / 2]);
}

#[test]
fn phase_recovery_with_noise() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let n = 1024;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f: Vec<f64> = (0..n)
        .map(|i| {
            let e: f64 = StandardNormal.sample(&mut rng);
            (2.0 * PI * 3.0 * i as f64 / n as f64 + 0.7).cos() + 0.05 * e
        })
        .collect();
    let (_, offset) = interior_line(&recover_phase(&f).unwrap().phases);
    assert!(wrap_angle(offset - 0.7).abs().to_degrees() < 3.0);
}

#[test]
fn phase_recovery_rejects_degenerate_fringes() {
    assert!(matches!(recover_phase(&[2.5; 256]), Err(Error::PhaseUndefined(_))));
    let short: Vec<f64> = (0..256).map(|i| (0.3 * PI * i as f64 / 256.0).cos()).collect();
    assert!(matches!(recover_phase(&short), Err(Error::PhaseUndefined(_))));
}

#[test]
fn recovered_phases_track_lo_phase() {
    let u = mode();
    let ds = simulate_dual_pulse_run(&squeezed(), &u, &HomodyneConfig::new(20_000), &PhaseDriftModel::new(3), 8).unwrap();
    let rec = recover_phase(&ds.fringes).unwrap();
    let errs: Vec<f64> = rec
        .phases
        .iter()
        .zip(&ds.lo_phases)
        .zip(&rec.low_confidence)
        .filter(|(_, &low)| !low)
        .map(|((a, b), _)| wrap_angle(a - b))
        .collect();
    let rms = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    assert!(rms < 0.05, "{rms}");
    assert!(ds.meta.delay_phase_error_rms < 0.05);
}

#[test]
fn fast_drift_violates_dual_pulse_assumption() {
    let drift = PhaseDriftModel {
        bandwidth_hz: 20e6,
        rms_rad: 0.5,
        seed: 1,
    };
    let err = simulate_dual_pulse_run(&squeezed(), &mode(), &HomodyneConfig::new(1000), &drift, 1).unwrap_err();
    assert!(err.to_string().contains("pulse delay"), "{err}");
}

#[test]
fn vacuum_bins_are_unity() {
    let u = mode();
    let ds = simulate_dual_pulse_run(&GaussianState::vacuum(), &u, &HomodyneConfig::new(100_000), &PhaseDriftModel::new(2), 9)
        .unwrap();
    let bins = variance_curve(&ds, &u, 24, PhaseSource::Recovered).unwrap();
    for b in &bins {
        assert!(!b.low_count);
        assert!((b.variance - 1.0).abs() < 4.0 * b.standard_error(), "{b:?}");
    }
    let fit = fit_variance_curve(&bins).unwrap();
    let se = (2.0 / 100_000.0f64).sqrt() * 2.0;
    assert!((fit.v_x - 1.0).abs() < 3.0 * se && (fit.v_p - 1.0).abs() < 3.0 * se, "{fit:?}");
}

#[test]
fn squeezed_bins_and_fit() {
    let u = mode();
    let state = GaussianState::squeezed_vacuum(1.6, 1.6, 0.4).unwrap();
    let ds = simulate_dual_pulse_run(&state, &u, &HomodyneConfig::new(100_000), &PhaseDriftModel::new(4), 10).unwrap();
    let bins = variance_curve(&ds, &u, 24, PhaseSource::Recovered).unwrap();
    let min = bins.iter().map(|b| b.variance).fold(f64::INFINITY, f64::min);
    let max = bins.iter().map(|b| b.variance).fold(0.0, f64::max);
    assert!((min - state.v_min()).abs() < 0.05 * state.v_min(), "{min}");
    assert!((max - state.v_max()).abs() < 0.05 * state.v_max(), "{max}");
    let fit = fit_variance_curve(&bins).unwrap();
    assert!((fit.v_x - state.v_min()).abs() < 0.05 * state.v_min(), "{fit:?}");
    assert!((fit.v_p - state.v_max()).abs() < 0.05 * state.v_max(), "{fit:?}");
    assert!(wrap_angle(2.0 * (fit.theta0 - 0.4)).abs() / 2.0 < 2f64.to_radians(), "{fit:?}");

    // Doubling the bin count leaves the fit within statistical error.
    let fine = fit_variance_curve(&variance_curve(&ds, &u, 48, PhaseSource::Recovered).unwrap()).unwrap();
    let se = 2.0 * state.v_max() * (2.0 / 100_000.0f64).sqrt();
    assert!((fine.v_x - fit.v_x).abs() < 3.0 * se && (fine.v_p - fit.v_p).abs() < 3.0 * se);

    // Binning with recovered instead of true phases changes little.
    let truth = fit_variance_curve(&variance_curve(&ds, &u, 24, PhaseSource::Truth).unwrap()).unwrap();
    assert!((truth.v_x - fit.v_x).abs() < se && (truth.v_p - fit.v_p).abs() < se, "{truth:?} {fit:?}");
}

#[test]
fn noiseless_fit_is_exact() {
    let bins: Vec<PhaseBin> = (0..24)
        .map(|j| {
            let theta = (j as f64 + 0.5) * PI / 24.0;
            let (s, c) = (theta - 1.1).sin_cos();
            PhaseBin {
                theta,
                variance: 0.7 * c * c + 1.9 * s * s,
                count: 1000,
                low_count: false,
            }
        })
        .collect();
    let fit = fit_variance_curve(&bins).unwrap();
    assert!((fit.v_x - 0.7).abs() < 1e-10 && (fit.v_p - 1.9).abs() < 1e-10);
    assert!((fit.theta0 - 1.1).abs() < 1e-10);
    assert!(fit.rms_residual < 1e-12);
}

#[test]
fn fit_and_binning_errors() {
    assert!(matches!(bin_variances(&[], &[], 24), Err(Error::Empty(_))));
    assert!(bin_variances(&[1.0], &[0.0], 3).is_err());
    let one_phase: Vec<PhaseBin> = (0..6)
        .map(|_| PhaseBin {
            theta: 0.3,
            variance: 1.0,
            count: 100,
            low_count: false,
        })
        .collect();
    assert!(matches!(fit_variance_curve(&one_phase), Err(Error::RankDeficient(_))));
    let bins = bin_variances(&[1.0, 2.0, 3.0], &[0.1, 0.1, 0.1], 4).unwrap();
    assert!(bins[0].low_count && bins[1].variance.is_nan());
    assert!((bins[0].variance - 1.0).abs() < 1e-12);
    // Phases differing by π land in the same bin.
    let b = bin_variances(&[1.0, -1.0], &[0.2, 0.2 + PI], 4).unwrap();
    assert_eq!(b[0].count, 2);
}

#[test]
fn datasets_are_deterministic_and_round_trip() {
    let u = mode();
    let cfg = HomodyneConfig {
        fringe_noise: 0.02,
        electronic_noise: 0.05,
        ..HomodyneConfig::new(2_000)
    };
    let a = simulate_dual_pulse_run(&squeezed(), &u, &cfg, &PhaseDriftModel::new(5), 12).unwrap();
    let b = simulate_dual_pulse_run(&squeezed(), &u, &cfg, &PhaseDriftModel::new(5), 12).unwrap();
    assert_eq!(a, b);
    let c = simulate_dual_pulse_run(&squeezed(), &u, &cfg, &PhaseDriftModel::new(5), 13).unwrap();
    assert_ne!(a.photocurrent, c.photocurrent);

    let dir = tempfile::tempdir().unwrap();
    save_dataset(&a, dir.path()).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(a, back);
    std::fs::remove_file(dir.path().join("photocurrent.bin")).unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(Error::MissingArtifact(_))));
}

#[test]
fn complex_mode_is_rejected_for_synthesis() {
    let u = mode();
    let c = TemporalMode::new(u.samples().iter().map(|z| z * Complex64::new(0.0, 1.0)).collect(), u.dt()).unwrap();
    assert!(simulate_dual_pulse_run(&squeezed(), &c, &HomodyneConfig::new(10), &PhaseDriftModel::none(0), 0).is_err());
}
