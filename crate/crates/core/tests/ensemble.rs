use std::f64::consts::PI;

use polsqueeze_core::estimator::{
    relative_variance_stderr, run_ensemble, shot_noise_reference, simulate, stokes_covariance,
    Simulation,
};
use polsqueeze_core::model::default_fiber_fs_pm_7811;
use polsqueeze_core::{DetectionChain, Error, FiberAssembly, RunOptions, SimulationConfig};

/// Default settings on a short fibre, cheap enough for routine tests.
fn short(length: f64, k: usize) -> SimulationConfig {
    let mut c = SimulationConfig::paper();
    c.assembly = FiberAssembly::split(default_fiber_fs_pm_7811(), length, 0.0, 0.96);
    c.stepper.step_size = 5e-3;
    c.n_trajectories = k;
    c.pilot_trajectories = k.min(100);
    c.reference_trajectories = 4000;
    c.master_seed = 17;
    c
}

fn opts() -> RunOptions {
    RunOptions::default()
}

#[test]
fn same_config_twice_is_bit_identical() {
    let c = short(0.3, 12);
    let a = run_ensemble(&c, &opts()).unwrap();
    let b = run_ensemble(&c, &RunOptions { workers: Some(3) }).unwrap();
    assert_eq!(a.samples.len(), 12);
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert_eq!(x.as_array().map(f64::to_bits), y.as_array().map(f64::to_bits));
    }
    assert_eq!(a.config_digest, b.config_digest);
    assert_eq!(a.master_seed, 17);
}

#[test]
fn zero_energy_pulse_gives_vacuum_statistics() {
    let mut c = short(0.05, 3000);
    c.pulse.energy_total = 0.0;
    let sim = Simulation::new(&c).unwrap();
    let n = sim.grid().n_points() as f64;
    let rec = run_ensemble(&c, &opts()).unwrap();
    let st = stokes_covariance(&rec.samples).unwrap();
    // Symmetric ordering: each mode carries half a photon per grid mode.
    let tol = 4.0 * relative_variance_stderr(rec.samples.len());
    assert!((st.mean[0] / n - 1.0).abs() < 0.05, "{}", st.mean[0]);
    for m in &st.mean[1..] {
        assert!(m.abs() < 4.0 * (n / 2.0 / 3000.0).sqrt() + 1e-9, "{m}");
    }
    assert!((st.cov[0][0] / (n / 2.0) - 1.0).abs() < tol, "{}", st.cov[0][0]);
    assert!((st.cov[1][1] / (n / 2.0) - 1.0).abs() < tol, "{}", st.cov[1][1]);
}

#[test]
fn coherent_stokes_variance_equals_photon_number() {
    let mut c = short(0.4, 200_000).linear_reference();
    c.pulse.fwhm = 1e-12;
    let rec = run_ensemble(&c, &opts()).unwrap();
    let st = stokes_covariance(&rec.samples).unwrap();
    for v in [st.cov[0][0], st.cov[1][1]] {
        assert!((v / st.mean[0] - 1.0).abs() < 0.01, "{v} vs {}", st.mean[0]);
    }
    assert!(st.cov[0][1].abs() < 0.01 * st.mean[0]);
}

#[test]
fn shot_noise_is_linear_in_energy() {
    let mut c = short(0.4, 10);
    c.reference_trajectories = 20_000;
    let a = shot_noise_reference(&c, None, &opts()).unwrap();
    c.pulse.energy_total *= 2.0;
    let b = shot_noise_reference(&c, None, &opts()).unwrap();
    let rel = relative_variance_stderr(20_000);
    let ratio = b.var_s1 / a.var_s1;
    assert!((ratio - 2.0).abs() < 2.0 * 2.0 * rel * 2f64.sqrt(), "{ratio}");
    let combined = a.var_stderr();
    assert!((a.var_s0 - a.var_s1).abs() < 2.0 * combined);
}

#[test]
fn coherent_run_shows_no_squeezing() {
    let mut c = short(0.4, 4000).linear_reference();
    c.reference_trajectories = 20_000;
    let run = simulate(&c, &opts()).unwrap();
    let r = run.result;
    let rel_sn = relative_variance_stderr(20_000);
    let tol_db = 2.0 * (r.stderr_db + 10.0 * (1.0 + rel_sn).log10());
    assert!(r.squeezing_db > -tol_db - 0.05, "{}", r.squeezing_db);
    assert!(r.antisqueezing_db < tol_db + 0.05, "{}", r.antisqueezing_db);
}

#[test]
fn calibration_circularizes_mean_polarization() {
    let c = short(0.4, 400).linear_reference();
    let rec = run_ensemble(&c, &opts()).unwrap();
    let st = stokes_covariance(&rec.samples).unwrap();
    assert!(st.mean[3].abs() / st.mean[0] > 0.999, "{:?}", st.mean);
}

#[test]
fn calibrated_plate_puts_minimum_at_zero() {
    let c = short(1.5, 120);
    let sim = Simulation::new(&c).unwrap();
    let thetas: Vec<f64> = (0..24).map(|i| PI * i as f64 / 24.0).collect();
    let chains: Vec<DetectionChain> = thetas
        .iter()
        .map(|&t| DetectionChain {
            hwp_angle: t,
            ..c.chain
        })
        .collect();
    let (_, per_chain) = sim.run_chains(c.master_seed, c.n_trajectories, 60, &chains, None, &opts()).unwrap();
    let vars: Vec<f64> = per_chain.iter().map(|s| stokes_covariance(s).unwrap().cov[0][0]).collect();
    let argmin = vars
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert!(argmin <= 1 || argmin == 23, "{argmin} {vars:?}");
    let argmax = vars.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!((11..=13).contains(&argmax), "{argmax}");
    assert!(vars[argmax] > 3.0 * vars[argmin]);
}

#[test]
fn loss_scales_mean_stokes_vector() {
    let c = short(0.4, 2000).linear_reference();
    let sim = Simulation::new(&c).unwrap();
    let chains = [
        c.chain,
        DetectionChain {
            extra_attenuation: 0.5,
            ..c.chain
        },
    ];
    let (_, per_chain) = sim.run_chains(1, 2000, 100, &chains, None, &opts()).unwrap();
    let full = stokes_covariance(&per_chain[0]).unwrap();
    let half = stokes_covariance(&per_chain[1]).unwrap();
    for i in [0, 3] {
        let ratio = half.mean[i] / full.mean[i];
        assert!((ratio - 0.5).abs() < 1e-3, "{i}: {ratio}");
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = short(0.4, 10);
    c.grid.n_points = Some(1000);
    assert!(matches!(run_ensemble(&c, &opts()), Err(Error::Invalid { .. })));
    let mut c = short(0.4, 1);
    c.pilot_trajectories = 1;
    assert!(run_ensemble(&c, &opts()).is_err());
}
