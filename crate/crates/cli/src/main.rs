use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use polsqueeze_core::estimator::{
    self, angle_sweep, attenuation_sweep, energy_duration_sweep, fit_angle_sweep, fit_attenuation_law,
    shot_noise_reference, simulate, to_db, ShotNoise, SqueezingResult,
};
use polsqueeze_core::model::{soliton_energy_per_mode, soliton_period};
use polsqueeze_core::{load_config, Error, RunOptions, SimulationConfig};

#[derive(Parser)]
#[command(name = "polsqueeze", version, about = "Polarization squeezing in spliced PM fibre")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one ensemble and write result.json and samples.csv.
    Simulate(Common),
    /// Tabulate squeezing along one parameter axis.
    Sweep(SweepArgs),
    /// Soliton and grid figures for a configuration.
    Info(Common),
    /// Run only the γ = 0 reference ensemble.
    ShotNoise(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    trajectories: Option<usize>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Angle,
    Attenuation,
    Energy,
    Duration,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    axis: Axis,
    /// Sweep points: rad for angle, transmission for attenuation, pJ for
    /// energy, fs for duration.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    /// Pulse energies (pJ) for a duration sweep.
    #[arg(long, value_delimiter = ',')]
    energies: Option<Vec<f64>>,
    /// Pulse durations (fs) for an energy sweep.
    #[arg(long, value_delimiter = ',')]
    durations: Option<Vec<f64>>,
}

enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else if matches!(e, Error::Io(_)) {
            Failure::Io(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(c) => cmd_simulate(&c),
        Command::Sweep(s) => cmd_sweep(&s),
        Command::Info(c) => cmd_info(&c),
        Command::ShotNoise(c) => cmd_shot_noise(&c),
    }
}

fn resolve_config(c: &Common) -> Result<SimulationConfig, Failure> {
    let mut cfg = match (&c.config, &c.preset) {
        (Some(path), _) => load_config(path).map_err(|e| match e {
            Error::Io(io) => io_failure(path, io),
            other => Failure::Config(format!("{}: {other}", path.display())),
        })?,
        (None, Some(name)) => SimulationConfig::preset(name)?,
        (None, None) => SimulationConfig::paper(),
    };
    if let Some(seed) = c.seed {
        cfg.master_seed = seed;
    }
    if let Some(k) = c.trajectories {
        cfg.n_trajectories = k;
        cfg.pilot_trajectories = cfg.pilot_trajectories.min(k);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn options(c: &Common) -> RunOptions {
    RunOptions { workers: c.workers }
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_failure(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_failure(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_failure(path, e))?;
    }
    w.flush().map_err(|e| io_failure(path, e))
}

#[derive(Serialize)]
struct Provenance<'a> {
    version: &'static str,
    config_digest: String,
    master_seed: u64,
    wall_time_s: f64,
    config: &'a SimulationConfig,
}

impl<'a> Provenance<'a> {
    fn new(cfg: &'a SimulationConfig, start: Instant) -> Self {
        Provenance {
            version: env!("CARGO_PKG_VERSION"),
            config_digest: cfg.digest(),
            master_seed: cfg.master_seed,
            wall_time_s: start.elapsed().as_secs_f64(),
            config: cfg,
        }
    }
}

#[derive(Serialize)]
struct ResultDocument<'a> {
    #[serde(flatten)]
    provenance: Provenance<'a>,
    result: SqueezingResult,
    shot_noise: ShotNoise,
}

#[derive(Serialize)]
struct SampleRow {
    index: usize,
    s0: f64,
    s1: f64,
    s2: f64,
    s3: f64,
}

fn cmd_simulate(c: &Common) -> Result<(), Failure> {
    let cfg = resolve_config(c)?;
    prepare_out(&c.out)?;
    let start = Instant::now();
    let run = simulate(&cfg, &options(c))?;
    let doc = ResultDocument {
        provenance: Provenance::new(&cfg, start),
        result: run.result,
        shot_noise: run.shot_noise,
    };
    write_json(&c.out.join("result.json"), &doc)?;
    write_csv(
        &c.out.join("samples.csv"),
        run.record.samples.iter().enumerate().map(|(index, s)| SampleRow {
            index,
            s0: s.s0,
            s1: s.s1,
            s2: s.s2,
            s3: s.s3,
        }),
    )?;
    println!(
        "squeezing {:.3} dB, antisqueezing {:.3} dB, stderr {:.3} dB ({} trajectories)",
        run.result.squeezing_db, run.result.antisqueezing_db, run.result.stderr_db, run.result.n_trajectories
    );
    Ok(())
}

#[derive(Serialize)]
struct AngleRow {
    theta_rad: f64,
    var_s1: f64,
    var_s1_stderr: f64,
    var_over_shot_db: f64,
}

#[derive(Serialize)]
struct AttenuationRow {
    transmission: f64,
    normalized_var: f64,
    normalized_var_db: f64,
}

#[derive(Serialize)]
struct EnergyRow {
    fwhm_fs: f64,
    energy_pj: f64,
    squeezing_db: f64,
    antisqueezing_db: f64,
    stderr_db: f64,
    theta_opt_rad: f64,
}

fn cmd_sweep(s: &SweepArgs) -> Result<(), Failure> {
    let cfg = resolve_config(&s.common)?;
    let opts = options(&s.common);
    let out = &s.common.out;
    prepare_out(out)?;
    match s.axis {
        Axis::Angle => {
            let thetas = s.values.clone().unwrap_or_else(|| {
                (0..24).map(|i| std::f64::consts::PI * i as f64 / 24.0).collect()
            });
            let run = simulate(&cfg, &opts)?;
            let points = angle_sweep(&run.record.samples, &thetas)?;
            let fit = fit_angle_sweep(&points)?;
            let sn = run.shot_noise.var_s1;
            write_csv(
                &out.join("sweep_angle.csv"),
                points.iter().map(|p| AngleRow {
                    theta_rad: p.theta,
                    var_s1: p.var_s1,
                    var_s1_stderr: p.var_s1_stderr,
                    var_over_shot_db: to_db(p.var_s1 / sn),
                }),
            )?;
            println!(
                "fit: squeezed {:.3} dB, antisqueezed {:.3} dB, theta0 {:.4} rad, R^2 {:.6}",
                to_db(fit.var_squeezed / sn),
                to_db(fit.var_antisqueezed / sn),
                fit.theta_opt,
                fit.r_squared
            );
        }
        Axis::Attenuation => {
            let ts = s
                .values
                .clone()
                .unwrap_or_else(|| (1..=10).rev().map(|i| i as f64 / 10.0).collect());
            let points = attenuation_sweep(&cfg, &ts, &opts)?;
            let v = fit_attenuation_law(&points)?;
            write_csv(
                &out.join("sweep_attenuation.csv"),
                points.iter().map(|p| AttenuationRow {
                    transmission: p.transmission,
                    normalized_var: p.normalized_var,
                    normalized_var_db: p.normalized_var_db,
                }),
            )?;
            println!("fit T*V + 1 - T: V = {v:.4} ({:.3} dB)", to_db(v));
        }
        Axis::Energy | Axis::Duration => {
            let (energies, durations) = match s.axis {
                Axis::Energy => (
                    s.values.clone().unwrap_or_else(default_energies_pj),
                    s.durations.clone().unwrap_or_else(|| vec![cfg.pulse.fwhm * 1e15]),
                ),
                _ => (
                    s.energies
                        .clone()
                        .unwrap_or_else(|| vec![cfg.pulse.energy_total * 1e12]),
                    s.values.clone().unwrap_or_else(|| vec![200.0, 235.0, 310.0, 370.0]),
                ),
            };
            let energies: Vec<f64> = energies.iter().map(|e| e * 1e-12).collect();
            let durations: Vec<f64> = durations.iter().map(|d| d * 1e-15).collect();
            let cells = energy_duration_sweep(&cfg, &energies, &durations, &opts)?;
            let name = match s.axis {
                Axis::Energy => "sweep_energy.csv",
                _ => "sweep_duration.csv",
            };
            write_csv(
                &out.join(name),
                cells.iter().map(|c| EnergyRow {
                    fwhm_fs: c.fwhm * 1e15,
                    energy_pj: c.energy * 1e12,
                    squeezing_db: c.result.squeezing_db,
                    antisqueezing_db: c.result.antisqueezing_db,
                    stderr_db: c.result.stderr_db,
                    theta_opt_rad: c.result.theta_opt,
                }),
            )?;
            if let Some(best) = estimator::best_cell(&cells) {
                println!(
                    "best: {:.3} dB at {:.0} fs, {:.1} pJ",
                    best.result.squeezing_db,
                    best.fwhm * 1e15,
                    best.energy * 1e12
                );
            }
        }
    }
    Ok(())
}

fn default_energies_pj() -> Vec<f64> {
    vec![60.0, 90.0, 120.0, 150.0, 180.0, 210.0, 240.0]
}

fn cmd_info(c: &Common) -> Result<(), Failure> {
    let cfg = resolve_config(c)?;
    let seg = &cfg.assembly.first;
    let fwhm = cfg.pulse.fwhm;
    let length = cfg.assembly.total_length();
    println!("pulse: {:.1} fs FWHM, {:.2} pJ total", fwhm * 1e15, cfg.pulse.energy_total * 1e12);
    println!(
        "photons per pulse: {:.4e}",
        cfg.pulse.energy_total / cfg.pulse.photon_energy()
    );
    match (soliton_energy_per_mode(seg, fwhm), soliton_period(seg, fwhm)) {
        (Ok(e1), Ok(z0)) => {
            println!("soliton energy per mode: {:.2} pJ", e1 * 1e12);
            println!("soliton energy total: {:.1} pJ", 2.0 * e1 * 1e12);
            println!("soliton period: {z0:.4} m");
            println!("fibre length: {:.3} soliton periods", length / z0);
        }
        _ => {
            println!("soliton energy per mode: n/a (normal dispersion)");
            println!("soliton energy total: n/a");
            println!("soliton period: n/a");
            println!("fibre length: {length:.3} m, soliton periods n/a");
        }
    }
    let peak_per_mode = 0.5 * cfg.pulse.energy_total / (2.0 * cfg.pulse.t0());
    println!(
        "nonlinear phase gamma*P0*L per mode: {:.3} rad",
        seg.gamma * peak_per_mode * length
    );
    let grid = cfg.time_grid()?;
    println!(
        "grid: {} points, window {:.3} ps, dt {:.3} fs",
        grid.n_points(),
        grid.window() * 1e12,
        grid.dt() * 1e15
    );
    println!(
        "walk-off excursion: {:.3} ps; steps: {}",
        cfg.assembly.max_walkoff_delay() * 1e12,
        cfg.stepper.steps_for(cfg.assembly.first.length) + cfg.stepper.steps_for(cfg.assembly.second.length)
    );
    println!("config digest: {}", cfg.digest());
    Ok(())
}

fn cmd_shot_noise(c: &Common) -> Result<(), Failure> {
    let cfg = resolve_config(c)?;
    prepare_out(&c.out)?;
    let start = Instant::now();
    let sn = shot_noise_reference(&cfg, None, &options(c))?;
    #[derive(Serialize)]
    struct Doc<'a> {
        #[serde(flatten)]
        provenance: Provenance<'a>,
        shot_noise: ShotNoise,
    }
    write_json(
        &c.out.join("shot_noise.json"),
        &Doc {
            provenance: Provenance::new(&cfg, start),
            shot_noise: sn,
        },
    )?;
    println!(
        "Var(S1) = {:.6e}, Var(S0) = {:.6e}, <S0> = {:.6e}, Var(S1)/<S0> = {:.4}",
        sn.var_s1,
        sn.var_s0,
        sn.mean_s0,
        sn.var_s1 / sn.mean_s0
    );
    Ok(())
}
