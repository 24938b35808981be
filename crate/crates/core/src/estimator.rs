//! Trajectory ensembles, Stokes statistics, shot-noise normalization and
//! squeezing estimates.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{GridRequest, SimulationConfig, StderrMethod};
use crate::detection::{
    apply_jones_in_place, attenuate, circularize, measure_stokes, set_ellipse_angle, DetectionChain,
    Jones, StokesSample,
};
use crate::error::{Error, Result};
use crate::model::{make_sech_pulse, Mode, TimeGrid, TwoModeField};
use crate::propagate::{AssemblyPropagator, Workspace};
use crate::sampler::{derive_seed, seed_trajectory, LossPoint, NoiseStream, SeedPlan};

const REFERENCE_SEED_TAG: u64 = 0x5245_4645_5245_4e43;
const BOOTSTRAP_SEED_TAG: u64 = 0x424f_4f54_5354_5250;

pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Relative standard error of a sample variance from `k` near-Gaussian
/// samples.
pub fn relative_variance_stderr(k: usize) -> f64 {
    (2.0 / (k as f64 - 1.0)).sqrt()
}

/// Wave-plate settings frozen from the pilot trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub circularizer: Jones,
    /// Angle of the minimum-variance direction in the (S₁, S₂) plane after
    /// circularization, rad.
    pub squeezed_axis: f64,
}

impl Calibration {
    /// Full polarization optics between fibre and splitter for ellipse
    /// angle `theta`.
    pub fn optics(&self, theta: f64) -> Jones {
        set_ellipse_angle(theta, self.squeezed_axis).mul(&self.circularizer)
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleRecord {
    pub samples: Vec<StokesSample>,
    pub config_digest: String,
    pub master_seed: u64,
    pub calibration: Calibration,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global rayon pool. Never changes
    /// results.
    pub workers: Option<usize>,
}

fn with_workers<T: Send>(opts: &RunOptions, f: impl FnOnce() -> T + Send) -> Result<T> {
    match opts.workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::invalid("workers", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// First error in index order, so failures are reported identically for
/// any worker count.
fn collect_ordered<T>(items: Vec<Result<T>>) -> Result<Vec<T>> {
    items.into_iter().collect()
}

/// A validated configuration with its grid, launch field and propagator
/// built once.
pub struct Simulation {
    config: SimulationConfig,
    propagator: AssemblyPropagator,
    launch: TwoModeField,
}

impl Simulation {
    pub fn new(config: &SimulationConfig) -> Result<Self> {
        config.validate()?;
        let grid = Arc::new(config.time_grid()?);
        let launch = make_sech_pulse(grid.clone(), &config.pulse)?;
        let propagator =
            AssemblyPropagator::new(grid, &config.assembly, &config.stepper, config.pulse.photon_energy());
        Ok(Simulation {
            config: config.clone(),
            propagator,
            launch,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        self.propagator.grid()
    }

    pub fn launch_field(&self) -> &TwoModeField {
        &self.launch
    }

    pub fn workspace(&self) -> Workspace {
        self.propagator.workspace()
    }

    /// Seeds trajectory `index` and carries it to the fibre end.
    pub fn fibre_output(&self, seed: u64, index: u64, ws: &mut Workspace) -> Result<TwoModeField> {
        let plan = SeedPlan::new(seed, index);
        let mut field = seed_trajectory(&self.launch, &plan);
        self.propagator
            .propagate(&mut field, &plan, ws)
            .map_err(|e| Error::Trajectory {
                index,
                source: Box::new(e),
            })?;
        Ok(field)
    }

    fn fibre_outputs(&self, seed: u64, range: std::ops::Range<usize>) -> Result<Vec<TwoModeField>> {
        let out: Vec<Result<TwoModeField>> = range
            .into_par_iter()
            .map_init(|| self.workspace(), |ws, i| self.fibre_output(seed, i as u64, ws))
            .collect();
        collect_ordered(out)
    }

    /// Circularizes the mean of `pilot` and locates the squeezed axis of
    /// the pilot Stokes samples measured through `chain` without the
    /// half-wave plate.
    pub fn calibrate(
        &self,
        pilot: &[TwoModeField],
        seed: u64,
        chain: &DetectionChain,
    ) -> Result<Calibration> {
        let mean = TwoModeField::mean(pilot)
            .ok_or_else(|| Error::DegenerateEnsemble("empty pilot ensemble".into()))?;
        let circularizer = circularize(&mean)?;
        let samples = pilot
            .iter()
            .enumerate()
            .map(|(i, f)| detect(f, chain, &circularizer, &SeedPlan::new(seed, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let stats = stokes_covariance(&samples)?;
        let squeezed_axis = eigen(&stats.cov)?.theta_squeezed;
        Ok(Calibration {
            circularizer,
            squeezed_axis,
        })
    }

    /// Runs `n` trajectories with master seed `seed` and measures each
    /// one under every chain in `chains`. Loss noise is drawn from the
    /// same streams for every chain, so the chains see paired samples.
    /// Without a calibration, the first `pilot` trajectories provide it.
    pub fn run_chains(
        &self,
        seed: u64,
        n: usize,
        pilot: usize,
        chains: &[DetectionChain],
        calibration: Option<Calibration>,
        opts: &RunOptions,
    ) -> Result<(Calibration, Vec<Vec<StokesSample>>)> {
        if chains.is_empty() {
            return Err(Error::invalid("detection chain", "no chains to measure"));
        }
        with_workers(opts, || {
            let head = if calibration.is_some() { 0 } else { pilot.min(n) };
            let pilot_fields = self.fibre_outputs(seed, 0..head)?;
            let cal = match calibration {
                Some(c) => c,
                None => self.calibrate(&pilot_fields, seed, &chains[0])?,
            };
            let measure = |i: usize, f: &TwoModeField| -> Result<Vec<StokesSample>> {
                let plan = SeedPlan::new(seed, i as u64);
                chains
                    .iter()
                    .map(|c| detect(f, c, &cal.optics(c.hwp_angle), &plan))
                    .collect()
            };
            let mut rows: Vec<Result<Vec<StokesSample>>> = pilot_fields
                .par_iter()
                .enumerate()
                .map(|(i, f)| measure(i, f))
                .collect();
            let rest: Vec<Result<Vec<StokesSample>>> = (head..n)
                .into_par_iter()
                .map_init(
                    || self.workspace(),
                    |ws, i| {
                        let f = self.fibre_output(seed, i as u64, ws)?;
                        measure(i, &f)
                    },
                )
                .collect();
            rows.extend(rest);
            let rows = collect_ordered(rows)?;
            let mut per_chain = vec![Vec::with_capacity(n); chains.len()];
            for row in rows {
                for (dst, s) in per_chain.iter_mut().zip(row) {
                    dst.push(s);
                }
            }
            Ok((cal, per_chain))
        })?
    }
}

/// Exit loss, polarization optics, extra attenuation and detection loss,
/// then Stokes measurement.
pub fn detect(
    field: &TwoModeField,
    chain: &DetectionChain,
    optics: &Jones,
    plan: &SeedPlan,
) -> Result<StokesSample> {
    let mut f = field.clone();
    attenuate(&mut f, chain.exit_transmission, plan, |m| {
        NoiseStream::Loss(LossPoint::FibreExit, m)
    })?;
    apply_jones_in_place(&mut f, optics)?;
    attenuate(&mut f, chain.extra_attenuation, plan, |m| {
        NoiseStream::Loss(LossPoint::Attenuator, m)
    })?;
    attenuate(&mut f, chain.detection_transmission, plan, |m| {
        NoiseStream::Loss(LossPoint::Detection, m)
    })?;
    Ok(measure_stokes(&f))
}

pub fn run_ensemble(config: &SimulationConfig, opts: &RunOptions) -> Result<EnsembleRecord> {
    let sim = Simulation::new(config)?;
    let (calibration, mut samples) = sim.run_chains(
        config.master_seed,
        config.n_trajectories,
        config.pilot_trajectories,
        &[config.chain],
        None,
        opts,
    )?;
    Ok(EnsembleRecord {
        samples: samples.remove(0),
        config_digest: config.digest(),
        master_seed: config.master_seed,
        calibration,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesStatistics {
    pub mean: [f64; 4],
    /// Unbiased sample covariance of (S₁, S₂).
    pub cov: [[f64; 2]; 2],
    pub var_s0: f64,
    pub var_s3: f64,
    pub n: usize,
}

pub fn stokes_covariance(samples: &[StokesSample]) -> Result<StokesStatistics> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::DegenerateEnsemble(format!("{n} samples, need at least 2")));
    }
    let mut mean = [0.0; 4];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s.as_array()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let (mut c11, mut c12, mut c22, mut v0, mut v3) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in samples {
        let d = [s.s0 - mean[0], s.s1 - mean[1], s.s2 - mean[2], s.s3 - mean[3]];
        c11 += d[1] * d[1];
        c12 += d[1] * d[2];
        c22 += d[2] * d[2];
        v0 += d[0] * d[0];
        v3 += d[3] * d[3];
    }
    let k = 1.0 / (n as f64 - 1.0);
    let stats = StokesStatistics {
        mean,
        cov: [[c11 * k, c12 * k], [c12 * k, c22 * k]],
        var_s0: v0 * k,
        var_s3: v3 * k,
        n,
    };
    if !stats.cov.iter().flatten().all(|x| x.is_finite()) {
        return Err(Error::DegenerateEnsemble("non-finite covariance".into()));
    }
    Ok(stats)
}

struct Eigen {
    small: f64,
    large: f64,
    theta_squeezed: f64,
}

fn eigen(cov: &[[f64; 2]; 2]) -> Result<Eigen> {
    let (a, b, c, d) = (cov[0][0], cov[0][1], cov[1][0], cov[1][1]);
    let scale = a.abs().max(d.abs()).max(b.abs()).max(f64::MIN_POSITIVE);
    if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite())
        || (b - c).abs() > 1e-12 * scale
    {
        return Err(Error::NotPositiveSemidefinite);
    }
    let b = 0.5 * (b + c);
    let m = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (small, large) = (m - r, m + r);
    if small < -1e-12 * scale {
        return Err(Error::NotPositiveSemidefinite);
    }
    Ok(Eigen {
        small: small.max(0.0),
        large,
        theta_squeezed: 0.5 * (-2.0 * b).atan2(d - a),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingResult {
    /// Δs², photons²
    pub var_squeezed: f64,
    /// Δa², photons²
    pub var_antisqueezed: f64,
    /// Direction of Δs² in the measured (S₁, S₂) plane, rad in (−π/2, π/2].
    pub theta_opt: f64,
    pub shot_noise: f64,
    pub squeezing_db: f64,
    pub antisqueezing_db: f64,
    pub stderr_db: f64,
    pub n_trajectories: usize,
    pub mean_stokes: [f64; 4],
}

impl SqueezingResult {
    /// Uncertainty product against the commutator bound |⟨S₃⟩|², with
    /// `tolerance` absorbing sampling error.
    pub fn satisfies_uncertainty(&self, tolerance: f64) -> bool {
        let bound = tolerance * self.mean_stokes[3].abs();
        self.var_squeezed * self.var_antisqueezed >= bound * bound
    }
}

/// Eigen-decomposition of the (S₁, S₂) covariance relative to
/// `shot_noise`; `stderr_db` uses the Gaussian variance-of-variance
/// estimate for `n` samples.
pub fn squeezing_from_cov(cov: [[f64; 2]; 2], shot_noise: f64, n: usize) -> Result<SqueezingResult> {
    if !(shot_noise > 0.0) {
        return Err(Error::invalid("shot noise", format!("{shot_noise} must be > 0")));
    }
    if n < 2 {
        return Err(Error::DegenerateEnsemble(format!("{n} samples")));
    }
    let e = eigen(&cov)?;
    Ok(SqueezingResult {
        var_squeezed: e.small,
        var_antisqueezed: e.large,
        theta_opt: e.theta_squeezed,
        shot_noise,
        squeezing_db: to_db(e.small / shot_noise),
        antisqueezing_db: to_db(e.large / shot_noise),
        stderr_db: to_db(1.0 + relative_variance_stderr(n)),
        n_trajectories: n,
        mean_stokes: [0.0; 4],
    })
}

/// Squeezing of a sample set, with the standard error from `method`.
pub fn analyse(
    samples: &[StokesSample],
    shot_noise: f64,
    method: StderrMethod,
    seed: u64,
) -> Result<SqueezingResult> {
    let stats = stokes_covariance(samples)?;
    let mut r = squeezing_from_cov(stats.cov, shot_noise, stats.n)?;
    r.mean_stokes = stats.mean;
    if let StderrMethod::Bootstrap { resamples } = method {
        r.stderr_db = bootstrap_stderr_db(samples, resamples, derive_seed(seed, BOOTSTRAP_SEED_TAG))?;
    }
    Ok(r)
}

/// Standard deviation of the squeezed-variance dB value over bootstrap
/// resamples.
pub fn bootstrap_stderr_db(samples: &[StokesSample], resamples: usize, seed: u64) -> Result<f64> {
    use rand::SeedableRng;
    let n = samples.len();
    let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut values = Vec::with_capacity(resamples);
    let mut pick = Vec::with_capacity(n);
    for _ in 0..resamples {
        pick.clear();
        pick.extend((0..n).map(|_| samples[rng.gen_range(0..n)]));
        let cov = stokes_covariance(&pick)?.cov;
        values.push(to_db(eigen(&cov)?.small.max(f64::MIN_POSITIVE)));
    }
    let m = values.iter().sum::<f64>() / resamples as f64;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (resamples as f64 - 1.0);
    Ok(var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotNoise {
    /// Var(S₁) of the γ = 0 ensemble; used as the normalization.
    pub var_s1: f64,
    pub var_s0: f64,
    pub mean_s0: f64,
    pub n_trajectories: usize,
}

impl ShotNoise {
    fn from_samples(samples: &[StokesSample]) -> Result<Self> {
        let st = stokes_covariance(samples)?;
        let sn = ShotNoise {
            var_s1: st.cov[0][0],
            var_s0: st.var_s0,
            mean_s0: st.mean[0],
            n_trajectories: st.n,
        };
        log::info!(
            "shot noise: Var(S1) = {:.6e}, Var(S0) = {:.6e}, <S0> = {:.6e}",
            sn.var_s1,
            sn.var_s0,
            sn.mean_s0
        );
        if (sn.var_s0 / sn.var_s1 - 1.0).abs() > 0.02 || (sn.var_s1 / sn.mean_s0 - 1.0).abs() > 0.02 {
            log::warn!("shot-noise estimates disagree by more than 2%");
        }
        Ok(sn)
    }

    /// Combined standard error of Var(S₁) and Var(S₀).
    pub fn var_stderr(&self) -> f64 {
        relative_variance_stderr(self.n_trajectories) * (self.var_s1.powi(2) + self.var_s0.powi(2)).sqrt()
    }
}

fn reference_chains(
    config: &SimulationConfig,
    chains: &[DetectionChain],
    calibration: Option<Calibration>,
    opts: &RunOptions,
) -> Result<Vec<Vec<StokesSample>>> {
    let reference = config.linear_reference();
    let sim = Simulation::new(&reference)?;
    let n = config.reference_trajectories;
    let (_, samples) = sim.run_chains(
        derive_seed(config.master_seed, REFERENCE_SEED_TAG),
        n,
        config.pilot_trajectories.min(n),
        chains,
        calibration,
        opts,
    )?;
    Ok(samples)
}

/// γ = 0 ensemble of `reference_trajectories` through the same chain.
/// With `calibration` the same wave-plate settings as the main run are
/// used; otherwise the reference calibrates itself.
pub fn shot_noise_reference(
    config: &SimulationConfig,
    calibration: Option<Calibration>,
    opts: &RunOptions,
) -> Result<ShotNoise> {
    let samples = reference_chains(config, &[config.chain], calibration, opts)?;
    ShotNoise::from_samples(&samples[0])
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub record: EnsembleRecord,
    pub shot_noise: ShotNoise,
    pub result: SqueezingResult,
}

/// Main ensemble, shot-noise reference and squeezing estimate.
pub fn simulate(config: &SimulationConfig, opts: &RunOptions) -> Result<SimulationOutput> {
    let record = run_ensemble(config, opts)?;
    let shot_noise = shot_noise_reference(config, Some(record.calibration), opts)?;
    let result = analyse(
        &record.samples,
        shot_noise.var_s1,
        config.stderr_method,
        config.master_seed,
    )?;
    Ok(SimulationOutput {
        record,
        shot_noise,
        result,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePoint {
    pub theta: f64,
    pub var_s1: f64,
    pub var_s1_stderr: f64,
}

/// Var(cos θ·S₁ + sin θ·S₂) for each θ: the S₁ variance that a plate
/// turned by θ/4 would show.
pub fn angle_sweep(samples: &[StokesSample], thetas: &[f64]) -> Result<Vec<AnglePoint>> {
    let st = stokes_covariance(samples)?;
    let rel = relative_variance_stderr(st.n);
    let mut out = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let (s, c) = theta.sin_cos();
        let (m1, m2) = (st.mean[1], st.mean[2]);
        let mut acc = 0.0;
        for x in samples {
            let d = c * (x.s1 - m1) + s * (x.s2 - m2);
            acc += d * d;
        }
        let var = acc / (st.n as f64 - 1.0);
        out.push(AnglePoint {
            theta,
            var_s1: var,
            var_s1_stderr: var * rel,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleFit {
    pub var_squeezed: f64,
    pub var_antisqueezed: f64,
    pub theta_opt: f64,
    pub r_squared: f64,
}

/// Least-squares fit of Δs²cos²(θ−θ₀) + Δa²sin²(θ−θ₀), done linearly as
/// A + B·cos 2θ + C·sin 2θ.
pub fn fit_angle_sweep(points: &[AnglePoint]) -> Result<AngleFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateEnsemble("need at least 3 angles".into()));
    }
    let rows: Vec<[f64; 3]> = points
        .iter()
        .map(|p| [1.0, (2.0 * p.theta).cos(), (2.0 * p.theta).sin()])
        .collect();
    let y: Vec<f64> = points.iter().map(|p| p.var_s1).collect();
    let coef = least_squares3(&rows, &y)?;
    let [a, b, c] = coef;
    let amp = (b * b + c * c).sqrt();
    let mean_y = y.iter().sum::<f64>() / y.len() as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (r, yi) in rows.iter().zip(&y) {
        let f = a + b * r[1] + c * r[2];
        ss_res += (yi - f) * (yi - f);
        ss_tot += (yi - mean_y) * (yi - mean_y);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let mut theta_opt = 0.5 * c.atan2(b) + FRAC_PI_2;
    if theta_opt > FRAC_PI_2 {
        theta_opt -= PI;
    }
    Ok(AngleFit {
        var_squeezed: a - amp,
        var_antisqueezed: a + amp,
        theta_opt,
        r_squared,
    })
}

fn least_squares3(rows: &[[f64; 3]], y: &[f64]) -> Result<[f64; 3]> {
    let mut m = [[0.0; 4]; 3];
    for (r, yi) in rows.iter().zip(y) {
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += r[i] * r[j];
            }
            m[i][3] += r[i] * yi;
        }
    }
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap_or(col);
        m.swap(col, piv);
        if m[col][col].abs() < 1e-300 {
            return Err(Error::DegenerateEnsemble("singular angle fit".into()));
        }
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..4 {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    Ok([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttenuationPoint {
    pub transmission: f64,
    /// Var(S₁) over the same-transmission shot noise.
    pub normalized_var: f64,
    pub normalized_var_db: f64,
    pub stderr: f64,
}

/// Measures the ensemble behind each extra attenuation in `transmissions`
/// and normalizes to a γ = 0 reference behind the same attenuation.
pub fn attenuation_sweep(
    config: &SimulationConfig,
    transmissions: &[f64],
    opts: &RunOptions,
) -> Result<Vec<AttenuationPoint>> {
    let chains: Vec<DetectionChain> = transmissions
        .iter()
        .map(|&t| {
            let c = DetectionChain {
                extra_attenuation: t,
                ..config.chain
            };
            c.validate().map(|_| c)
        })
        .collect::<Result<_>>()?;
    let sim = Simulation::new(config)?;
    let (cal, main) = sim.run_chains(
        config.master_seed,
        config.n_trajectories,
        config.pilot_trajectories,
        &chains,
        None,
        opts,
    )?;
    let reference = reference_chains(config, &chains, Some(cal), opts)?;
    let rel = (relative_variance_stderr(config.n_trajectories).powi(2)
        + relative_variance_stderr(config.reference_trajectories).powi(2))
    .sqrt();
    transmissions
        .iter()
        .zip(main.iter().zip(&reference))
        .map(|(&t, (m, r))| {
            let v = stokes_covariance(m)?.cov[0][0] / stokes_covariance(r)?.cov[0][0];
            Ok(AttenuationPoint {
                transmission: t,
                normalized_var: v,
                normalized_var_db: to_db(v),
                stderr: v * rel,
            })
        })
        .collect()
}

/// Least-squares V in T·V + (1 − T).
pub fn fit_attenuation_law(points: &[AttenuationPoint]) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for p in points {
        num += p.transmission * (p.normalized_var - 1.0 + p.transmission);
        den += p.transmission * p.transmission;
    }
    if den <= 0.0 {
        return Err(Error::DegenerateEnsemble("no transmissions to fit".into()));
    }
    Ok(num / den)
}

/// Normalized variance, in dB, before a loss of transmission `t`, given
/// the value `observed_db` seen after it.
pub fn infer_lossless(observed_db: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::invalid("transmission", format!("{t} outside (0, 1]")));
    }
    let v = (from_db(observed_db) - (1.0 - t)) / t;
    if !(v > 0.0) {
        return Err(Error::Unphysical(format!(
            "observed {observed_db} dB is at or below the loss floor 1 - T = {}",
            1.0 - t
        )));
    }
    Ok(to_db(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub fwhm: f64,
    pub energy: f64,
    pub result: SqueezingResult,
}

/// Squeezing over every (duration, energy) pair. The grid is re-derived
/// per duration; every cell uses the base seed.
pub fn energy_duration_sweep(
    base: &SimulationConfig,
    energies: &[f64],
    durations: &[f64],
    opts: &RunOptions,
) -> Result<Vec<SweepCell>> {
    let mut out = Vec::with_capacity(energies.len() * durations.len());
    for &fwhm in durations {
        for &energy in energies {
            let mut cfg = base.clone();
            cfg.pulse.fwhm = fwhm;
            cfg.pulse.energy_total = energy;
            cfg.grid = GridRequest::default();
            let run = simulate(&cfg, opts)?;
            log::info!(
                "fwhm {:.0} fs, energy {:.1} pJ: {:.3} dB",
                fwhm * 1e15,
                energy * 1e12,
                run.result.squeezing_db
            );
            out.push(SweepCell {
                fwhm,
                energy,
                result: run.result,
            });
        }
    }
    Ok(out)
}

/// Best (most negative) squeezing in a set of cells.
pub fn best_cell(cells: &[SweepCell]) -> Option<&SweepCell> {
    cells
        .iter()
        .min_by(|a, b| a.result.squeezing_db.total_cmp(&b.result.squeezing_db))
}

/// Projects each field's `mode` onto the normalized ensemble-mean envelope
/// of that mode: z = Σ ū·a·dt with Σ|u|²dt = 1. Vacuum gives
/// Var(Re z) = Var(Im z) = 1/4.
pub fn homodyne_quadratures(fields: &[TwoModeField], mode: Mode) -> Result<Vec<Complex64>> {
    let mean = TwoModeField::mean(fields)
        .ok_or_else(|| Error::DegenerateEnsemble("no fields".into()))?;
    let dt = mean.grid.dt();
    let lo = mean.mode(mode);
    let norm = (lo.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt).sqrt();
    if !(norm > 0.0) {
        return Err(Error::DegenerateMeanField("empty local oscillator".into()));
    }
    Ok(fields
        .iter()
        .map(|f| {
            f.mode(mode)
                .iter()
                .zip(lo)
                .map(|(a, l)| l.conj() * a)
                .sum::<Complex64>()
                * (dt / norm)
        })
        .collect())
}

/// Smallest and largest quadrature variance of `z`, relative to vacuum.
pub fn quadrature_variances(z: &[Complex64]) -> Result<(f64, f64)> {
    let samples: Vec<StokesSample> = z
        .iter()
        .map(|q| StokesSample {
            s0: 0.0,
            s1: q.re,
            s2: q.im,
            s3: 0.0,
        })
        .collect();
    let e = eigen(&stokes_covariance(&samples)?.cov)?;
    Ok((4.0 * e.small, 4.0 * e.large))
}
