//! Stochastic initial conditions and Raman phase noise for truncated-Wigner
//! trajectories.
//!
//! Randomness is counter based: every array is drawn from its own generator
//! whose seed is a hash of (master seed, trajectory index, stream id), so a
//! trajectory reproduces bit for bit no matter which worker runs it or in
//! which order.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::model::{FiberSegment, Mode, TimeGrid, TwoModeField, BOLTZMANN, HBAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedPlan {
    pub master_seed: u64,
    pub trajectory_index: u64,
}

impl SeedPlan {
    pub fn new(master_seed: u64, trajectory_index: u64) -> Self {
        SeedPlan {
            master_seed,
            trajectory_index,
        }
    }

    pub fn rng(&self, stream: NoiseStream) -> Xoshiro256PlusPlus {
        let (kind, a, b) = stream.words();
        let mut state = splitmix(self.master_seed ^ 0x5851_f42d_4c95_7f2d);
        state = splitmix(state ^ self.trajectory_index);
        state = splitmix(state ^ kind);
        state = splitmix(state ^ a);
        state = splitmix(state ^ b);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_mut(8) {
            state = splitmix(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Xoshiro256PlusPlus::from_seed(seed)
    }
}

/// Independent master seed for an auxiliary ensemble (for example the
/// shot-noise reference) derived from `master` and a tag.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    splitmix(splitmix(master) ^ splitmix(tag))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Where in the optical path a lossy element sits; each gets its own
/// vacuum stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossPoint {
    Splice,
    FibreExit,
    Attenuator,
    Detection,
    Other(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseStream {
    InputVacuum(Mode),
    Loss(LossPoint, Mode),
    /// One cell of the fixed Raman-noise lattice along z; both modes share
    /// the cell stream (real and imaginary parts).
    Raman { segment: u32, cell: u64 },
    /// Vacuum admixed by distributed fibre loss after one split step.
    FibreLoss { segment: u32, step: u64, mode: Mode },
}

impl NoiseStream {
    fn words(self) -> (u64, u64, u64) {
        let mode = |m: Mode| match m {
            Mode::H => 0u64,
            Mode::V => 1u64,
        };
        match self {
            NoiseStream::InputVacuum(m) => (1, mode(m), 0),
            NoiseStream::Loss(point, m) => {
                let p = match point {
                    LossPoint::Splice => 0,
                    LossPoint::FibreExit => 1,
                    LossPoint::Attenuator => 2,
                    LossPoint::Detection => 3,
                    LossPoint::Other(k) => 16 + k as u64,
                };
                (2, p, mode(m))
            }
            NoiseStream::Raman { segment, cell } => (3, segment as u64, cell),
            NoiseStream::FibreLoss {
                segment,
                step,
                mode: m,
            } => (4, ((segment as u64) << 1) | mode(m), step),
        }
    }
}

/// Circular complex Gaussians with ⟨|δ|²⟩ = 1/(2·dt): half a photon per
/// temporal grid mode.
pub fn vacuum_fluctuations(grid: &TimeGrid, plan: &SeedPlan, stream: NoiseStream) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n_points()];
    fill_vacuum(&mut out, grid.dt(), plan, stream);
    out
}

pub(crate) fn fill_vacuum(out: &mut [Complex64], dt: f64, plan: &SeedPlan, stream: NoiseStream) {
    let sigma = 0.5 / dt.sqrt();
    let mut rng = plan.rng(stream);
    for z in out.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *z = Complex64::new(sigma * re, sigma * im);
    }
}

/// Classical field plus independent vacuum noise on each mode.
pub fn seed_trajectory(classical: &TwoModeField, plan: &SeedPlan) -> TwoModeField {
    let mut field = classical.clone();
    add_vacuum(&mut field, plan);
    field
}

pub(crate) fn add_vacuum(field: &mut TwoModeField, plan: &SeedPlan) {
    let dt = field.grid.dt();
    let mut noise = vec![Complex64::new(0.0, 0.0); field.grid.n_points()];
    for mode in [Mode::H, Mode::V] {
        fill_vacuum(&mut noise, dt, plan, NoiseStream::InputVacuum(mode));
        for (a, d) in field.mode_mut(mode).iter_mut().zip(&noise) {
            *a += d;
        }
    }
}

/// Bose occupation at angular frequency `omega`.
pub fn thermal_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega.abs() / (BOLTZMANN * temperature);
    1.0 / x.exp_m1()
}

/// Spectral filter for the Raman phase noise of one fibre segment.
///
/// The noise is a real phase field Γ(t, z), white in z, entering as
/// A → A·e^{iΓh}. Its two-sided density is
/// 2·γ·ħω₀·f_R·|Im h̃_R(Ω)|·(n_th(|Ω|) + ½); the ½ is the symmetric
/// (Wigner) average of the spontaneous term, which for a real field is the
/// same at ±Ω. The carrier bin gets no noise.
#[derive(Debug, Clone)]
pub struct RamanNoise {
    /// √(S(Ω)/(N·dt)) per frequency bin.
    amplitude: Vec<f64>,
}

impl RamanNoise {
    pub fn new(grid: &TimeGrid, seg: &FiberSegment, temperature: f64, photon_energy: f64) -> Self {
        let raman = seg.raman();
        let n = grid.n_points() as f64;
        let scale = 2.0 * seg.gamma * photon_energy * seg.raman_fraction;
        let amplitude = grid
            .angular_frequencies()
            .iter()
            .map(|&w| {
                if w == 0.0 || scale == 0.0 {
                    return 0.0;
                }
                let s = scale
                    * raman.spectrum(w).im.abs()
                    * (thermal_occupation(w, temperature) + 0.5);
                (s / (n * grid.dt())).sqrt()
            })
            .collect();
        RamanNoise { amplitude }
    }

    /// Two-sided spectral density S(Ω) per bin (per unit length).
    pub fn density(&self, grid: &TimeGrid) -> Vec<f64> {
        let nd = grid.n_points() as f64 * grid.dt();
        self.amplitude.iter().map(|a| a * a * nd).collect()
    }

    pub fn is_silent(&self) -> bool {
        self.amplitude.iter().all(|&a| a == 0.0)
    }

    /// Adds the frequency-domain increment of the given lattice cells
    /// (each of length `cell`) into `out`. After an unnormalized backward
    /// transform the real part is the H phase increment and the imaginary
    /// part the V one.
    pub fn accumulate(
        &self,
        plan: &SeedPlan,
        segment: u32,
        cells: std::ops::Range<u64>,
        cell: f64,
        out: &mut [Complex64],
    ) {
        let w = cell.sqrt();
        for c in cells {
            let mut rng = plan.rng(NoiseStream::Raman { segment, cell: c });
            for (z, a) in out.iter_mut().zip(&self.amplitude) {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *z += Complex64::new(re, im) * (a * w);
            }
        }
    }
}

/// Frequency-domain Raman phase-noise increment for one step of length `h`
/// drawn from lattice cell `step_index` (real part H, imaginary part V after
/// the backward transform).
pub fn raman_noise_increment(
    grid: &Arc<TimeGrid>,
    plan: &SeedPlan,
    step_index: u64,
    h: f64,
    seg: &FiberSegment,
    temperature: f64,
    photon_energy: f64,
) -> Vec<Complex64> {
    let noise = RamanNoise::new(grid, seg, temperature, photon_energy);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n_points()];
    noise.accumulate(plan, 0, step_index..step_index + 1, h, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::Fourier;
    use crate::model::{default_fiber_fs_pm_7811, photon_energy, photon_number};

    fn grid() -> Arc<TimeGrid> {
        Arc::new(TimeGrid::new(64, 64e-14).unwrap())
    }

    #[test]
    fn deterministic_streams() {
        let g = grid();
        let p = SeedPlan::new(42, 7);
        let a = vacuum_fluctuations(&g, &p, NoiseStream::InputVacuum(Mode::H));
        let b = vacuum_fluctuations(&g, &p, NoiseStream::InputVacuum(Mode::H));
        assert_eq!(a, b);
        let c = vacuum_fluctuations(&g, &p, NoiseStream::InputVacuum(Mode::V));
        assert_ne!(a, c);
        let d = vacuum_fluctuations(&g, &SeedPlan::new(42, 8), NoiseStream::InputVacuum(Mode::H));
        assert_ne!(a, d);
    }

    #[test]
    fn vacuum_moments() {
        let g = grid();
        let k = 10_000u64;
        let n = g.n_points() as f64;
        let mut photons = Vec::with_capacity(k as usize);
        let (mut sum_re, mut m2, mut m4, mut cross, mut count) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let sd = 0.5 / g.dt().sqrt();
        for i in 0..k {
            let p = SeedPlan::new(1, i);
            let h = vacuum_fluctuations(&g, &p, NoiseStream::InputVacuum(Mode::H));
            let v = vacuum_fluctuations(&g, &p, NoiseStream::InputVacuum(Mode::V));
            let f = TwoModeField {
                grid: g.clone(),
                env_h: h.clone(),
                env_v: v.clone(),
            };
            photons.push(photon_number(&f, Mode::H));
            for (a, b) in h.iter().zip(&v) {
                let x = a.re / sd;
                sum_re += x;
                m2 += x * x;
                m4 += x.powi(4);
                cross += x * b.re / sd;
                count += 1.0;
            }
        }
        // zero mean, 5σ
        assert!((sum_re / count).abs() < 5.0 / count.sqrt());
        // unit variance of normalized quadratures
        assert!((m2 / count - 1.0).abs() < 5.0 * (2.0 / count).sqrt());
        // excess kurtosis 0 within 3σ (σ ≈ √(24/K))
        let kurt = m4 / count / (m2 / count).powi(2) - 3.0;
        assert!(kurt.abs() < 3.0 * (24.0 / count).sqrt(), "kurtosis {kurt}");
        // H/V independence
        assert!((cross / count).abs() < 5.0 / count.sqrt());
        // half a photon per grid mode
        let mean = photons.iter().sum::<f64>() / k as f64;
        let var = photons.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        let se = (var / k as f64).sqrt();
        assert!((mean - n / 2.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn seeding_leaves_classical_untouched() {
        let g = grid();
        let classical = crate::model::make_cw_field(g.clone(), 1.0, 0.0, 1560e-9);
        let before = classical.clone();
        let seeded = seed_trajectory(&classical, &SeedPlan::new(3, 0));
        assert_eq!(classical, before);
        assert_ne!(seeded, classical);
    }

    #[test]
    fn raman_density_shape() {
        let g = TimeGrid::new(512, 512.0 * 10e-15).unwrap();
        let seg = default_fiber_fs_pm_7811();
        let e = photon_energy(1560e-9);
        let hot = RamanNoise::new(&g, &seg, 300.0, e).density(&g);
        let cold = RamanNoise::new(&g, &seg, 0.0, e).density(&g);
        assert_eq!(hot[0], 0.0);
        let raman = seg.raman();
        for (k, &w) in g.angular_frequencies().iter().enumerate().skip(1) {
            let spont = 2.0 * seg.gamma * e * seg.raman_fraction * raman.spectrum(w).im.abs() * 0.5;
            assert!((cold[k] - spont).abs() <= 1e-12 * spont.max(1e-300));
            assert!(hot[k] >= cold[k]);
        }
        // density symmetric in Ω
        let n = g.n_points();
        for k in 1..n / 2 {
            assert!((hot[k] - hot[n - k]).abs() <= 1e-12 * hot[k]);
        }
    }

    #[test]
    fn raman_increment_variance_scales_with_h() {
        let g = Arc::new(TimeGrid::new(256, 256.0 * 10e-15).unwrap());
        let seg = default_fiber_fs_pm_7811();
        let e = photon_energy(1560e-9);
        let mut fourier = Fourier::new(g.n_points());
        let var_for = |h: f64, fourier: &mut Fourier| {
            let mut acc = 0.0;
            let k = 400;
            for i in 0..k {
                let mut x = raman_noise_increment(&g, &SeedPlan::new(9, i), 0, h, &seg, 300.0, e);
                assert_eq!(x[0], Complex64::new(0.0, 0.0));
                fourier.to_time_unnormalized(&mut x);
                acc += x.iter().map(|z| z.re * z.re + z.im * z.im).sum::<f64>();
            }
            acc / (2.0 * k as f64 * g.n_points() as f64)
        };
        let v1 = var_for(1e-3, &mut fourier);
        let v2 = var_for(2e-3, &mut fourier);
        // Same seeds: the ratio is exactly 2.
        assert!((v2 / v1 - 2.0).abs() < 1e-9);
        // Against the analytic pointwise variance h·ΣS·dΩ/2π.
        let s: f64 = RamanNoise::new(&g, &seg, 300.0, e).density(&g).iter().sum();
        let expected = 1e-3 * s * g.d_omega() / (2.0 * std::f64::consts::PI);
        assert!((v1 / expected - 1.0).abs() < 0.05, "{v1} vs {expected}");
    }
}
