//! Physical parameter types, the shared time/frequency grid, the two-mode
//! field state and closed-form soliton arithmetic.
//!
//! Everything is in SI units. Field envelopes are stored in photon-flux
//! units, √(photons/s), so that `Σ|A|²·dt` is a photon number and the
//! Stokes observables come out photon-number valued. Multiply `|A|²` by
//! [`PulseSpec::photon_energy`] to get watts.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = PLANCK / (2.0 * PI);
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// FWHM of a sech² intensity profile in units of T₀: 2·ln(1+√2).
pub const SECH_FWHM_OVER_T0: f64 = 1.762_747_174_039_086;

/// Photon energy hc/λ.
pub fn photon_energy(wavelength: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / wavelength
}

/// Converts a sech FWHM to the width parameter T₀.
pub fn sech_t0(fwhm: f64) -> f64 {
    fwhm / SECH_FWHM_OVER_T0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    H,
    V,
}

impl Mode {
    pub fn other(self) -> Mode {
        match self {
            Mode::H => Mode::V,
            Mode::V => Mode::H,
        }
    }
}

/// One birefringent fibre section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSegment {
    /// m
    pub length: f64,
    /// s²/m
    pub beta2: f64,
    /// s³/m
    pub beta3: f64,
    /// 1/(W·m)
    pub gamma: f64,
    /// Group-delay difference between slow and fast axis, s/m.
    pub walkoff: f64,
    /// Power attenuation coefficient α, 1/m.
    pub loss_per_m: f64,
    pub raman_fraction: f64,
    /// s
    pub raman_tau1: f64,
    /// s
    pub raman_tau2: f64,
}

impl FiberSegment {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.length,
            self.beta2,
            self.beta3,
            self.gamma,
            self.walkoff,
            self.loss_per_m,
            self.raman_fraction,
            self.raman_tau1,
            self.raman_tau2,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("fiber segment", "non-finite parameter"));
        }
        if self.length < 0.0 {
            return Err(Error::invalid("fiber segment", "length must be >= 0"));
        }
        if self.gamma < 0.0 {
            return Err(Error::invalid("fiber segment", "gamma must be >= 0"));
        }
        if self.loss_per_m < 0.0 {
            return Err(Error::invalid("fiber segment", "loss_per_m must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.raman_fraction) {
            return Err(Error::invalid(
                "fiber segment",
                "raman_fraction must lie in [0, 1)",
            ));
        }
        if self.raman_fraction > 0.0 && (self.raman_tau1 <= 0.0 || self.raman_tau2 <= 0.0) {
            return Err(Error::invalid(
                "fiber segment",
                "raman time constants must be > 0",
            ));
        }
        Ok(())
    }

    pub fn raman(&self) -> RamanResponse {
        RamanResponse {
            fraction: self.raman_fraction,
            tau1: self.raman_tau1,
            tau2: self.raman_tau2,
        }
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self
    }

    /// Segment whose linear propagation undoes this one (dispersion and
    /// walk-off negated). Loss and nonlinearity are not reversible and are
    /// zeroed.
    pub fn time_reversed(&self) -> Self {
        FiberSegment {
            beta2: -self.beta2,
            beta3: -self.beta3,
            walkoff: -self.walkoff,
            gamma: 0.0,
            loss_per_m: 0.0,
            ..*self
        }
    }
}

/// 3M FS-PM-7811 at 1560 nm.
pub fn default_fiber_fs_pm_7811() -> FiberSegment {
    FiberSegment {
        length: 2.6,
        // -10.5 fs²/mm
        beta2: -10.5e-30 / 1e-3,
        // 155 fs³/mm
        beta3: 155e-45 / 1e-3,
        gamma: 3.0e-3,
        // 1.5 ps/m; not published for this fibre, see README.
        walkoff: 1.5e-12,
        loss_per_m: 0.0,
        raman_fraction: 0.18,
        raman_tau1: 12.2e-15,
        raman_tau2: 32e-15,
    }
}

/// Two halves spliced with a 90° rotation, so each pulse spends half the
/// length on the slow axis and half on the fast one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberAssembly {
    pub first: FiberSegment,
    pub second: FiberSegment,
    pub splice_transmission: f64,
    pub axes_swapped_at_splice: bool,
}

impl FiberAssembly {
    /// Cuts `fiber` into two pieces of total length `total_length` whose
    /// lengths differ by `asymmetry` (first minus second).
    pub fn split(
        fiber: FiberSegment,
        total_length: f64,
        asymmetry: f64,
        splice_transmission: f64,
    ) -> Self {
        FiberAssembly {
            first: fiber.with_length(0.5 * (total_length + asymmetry)),
            second: fiber.with_length(0.5 * (total_length - asymmetry)),
            splice_transmission,
            axes_swapped_at_splice: true,
        }
    }

    pub fn total_length(&self) -> f64 {
        self.first.length + self.second.length
    }

    pub fn asymmetry(&self) -> f64 {
        self.first.length - self.second.length
    }

    pub fn validate(&self) -> Result<()> {
        self.first.validate()?;
        self.second.validate()?;
        if !(self.splice_transmission > 0.0 && self.splice_transmission <= 1.0) {
            return Err(Error::invalid(
                "fiber assembly",
                "splice_transmission must lie in (0, 1]",
            ));
        }
        if self.total_length() <= 0.0 {
            return Err(Error::invalid("fiber assembly", "total length must be > 0"));
        }
        Ok(())
    }

    /// Largest excursion of either pulse from the grid centre caused by
    /// walk-off, in seconds.
    pub fn max_walkoff_delay(&self) -> f64 {
        let first = 0.5 * self.first.walkoff.abs() * self.first.length;
        if self.axes_swapped_at_splice {
            let back = 0.5 * self.second.walkoff.abs() * self.second.length;
            first.max((first - back).abs())
        } else {
            first + 0.5 * self.second.walkoff.abs() * self.second.length
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    /// FWHM of the sech² intensity profile, s.
    pub fwhm: f64,
    /// Energy summed over both modes, J.
    pub energy_total: f64,
    /// m
    pub center_wavelength: f64,
    /// Fraction of the energy launched into the H mode.
    pub split_ratio: f64,
}

impl PulseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm > 0.0 && self.fwhm.is_finite()) {
            return Err(Error::invalid("pulse", "fwhm must be > 0"));
        }
        if !(self.energy_total >= 0.0 && self.energy_total.is_finite()) {
            return Err(Error::invalid("pulse", "energy_total must be >= 0"));
        }
        if !(self.center_wavelength > 0.0 && self.center_wavelength.is_finite()) {
            return Err(Error::invalid("pulse", "center_wavelength must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.split_ratio) {
            return Err(Error::invalid("pulse", "split_ratio must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn photon_energy(&self) -> f64 {
        photon_energy(self.center_wavelength)
    }

    pub fn t0(&self) -> f64 {
        sech_t0(self.fwhm)
    }

    pub fn carrier_angular_frequency(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.center_wavelength
    }
}

/// Uniform periodic time grid centred on t = 0, with angular frequencies in
/// the usual FFT order (0, 1, …, N/2−1, −N/2, …, −1)·2π/window.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    n_points: usize,
    window: f64,
    dt: f64,
    times: Vec<f64>,
    angular_frequencies: Vec<f64>,
}

impl TimeGrid {
    pub fn new(n_points: usize, window: f64) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::invalid(
                "time grid",
                format!("n_points = {n_points} is not a power of two >= 2"),
            ));
        }
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::invalid("time grid", "window must be > 0"));
        }
        let dt = window / n_points as f64;
        let half = (n_points / 2) as isize;
        let times = (0..n_points)
            .map(|j| (j as isize - half) as f64 * dt)
            .collect();
        let dw = 2.0 * PI / window;
        let angular_frequencies = (0..n_points)
            .map(|k| {
                let k = k as isize;
                let signed = if k < half { k } else { k - n_points as isize };
                signed as f64 * dw
            })
            .collect();
        Ok(TimeGrid {
            n_points,
            window,
            dt,
            times,
            angular_frequencies,
        })
    }

    /// Smallest power-of-two grid with dt ≤ fwhm/16 and a window of at
    /// least 20·fwhm + 2·`walkoff_delay`.
    pub fn auto(fwhm: f64, walkoff_delay: f64) -> Result<Self> {
        let dt_max = fwhm / 16.0;
        let required = Self::required_window(fwhm, walkoff_delay);
        let n = ((required / dt_max).ceil() as usize).next_power_of_two().max(2);
        Self::new(n, n as f64 * dt_max)
    }

    pub fn required_window(fwhm: f64, walkoff_delay: f64) -> f64 {
        20.0 * fwhm + 2.0 * walkoff_delay
    }

    /// Checks the resolution rule for a pulse of the given FWHM.
    pub fn check_resolves(&self, fwhm: f64, walkoff_delay: f64) -> Result<()> {
        let limit = fwhm / 16.0;
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::GridTooCoarse { dt: self.dt, limit });
        }
        let required = Self::required_window(fwhm, walkoff_delay);
        if self.window < required * (1.0 - 1e-12) {
            return Err(Error::WindowTooSmall {
                window: self.window,
                required,
            });
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn d_omega(&self) -> f64 {
        2.0 * PI / self.window
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn angular_frequencies(&self) -> &[f64] {
        &self.angular_frequencies
    }
}

/// One phase-space sample of the H and V envelopes on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeField {
    pub grid: Arc<TimeGrid>,
    pub env_h: Vec<Complex64>,
    pub env_v: Vec<Complex64>,
}

impl TwoModeField {
    pub fn zeros(grid: Arc<TimeGrid>) -> Self {
        let n = grid.n_points();
        TwoModeField {
            grid,
            env_h: vec![Complex64::new(0.0, 0.0); n],
            env_v: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn mode(&self, mode: Mode) -> &[Complex64] {
        match mode {
            Mode::H => &self.env_h,
            Mode::V => &self.env_v,
        }
    }

    pub fn mode_mut(&mut self, mode: Mode) -> &mut [Complex64] {
        match mode {
            Mode::H => &mut self.env_h,
            Mode::V => &mut self.env_v,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.env_h
            .iter()
            .chain(&self.env_v)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Intensity-weighted mean time of one mode.
    pub fn centroid(&self, mode: Mode) -> f64 {
        let env = self.mode(mode);
        let (mut num, mut den) = (0.0, 0.0);
        for (a, t) in env.iter().zip(self.grid.times()) {
            let p = a.norm_sqr();
            num += p * t;
            den += p;
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    /// Elementwise mean of a set of fields on the same grid.
    pub fn mean<'a>(fields: impl IntoIterator<Item = &'a TwoModeField>) -> Option<TwoModeField> {
        let mut iter = fields.into_iter();
        let first = iter.next()?;
        let mut acc = first.clone();
        let mut count = 1usize;
        for f in iter {
            for (a, b) in acc.env_h.iter_mut().zip(&f.env_h) {
                *a += b;
            }
            for (a, b) in acc.env_v.iter_mut().zip(&f.env_v) {
                *a += b;
            }
            count += 1;
        }
        let scale = 1.0 / count as f64;
        acc.env_h.iter_mut().chain(acc.env_v.iter_mut()).for_each(|a| *a *= scale);
        Some(acc)
    }
}

/// Σ|env|²·dt over one mode.
pub fn photon_number(field: &TwoModeField, mode: Mode) -> f64 {
    field.mode(mode).iter().map(|a| a.norm_sqr()).sum::<f64>() * field.grid.dt()
}

/// 2|β₂|/(γ·T₀): energy of a fundamental soliton in one polarization mode.
pub fn soliton_energy_per_mode(seg: &FiberSegment, fwhm: f64) -> Result<f64> {
    if seg.beta2 >= 0.0 {
        return Err(Error::NoBrightSoliton { beta2: seg.beta2 });
    }
    if !(fwhm > 0.0) {
        return Err(Error::invalid("pulse", "fwhm must be > 0"));
    }
    if seg.gamma <= 0.0 {
        return Err(Error::invalid("fiber segment", "soliton needs gamma > 0"));
    }
    Ok(2.0 * seg.beta2.abs() / (seg.gamma * sech_t0(fwhm)))
}

/// (π/2)·T₀²/|β₂|.
pub fn soliton_period(seg: &FiberSegment, fwhm: f64) -> Result<f64> {
    if seg.beta2 >= 0.0 {
        return Err(Error::NoBrightSoliton { beta2: seg.beta2 });
    }
    if !(fwhm > 0.0) {
        return Err(Error::invalid("pulse", "fwhm must be > 0"));
    }
    let t0 = sech_t0(fwhm);
    Ok(0.5 * PI * t0 * t0 / seg.beta2.abs())
}

/// Sech pulses in both modes, centred in the window, in phase (linear
/// polarization at the angle set by `split_ratio`).
pub fn make_sech_pulse(grid: Arc<TimeGrid>, spec: &PulseSpec) -> Result<TwoModeField> {
    spec.validate()?;
    grid.check_resolves(spec.fwhm, 0.0)?;
    let t0 = spec.t0();
    let e_photon = spec.photon_energy();
    // ∫P₀ sech²(t/T₀) dt = 2·P₀·T₀
    let flux_peak = |energy: f64| energy / (2.0 * t0) / e_photon;
    let peak_h = flux_peak(spec.split_ratio * spec.energy_total).sqrt();
    let peak_v = flux_peak((1.0 - spec.split_ratio) * spec.energy_total).sqrt();
    let mut field = TwoModeField::zeros(grid.clone());
    for (j, t) in grid.times().iter().enumerate() {
        let s = 1.0 / (t / t0).cosh();
        field.env_h[j] = Complex64::new(peak_h * s, 0.0);
        field.env_v[j] = Complex64::new(peak_v * s, 0.0);
    }
    Ok(field)
}

/// Constant-power field in both modes, for dispersionless checks.
pub fn make_cw_field(
    grid: Arc<TimeGrid>,
    power_h: f64,
    power_v: f64,
    wavelength: f64,
) -> TwoModeField {
    let e_photon = photon_energy(wavelength);
    let amp_h = Complex64::new((power_h / e_photon).sqrt(), 0.0);
    let amp_v = Complex64::new((power_v / e_photon).sqrt(), 0.0);
    let n = grid.n_points();
    TwoModeField {
        grid,
        env_h: vec![amp_h; n],
        env_v: vec![amp_v; n],
    }
}

/// Damped-oscillator Raman response
/// h(t) = ((τ₁²+τ₂²)/(τ₁τ₂²))·e^(−t/τ₂)·sin(t/τ₁), t ≥ 0, normalized to unit area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamanResponse {
    pub fraction: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl RamanResponse {
    pub fn time_domain(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let (t1, t2) = (self.tau1, self.tau2);
        (t1 * t1 + t2 * t2) / (t1 * t2 * t2) * (-t / t2).exp() * (t / t1).sin()
    }

    /// ∫h(t)·e^(iΩt) dt, closed form.
    pub fn spectrum(&self, omega: f64) -> Complex64 {
        let a = 1.0 / self.tau2;
        let b = 1.0 / self.tau1;
        let amp = (self.tau1 * self.tau1 + self.tau2 * self.tau2)
            / (self.tau1 * self.tau2 * self.tau2);
        let z = Complex64::new(a, -omega);
        amp * b / (z * z + b * b)
    }
}
