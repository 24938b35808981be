//! Symmetric split-step integration of the coupled stochastic NLSE for the
//! two polarization modes, segment by segment through the spliced fibre.
//!
//! Linear part (per mode, frequency domain):
//!   exp(i(β₂Ω²/2 + β₃Ω³/6 ± (δβ₁/2)·Ω)·h), + for the slow-axis mode.
//! Nonlinear part (per mode, time domain, phase only):
//!   γh·[(1−f_R)(P_self + ⅔P_other) + f_R·(h_R ⊛ P_self)] + Raman noise.
//! Distributed loss, when present, is applied after every step as a
//! beam-splitter with fresh vacuum.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detection::attenuate;
use crate::error::{Error, Result};
use crate::fourier::Fourier;
use crate::model::{FiberAssembly, FiberSegment, Mode, TimeGrid, TwoModeField};
use crate::sampler::{LossPoint, NoiseStream, RamanNoise, SeedPlan};

const XPM_COEFFICIENT: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepperConfig {
    /// Requested split-step length, m. Rounded so each segment holds a
    /// whole number of steps.
    pub step_size: f64,
    pub raman_noise_enabled: bool,
    /// K
    pub temperature: f64,
    /// Length of the fixed z-lattice on which Raman noise is drawn, m.
    /// Steps sum the cells they cover, so runs with different step sizes
    /// see the same noise path.
    pub noise_cell: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            step_size: 2e-3,
            raman_noise_enabled: true,
            temperature: 300.0,
            noise_cell: 1e-3,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid("stepper", "step_size must be > 0"));
        }
        if !(self.noise_cell > 0.0 && self.noise_cell.is_finite()) {
            return Err(Error::invalid("stepper", "noise_cell must be > 0"));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::invalid("stepper", "temperature must be >= 0"));
        }
        Ok(())
    }

    pub fn steps_for(&self, length: f64) -> usize {
        if length <= 0.0 {
            0
        } else {
            ((length / self.step_size).round() as usize).max(1)
        }
    }
}

/// Which polarization mode rides the slow axis in a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    HSlow,
    HFast,
}

impl Orientation {
    fn sign(self, mode: Mode) -> f64 {
        match (self, mode) {
            (Orientation::HSlow, Mode::H) | (Orientation::HFast, Mode::V) => 1.0,
            _ => -1.0,
        }
    }

    pub fn swapped(self) -> Self {
        match self {
            Orientation::HSlow => Orientation::HFast,
            Orientation::HFast => Orientation::HSlow,
        }
    }
}

/// Per-thread scratch buffers.
pub struct Workspace {
    fourier: Fourier,
    extra: Vec<Complex64>,
    power_h: Vec<f64>,
    power_v: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Workspace {
            fourier: Fourier::new(n),
            extra: vec![Complex64::new(0.0, 0.0); n],
            power_h: vec![0.0; n],
            power_v: vec![0.0; n],
        }
    }
}

/// Linear multipliers (1/N folded in), one per mode.
#[derive(Debug, Clone)]
struct LinearOp {
    h: Vec<Complex64>,
    v: Vec<Complex64>,
}

impl LinearOp {
    fn new(grid: &TimeGrid, seg: &FiberSegment, length: f64, orientation: Orientation) -> Self {
        let inv_n = 1.0 / grid.n_points() as f64;
        let make = |mode: Mode| {
            let d = orientation.sign(mode) * 0.5 * seg.walkoff;
            grid.angular_frequencies()
                .iter()
                .map(|&w| {
                    let phase = (0.5 * seg.beta2 * w * w + seg.beta3 * w * w * w / 6.0 + d * w) * length;
                    Complex64::from_polar(inv_n, phase)
                })
                .collect()
        };
        LinearOp {
            h: make(Mode::H),
            v: make(Mode::V),
        }
    }

    fn apply(&self, field: &mut TwoModeField, ws: &mut Workspace) {
        for (env, mult) in [(&mut field.env_h, &self.h), (&mut field.env_v, &self.v)] {
            ws.fourier.to_frequency(env);
            for (a, m) in env.iter_mut().zip(mult) {
                *a *= m;
            }
            ws.fourier.to_time_unnormalized(env);
        }
    }
}

/// Precomputed operators for one segment.
#[derive(Debug, Clone)]
pub struct SegmentPropagator {
    seg: FiberSegment,
    segment_id: u32,
    n_steps: usize,
    h: f64,
    linear_only: bool,
    whole: LinearOp,
    half: LinearOp,
    full: LinearOp,
    /// γ·ħω₀·(1−f_R)·h
    kerr: f64,
    /// h̃_R(Ω)·γ·ħω₀·f_R·h/N
    raman_kernel: Option<Vec<Complex64>>,
    noise: Option<RamanNoise>,
    noise_cells: u64,
    cell: f64,
    step_transmission: f64,
}

impl SegmentPropagator {
    pub fn new(
        grid: &TimeGrid,
        seg: &FiberSegment,
        cfg: &StepperConfig,
        orientation: Orientation,
        photon_energy: f64,
        segment_id: u32,
    ) -> Self {
        let n_steps = cfg.steps_for(seg.length);
        let h = if n_steps > 0 {
            seg.length / n_steps as f64
        } else {
            0.0
        };
        let g = seg.gamma * photon_energy;
        let inv_n = 1.0 / grid.n_points() as f64;
        let raman_kernel = (seg.raman_fraction > 0.0 && g > 0.0).then(|| {
            let r = seg.raman();
            grid.angular_frequencies()
                .iter()
                .map(|&w| r.spectrum(w) * (g * seg.raman_fraction * h * inv_n))
                .collect()
        });
        let noise = (cfg.raman_noise_enabled && g > 0.0 && seg.raman_fraction > 0.0)
            .then(|| RamanNoise::new(grid, seg, cfg.temperature, photon_energy))
            .filter(|n| !n.is_silent());
        let noise_cells = if seg.length > 0.0 {
            ((seg.length / cfg.noise_cell).round() as u64).max(1)
        } else {
            0
        };
        let cell = if noise_cells > 0 {
            seg.length / noise_cells as f64
        } else {
            0.0
        };
        SegmentPropagator {
            seg: *seg,
            segment_id,
            n_steps,
            h,
            linear_only: g == 0.0,
            whole: LinearOp::new(grid, seg, seg.length, orientation),
            half: LinearOp::new(grid, seg, 0.5 * h, orientation),
            full: LinearOp::new(grid, seg, h, orientation),
            kerr: g * (1.0 - seg.raman_fraction) * h,
            raman_kernel,
            noise,
            noise_cells,
            cell,
            step_transmission: (-seg.loss_per_m * h).exp(),
        }
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step_length(&self) -> f64 {
        self.h
    }

    /// Lattice cells whose centres fall inside step `s`.
    fn cells_for_step(&self, s: usize) -> std::ops::Range<u64> {
        let index = |z: f64| -> u64 {
            let c = (z / self.cell - 0.5).ceil();
            (c.max(0.0) as u64).min(self.noise_cells)
        };
        let start = index(s as f64 * self.h);
        let end = if s + 1 == self.n_steps {
            self.noise_cells
        } else {
            index((s + 1) as f64 * self.h)
        };
        start..end
    }

    pub fn propagate(&self, field: &mut TwoModeField, plan: &SeedPlan, ws: &mut Workspace) -> Result<()> {
        if self.n_steps == 0 {
            return Ok(());
        }
        if self.linear_only {
            // Linear operators commute; loss with fresh vacuum commutes
            // with them in distribution.
            self.whole.apply(field, ws);
            let t = (-self.seg.loss_per_m * self.seg.length).exp();
            let id = self.segment_id;
            attenuate(field, t, plan, |m| NoiseStream::FibreLoss {
                segment: id,
                step: u64::MAX,
                mode: m,
            })?;
        } else {
            self.half.apply(field, ws);
            for s in 0..self.n_steps {
                self.nonlinear(field, plan, s, ws);
                if self.step_transmission < 1.0 {
                    let id = self.segment_id;
                    attenuate(field, self.step_transmission, plan, |m| NoiseStream::FibreLoss {
                        segment: id,
                        step: s as u64,
                        mode: m,
                    })?;
                }
                if s + 1 < self.n_steps {
                    self.full.apply(field, ws);
                } else {
                    self.half.apply(field, ws);
                }
            }
        }
        check_field(field)
    }

    fn nonlinear(&self, field: &mut TwoModeField, plan: &SeedPlan, step: usize, ws: &mut Workspace) {
        for (p, a) in ws.power_h.iter_mut().zip(&field.env_h) {
            *p = a.norm_sqr();
        }
        for (p, a) in ws.power_v.iter_mut().zip(&field.env_v) {
            *p = a.norm_sqr();
        }
        let have_extra = self.raman_kernel.is_some() || self.noise.is_some();
        if have_extra {
            let extra = &mut ws.extra;
            if let Some(kernel) = &self.raman_kernel {
                // Both modes in one transform: h_R is real.
                for ((e, ph), pv) in extra.iter_mut().zip(&ws.power_h).zip(&ws.power_v) {
                    *e = Complex64::new(*ph, *pv);
                }
                ws.fourier.to_frequency(extra);
                for (e, k) in extra.iter_mut().zip(kernel) {
                    *e *= k;
                }
            } else {
                extra.iter_mut().for_each(|e| *e = Complex64::new(0.0, 0.0));
            }
            if let Some(noise) = &self.noise {
                noise.accumulate(plan, self.segment_id, self.cells_for_step(step), self.cell, extra);
            }
            ws.fourier.to_time_unnormalized(extra);
        }
        let kerr = self.kerr;
        for j in 0..field.env_h.len() {
            let (ph, pv) = (ws.power_h[j], ws.power_v[j]);
            let (eh, ev) = if have_extra {
                (ws.extra[j].re, ws.extra[j].im)
            } else {
                (0.0, 0.0)
            };
            let phi_h = kerr * (ph + XPM_COEFFICIENT * pv) + eh;
            let phi_v = kerr * (pv + XPM_COEFFICIENT * ph) + ev;
            let (s, c) = phi_h.sin_cos();
            field.env_h[j] *= Complex64::new(c, s);
            let (s, c) = phi_v.sin_cos();
            field.env_v[j] *= Complex64::new(c, s);
        }
    }
}

fn check_field(field: &TwoModeField) -> Result<()> {
    if !field.is_finite() {
        return Err(Error::NonFinite);
    }
    let window = field.grid.window();
    for mode in [Mode::H, Mode::V] {
        let c = field.centroid(mode);
        if c.abs() > 0.4 * window {
            return Err(Error::FieldEscapesWindow { centroid: c, window });
        }
    }
    Ok(())
}

/// Both segments plus the splice.
#[derive(Debug, Clone)]
pub struct AssemblyPropagator {
    grid: Arc<TimeGrid>,
    first: SegmentPropagator,
    second: SegmentPropagator,
    splice_transmission: f64,
}

impl AssemblyPropagator {
    pub fn new(
        grid: Arc<TimeGrid>,
        asm: &FiberAssembly,
        cfg: &StepperConfig,
        photon_energy: f64,
    ) -> Self {
        let first_orientation = Orientation::HSlow;
        let second_orientation = if asm.axes_swapped_at_splice {
            first_orientation.swapped()
        } else {
            first_orientation
        };
        AssemblyPropagator {
            first: SegmentPropagator::new(&grid, &asm.first, cfg, first_orientation, photon_energy, 0),
            second: SegmentPropagator::new(&grid, &asm.second, cfg, second_orientation, photon_energy, 1),
            splice_transmission: asm.splice_transmission,
            grid,
        }
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.grid.n_points())
    }

    pub fn total_steps(&self) -> usize {
        self.first.n_steps + self.second.n_steps
    }

    pub fn propagate(&self, field: &mut TwoModeField, plan: &SeedPlan, ws: &mut Workspace) -> Result<()> {
        self.first.propagate(field, plan, ws)?;
        attenuate(field, self.splice_transmission, plan, |m| {
            NoiseStream::Loss(LossPoint::Splice, m)
        })?;
        self.second.propagate(field, plan, ws)
    }
}

/// Linear operator over distance `h` (dispersion and walk-off; loss is left
/// to the stochastic loss step).
pub fn linear_step(field: &TwoModeField, seg: &FiberSegment, h: f64, orientation: Orientation) -> TwoModeField {
    let mut out = field.clone();
    let mut ws = Workspace::new(field.grid.n_points());
    LinearOp::new(&field.grid, seg, h, orientation).apply(&mut out, &mut ws);
    out
}

/// Nonlinear phase over distance `h` without Raman noise.
pub fn nonlinear_step(field: &TwoModeField, seg: &FiberSegment, h: f64, photon_energy: f64) -> TwoModeField {
    let mut out = field.clone();
    let cfg = StepperConfig {
        step_size: h,
        raman_noise_enabled: false,
        ..StepperConfig::default()
    };
    let stepper = SegmentPropagator::new(
        &field.grid,
        &seg.with_length(h),
        &cfg,
        Orientation::HSlow,
        photon_energy,
        0,
    );
    let mut ws = Workspace::new(field.grid.n_points());
    stepper.nonlinear(&mut out, &SeedPlan::new(0, 0), 0, &mut ws);
    out
}

pub fn propagate_segment(
    field: &TwoModeField,
    seg: &FiberSegment,
    cfg: &StepperConfig,
    plan: &SeedPlan,
    orientation: Orientation,
    photon_energy: f64,
) -> Result<TwoModeField> {
    let mut out = field.clone();
    let stepper = SegmentPropagator::new(&field.grid, seg, cfg, orientation, photon_energy, 0);
    stepper.propagate(&mut out, plan, &mut Workspace::new(field.grid.n_points()))?;
    Ok(out)
}

pub fn propagate_assembly(
    field: &TwoModeField,
    asm: &FiberAssembly,
    cfg: &StepperConfig,
    plan: &SeedPlan,
    photon_energy: f64,
) -> Result<TwoModeField> {
    let mut out = field.clone();
    let prop = AssemblyPropagator::new(field.grid.clone(), asm, cfg, photon_energy);
    let mut ws = prop.workspace();
    prop.propagate(&mut out, plan, &mut ws)?;
    Ok(out)
}
