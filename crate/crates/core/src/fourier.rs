//! FFT plans for the propagation convention
//! Ã(Ω) = Σ A(t)·e^{+iΩt},  A(t) = (1/N)·Σ Ã(Ω)·e^{−iΩt}.
//!
//! With this sign a multiplier e^{iΩτ} delays a pulse by τ, and the Raman
//! response transform is `RamanResponse::spectrum`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fourier {
    to_freq: Arc<dyn Fft<f64>>,
    to_time: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fourier {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        // rustfft's "inverse" carries e^{+i...}
        let to_freq = planner.plan_fft_inverse(n);
        let to_time = planner.plan_fft_forward(n);
        let scratch_len = to_freq
            .get_inplace_scratch_len()
            .max(to_time.get_inplace_scratch_len());
        Fourier {
            to_freq,
            to_time,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.to_freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalized forward transform in place.
    pub fn to_frequency(&mut self, buf: &mut [Complex64]) {
        self.to_freq.process_with_scratch(buf, &mut self.scratch);
    }

    /// Unnormalized backward transform in place; the caller owes a 1/N.
    pub fn to_time_unnormalized(&mut self, buf: &mut [Complex64]) {
        self.to_time.process_with_scratch(buf, &mut self.scratch);
    }

    pub fn to_time(&mut self, buf: &mut [Complex64]) {
        self.to_time_unnormalized(buf);
        let scale = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimeGrid;

    #[test]
    fn roundtrip_and_parseval() {
        let grid = TimeGrid::new(64, 6.4e-12).unwrap();
        let mut f = Fourier::new(64);
        let orig: Vec<Complex64> = (0..64)
            .map(|j| Complex64::new((j as f64 * 0.3).sin(), (j as f64 * 0.17).cos() * 0.5))
            .collect();
        let mut buf = orig.clone();
        f.to_frequency(&mut buf);
        // Σ|A|²dt = Σ|Ã·dt|²·dΩ/2π
        let time_energy: f64 = orig.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dt();
        let freq_energy: f64 = buf.iter().map(|z| (z * grid.dt()).norm_sqr()).sum::<f64>()
            * grid.d_omega()
            / (2.0 * std::f64::consts::PI);
        assert!((time_energy - freq_energy).abs() <= 1e-10 * time_energy);
        f.to_time(&mut buf);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn spectral_phase_delays() {
        let grid = TimeGrid::new(256, 25.6e-12).unwrap();
        let mut f = Fourier::new(256);
        let mut buf: Vec<Complex64> = grid
            .times()
            .iter()
            .map(|t| Complex64::new((-(t / 0.5e-12).powi(2)).exp(), 0.0))
            .collect();
        let tau = 2e-12;
        f.to_frequency(&mut buf);
        for (z, w) in buf.iter_mut().zip(grid.angular_frequencies()) {
            *z *= Complex64::from_polar(1.0, w * tau);
        }
        f.to_time(&mut buf);
        let peak = buf
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap()
            .0;
        assert!((grid.times()[peak] - tau).abs() < grid.dt());
    }
}
