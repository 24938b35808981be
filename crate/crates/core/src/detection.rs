//! Free-space detection chain: wave plates, lumped losses and the balanced
//! Stokes measurement.
//!
//! Jones matrices act on the (H, V) pair at every time sample. Wave plates
//! are achromatic. In Stokes space the Pauli set (σ_z, σ_x, σ_y) plays the
//! role of (S₁, S₂, S₃), so `exp(−i·α/2·n·σ)` rotates the Stokes vector by
//! α about `n`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{photon_number, Mode, TwoModeField};
use crate::sampler::{fill_vacuum, LossPoint, NoiseStream, SeedPlan};

const UNITARY_TOL: f64 = 1e-12;

/// Pulse-integrated Stokes values of one trajectory, in photons.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StokesSample {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesSample {
    pub fn vector(&self) -> [f64; 3] {
        [self.s1, self.s2, self.s3]
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.s0, self.s1, self.s2, self.s3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionChain {
    /// Transmission at the fibre end (non-ideal mode interference).
    pub exit_transmission: f64,
    /// Optics and photodiode quantum efficiency, lumped.
    pub detection_transmission: f64,
    /// Ellipse alignment angle θ set with the half-wave plate, rad.
    pub hwp_angle: f64,
    /// Deliberate attenuation in front of the polarizing splitter.
    pub extra_attenuation: f64,
}

impl Default for DetectionChain {
    fn default() -> Self {
        DetectionChain {
            exit_transmission: 0.96,
            detection_transmission: 0.88,
            hwp_angle: 0.0,
            extra_attenuation: 1.0,
        }
    }
}

impl DetectionChain {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("exit_transmission", self.exit_transmission),
            ("detection_transmission", self.detection_transmission),
            ("extra_attenuation", self.extra_attenuation),
        ] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::invalid(
                    "detection chain",
                    format!("{name} = {t} must lie in (0, 1]"),
                ));
            }
        }
        if !self.hwp_angle.is_finite() {
            return Err(Error::invalid("detection chain", "hwp_angle must be finite"));
        }
        Ok(())
    }

    /// Transmission of everything after the fibre.
    pub fn total_transmission(&self) -> f64 {
        self.exit_transmission * self.detection_transmission * self.extra_attenuation
    }
}

/// 2×2 complex matrix acting on (H, V).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jones(pub [[Complex64; 2]; 2]);

impl Jones {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Jones([[one, zero], [zero, one]])
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Jones([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn mul(&self, other: &Jones) -> Jones {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Jones(out)
    }

    /// max |(J†J − I)_ij|
    pub fn unitarity_error(&self) -> f64 {
        let p = self.dagger().mul(self);
        let id = Jones::identity();
        let mut err: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                err = err.max((p.0[i][j] - id.0[i][j]).norm());
            }
        }
        err
    }

    pub fn apply(&self, h: Complex64, v: Complex64) -> (Complex64, Complex64) {
        let m = &self.0;
        (m[0][0] * h + m[0][1] * v, m[1][0] * h + m[1][1] * v)
    }

    /// Half-wave plate with its fast axis at `angle` from H. Maps
    /// (S₁, S₂, S₃) → (cos4φ·S₁ + sin4φ·S₂, sin4φ·S₁ − cos4φ·S₂, −S₃).
    pub fn half_wave_plate(angle: f64) -> Self {
        let (s, c) = (2.0 * angle).sin_cos();
        let i = Complex64::new(0.0, 1.0);
        // global factor i makes the determinant 1
        Jones([[i * c, i * s], [i * s, -i * c]])
    }

    pub fn quarter_wave_plate(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let i = Complex64::new(0.0, 1.0);
        let rot = Jones([
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ]);
        let e = Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4);
        let plate = Jones([
            [e, Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), e * i],
        ]);
        rot.mul(&plate).mul(&rot.dagger())
    }

    /// SU(2) element rotating Stokes vectors by `angle` about the unit
    /// `axis` = (n₁, n₂, n₃) in (S₁, S₂, S₃) coordinates.
    pub fn stokes_rotation(axis: [f64; 3], angle: f64) -> Self {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let [n1, n2, n3] = axis.map(|x| x / norm);
        let (s, c) = (0.5 * angle).sin_cos();
        let i = Complex64::new(0.0, 1.0);
        // n·σ with S₁↔σ_z, S₂↔σ_x, S₃↔σ_y
        let ns = [
            [Complex64::new(n1, 0.0), Complex64::new(n2, -n3)],
            [Complex64::new(n2, n3), Complex64::new(-n1, 0.0)],
        ];
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let id = if a == b { c } else { 0.0 };
                out[a][b] = Complex64::new(id, 0.0) - i * s * ns[a][b];
            }
        }
        Jones(out)
    }
}

/// Multiplies every (H, V) sample by `matrix`.
pub fn apply_jones(field: &TwoModeField, matrix: &Jones) -> Result<TwoModeField> {
    let mut out = field.clone();
    apply_jones_in_place(&mut out, matrix)?;
    Ok(out)
}

pub fn apply_jones_in_place(field: &mut TwoModeField, matrix: &Jones) -> Result<()> {
    let deviation = matrix.unitarity_error();
    if deviation > UNITARY_TOL {
        return Err(Error::NonUnitary { deviation });
    }
    for (h, v) in field.env_h.iter_mut().zip(field.env_v.iter_mut()) {
        let (nh, nv) = matrix.apply(*h, *v);
        *h = nh;
        *v = nv;
    }
    Ok(())
}

/// Unitary that takes the polarization of the ensemble-mean field to
/// circular (mean Stokes vector along +S₃).
pub fn circularize(mean_field: &TwoModeField) -> Result<Jones> {
    let n_h = photon_number(mean_field, Mode::H);
    let n_v = photon_number(mean_field, Mode::V);
    let total = n_h + n_v;
    if !(total > 0.0) || n_h <= 1e-6 * total || n_v <= 1e-6 * total {
        return Err(Error::DegenerateMeanField(format!(
            "mode photon numbers H = {n_h:e}, V = {n_v:e}"
        )));
    }
    let s = measure_stokes(mean_field);
    let v = s.vector();
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if !(len > 1e-9 * s.s0) {
        return Err(Error::DegenerateMeanField("mean field is unpolarized".into()));
    }
    let u = v.map(|x| x / len);
    // axis = u × ẑ
    let axis = [u[1], -u[0], 0.0];
    let sin = (axis[0] * axis[0] + axis[1] * axis[1]).sqrt();
    let angle = sin.atan2(u[2]);
    if sin < 1e-15 {
        return Ok(if u[2] > 0.0 {
            Jones::identity()
        } else {
            Jones::stokes_rotation([1.0, 0.0, 0.0], std::f64::consts::PI)
        });
    }
    Ok(Jones::stokes_rotation(axis, angle))
}

/// Half-wave plate that, after circularization, puts the measured S₁
/// direction at ellipse angle `theta` from the squeezed axis. `squeezed_axis`
/// is the angle of the minimum-variance direction in the (S₁, S₂) plane
/// before the plate (calibration).
pub fn set_ellipse_angle(theta: f64, squeezed_axis: f64) -> Jones {
    Jones::half_wave_plate(0.25 * (theta + squeezed_axis))
}

/// Beam-splitter loss: each mode → √T·A + √(1−T)·vacuum, fresh noise.
pub fn apply_loss(
    field: &TwoModeField,
    transmission: f64,
    plan: &SeedPlan,
    point: LossPoint,
) -> Result<TwoModeField> {
    let mut out = field.clone();
    attenuate(&mut out, transmission, plan, |m| NoiseStream::Loss(point, m))?;
    Ok(out)
}

pub(crate) fn attenuate(
    field: &mut TwoModeField,
    transmission: f64,
    plan: &SeedPlan,
    stream: impl Fn(Mode) -> NoiseStream,
) -> Result<()> {
    if !(0.0..=1.0).contains(&transmission) {
        return Err(Error::invalid(
            "transmission",
            format!("{transmission} outside [0, 1]"),
        ));
    }
    if transmission == 1.0 {
        return Ok(());
    }
    let keep = transmission.sqrt();
    let admix = (1.0 - transmission).sqrt();
    let dt = field.grid.dt();
    let mut noise = vec![Complex64::new(0.0, 0.0); field.grid.n_points()];
    for mode in [Mode::H, Mode::V] {
        fill_vacuum(&mut noise, dt, plan, stream(mode));
        for (a, d) in field.mode_mut(mode).iter_mut().zip(&noise) {
            *a = *a * keep + *d * admix;
        }
    }
    Ok(())
}

/// Pulse-integrated Stokes parameters:
/// s₀ = Σ(|H|²+|V|²)dt, s₁ = Σ(|H|²−|V|²)dt, s₂ = Σ2Re(H̄V)dt,
/// s₃ = Σ i(V̄H − H̄V)dt = Σ2Im(H̄V)dt.
pub fn measure_stokes(field: &TwoModeField) -> StokesSample {
    let (mut nh, mut nv, mut re, mut im) = (0.0, 0.0, 0.0, 0.0);
    for (h, v) in field.env_h.iter().zip(&field.env_v) {
        nh += h.norm_sqr();
        nv += v.norm_sqr();
        let c = h.conj() * v;
        re += c.re;
        im += c.im;
    }
    let dt = field.grid.dt();
    StokesSample {
        s0: (nh + nv) * dt,
        s1: (nh - nv) * dt,
        s2: 2.0 * re * dt,
        s3: 2.0 * im * dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimeGrid;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn random_field(seed: u64) -> TwoModeField {
        let grid = Arc::new(TimeGrid::new(32, 32e-14).unwrap());
        let plan = SeedPlan::new(seed, 0);
        let mut f = TwoModeField::zeros(grid);
        crate::sampler::add_vacuum(&mut f, &plan);
        for (j, z) in f.env_h.iter_mut().enumerate() {
            *z += Complex64::new(3e6 * (j as f64 * 0.2).cos(), 1e6);
        }
        f
    }

    fn mueller_hwp(angle: f64, s: [f64; 3]) -> [f64; 3] {
        let (sn, cs) = (4.0 * angle).sin_cos();
        [cs * s[0] + sn * s[1], sn * s[0] - cs * s[1], -s[2]]
    }

    fn close(a: f64, b: f64, scale: f64) -> bool {
        (a - b).abs() <= 1e-10 * scale
    }

    #[test]
    fn stokes_of_basis_states() {
        let grid = Arc::new(TimeGrid::new(16, 16e-12).unwrap());
        let mut f = TwoModeField::zeros(grid.clone());
        f.env_h.iter_mut().for_each(|z| *z = Complex64::new(1e6, 0.0));
        let s = measure_stokes(&f);
        let n = photon_number(&f, Mode::H);
        assert_eq!((s.s0, s.s1, s.s2, s.s3), (n, n, 0.0, 0.0));

        let a = 1e6 / 2f64.sqrt();
        let mut c = TwoModeField::zeros(grid);
        c.env_h.iter_mut().for_each(|z| *z = Complex64::new(a, 0.0));
        c.env_v.iter_mut().for_each(|z| *z = Complex64::new(0.0, a));
        let s = measure_stokes(&c);
        assert!(close(s.s3, s.s0, s.s0));
        assert!(s.s1.abs() < 1e-9 * s.s0 && s.s2.abs() < 1e-9 * s.s0);
    }

    #[test]
    fn stokes_matches_direct_sum() {
        let f = random_field(5);
        let s = measure_stokes(&f);
        let dt = f.grid.dt();
        let i = Complex64::new(0.0, 1.0);
        let mut acc = [Complex64::new(0.0, 0.0); 4];
        for (h, v) in f.env_h.iter().zip(&f.env_v) {
            acc[0] += h.conj() * h + v.conj() * v;
            acc[1] += h.conj() * h - v.conj() * v;
            acc[2] += h.conj() * v + v.conj() * h;
            acc[3] += i * (v.conj() * h - h.conj() * v);
        }
        let direct: Vec<f64> = acc.iter().map(|z| z.re * dt).collect();
        for (a, b) in s.as_array().iter().zip(&direct) {
            assert!((a - b).abs() <= 1e-12 * direct[0]);
        }
    }

    #[test]
    fn identity_and_non_unitary() {
        let f = random_field(1);
        assert_eq!(apply_jones(&f, &Jones::identity()).unwrap(), f);
        let mut bad = Jones::identity();
        bad.0[0][0] = Complex64::new(1.1, 0.0);
        assert!(matches!(apply_jones(&f, &bad), Err(Error::NonUnitary { .. })));
    }

    #[test]
    fn stokes_rotation_direction() {
        // +90° about S₃ takes S₁ to S₂.
        let grid = Arc::new(TimeGrid::new(8, 8e-12).unwrap());
        let mut f = TwoModeField::zeros(grid);
        f.env_h.iter_mut().for_each(|z| *z = Complex64::new(1.0, 0.0));
        let r = Jones::stokes_rotation([0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_2);
        let s = measure_stokes(&apply_jones(&f, &r).unwrap());
        assert!(close(s.s2, s.s0, s.s0) && s.s1.abs() < 1e-12);
    }

    #[test]
    fn circularize_linear_diagonal() {
        let grid = Arc::new(TimeGrid::new(8, 8e-12).unwrap());
        let mut f = TwoModeField::zeros(grid);
        f.env_h.iter_mut().for_each(|z| *z = Complex64::new(1.0, 0.0));
        f.env_v.iter_mut().for_each(|z| *z = Complex64::new(1.0, 0.0));
        let u = circularize(&f).unwrap();
        let s = measure_stokes(&apply_jones(&f, &u).unwrap());
        assert!(s.s3 / s.s0 > 0.999_999);
    }

    #[test]
    fn circularize_already_circular_is_identity() {
        let grid = Arc::new(TimeGrid::new(8, 8e-12).unwrap());
        let mut f = TwoModeField::zeros(grid);
        f.env_h.iter_mut().for_each(|z| *z = Complex64::new(1.0, 0.0));
        f.env_v.iter_mut().for_each(|z| *z = Complex64::new(0.0, 1.0));
        let u = circularize(&f).unwrap();
        // identity up to a global phase
        let phase = u.0[0][0] / u.0[0][0].norm();
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { phase } else { Complex64::new(0.0, 0.0) };
                assert!((u.0[i][j] - id).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn circularize_rejects_single_mode() {
        let grid = Arc::new(TimeGrid::new(8, 8e-12).unwrap());
        let mut f = TwoModeField::zeros(grid);
        f.env_h.iter_mut().for_each(|z| *z = Complex64::new(1.0, 0.0));
        assert!(matches!(circularize(&f), Err(Error::DegenerateMeanField(_))));
    }

    #[test]
    fn ellipse_plate_preserves_s3_magnitude() {
        let f = random_field(2);
        let u = circularize(&TwoModeField::mean([&f]).unwrap()).unwrap();
        let c = apply_jones(&f, &u).unwrap();
        let before = measure_stokes(&c);
        for theta in [0.0, 0.3, 1.1, 2.5] {
            let after = measure_stokes(&apply_jones(&c, &set_ellipse_angle(theta, 0.4)).unwrap());
            assert!((after.s3.abs() - before.s3.abs()).abs() <= 1e-9 * before.s3.abs());
        }
    }

    #[test]
    fn loss_edge_cases() {
        let f = random_field(3);
        let plan = SeedPlan::new(0, 0);
        assert_eq!(apply_loss(&f, 1.0, &plan, LossPoint::Detection).unwrap(), f);
        assert!(apply_loss(&f, 1.5, &plan, LossPoint::Detection).is_err());
        let dark = apply_loss(&f, 0.0, &plan, LossPoint::Detection).unwrap();
        // only vacuum left: about half a photon per grid mode
        let n = photon_number(&dark, Mode::H);
        assert!(n < 0.5 * f.grid.n_points() as f64 * 3.0);
    }

    proptest! {
        #[test]
        fn hwp_matches_mueller(seed in 0u64..1000, angle in -3.2f64..3.2) {
            let f = random_field(seed);
            let before = measure_stokes(&f);
            let after = measure_stokes(&apply_jones(&f, &Jones::half_wave_plate(angle)).unwrap());
            let expect = mueller_hwp(angle, before.vector());
            let v = after.vector();
            for k in 0..3 {
                prop_assert!(close(v[k], expect[k], before.s0));
            }
        }

        #[test]
        fn unitaries_preserve_s0(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.0f64..6.3) {
            let f = random_field(seed);
            let u = Jones::stokes_rotation([a, b, 1.0], c).mul(&Jones::quarter_wave_plate(a));
            let s = measure_stokes(&f).s0;
            let t = measure_stokes(&apply_jones(&f, &u).unwrap()).s0;
            prop_assert!(close(s, t, s));
        }
    }
}
