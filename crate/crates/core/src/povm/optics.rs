//! Jones-calculus model of the beam-displacer POVM interferometer.
//!
//! The photon lives in polarization (H, V) tensor path (U, L), index
//! `2 * pol + path`. Conventions:
//!
//! * wave plate with fast axis at `t` and retardance `d`:
//!   `R(t) diag(1, e^{i d}) R(-t)`, so a HWP is `[[cos 2t, sin 2t], [sin 2t, -cos 2t]]`
//!   and the QWP at 45 degrees is `e^{i pi/4} [[1, -i], [-i, 1]] / sqrt 2`;
//! * the first beam displacer sends `H -> HU` and `V -> VL`;
//! * a PBS transmits H and reflects V;
//! * the recombining displacer merges `VU -> V` and `HL -> H`.
//!
//! The 0-degree plates that balance path lengths are tilted to add a relative
//! phase [`BALANCING_PLATE_PHASE`] on their path. With this phase the four
//! detector effects reproduce [`super::povm_experimental`] exactly.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, RowDVector};

use super::{OutcomeLabel, Povm};
use crate::linalg::{c, Operator, C64};

/// Phase added by the tilted 0-degree HWP relative to the flipping 45-degree HWP.
pub const BALANCING_PLATE_PHASE: f64 = FRAC_PI_2;

const H: usize = 0;
const V: usize = 1;
const U: usize = 0;
const L: usize = 1;

fn idx(pol: usize, path: usize) -> usize {
    2 * pol + path
}

fn rotation(t: f64) -> DMatrix<C64> {
    let (s, co) = t.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
}

/// Linear retarder with fast axis at `angle` and retardance `retardance`.
pub fn wave_plate(angle: f64, retardance: f64) -> DMatrix<C64> {
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), C64::from_polar(1.0, retardance)]));
    rotation(angle) * d * rotation(-angle)
}

pub fn half_wave_plate(angle: f64) -> DMatrix<C64> {
    let (s, co) = (2.0 * angle).sin_cos();
    DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(s, 0.0), c(s, 0.0), c(-co, 0.0)])
}

pub fn quarter_wave_plate(angle: f64) -> DMatrix<C64> {
    wave_plate(angle, FRAC_PI_2)
}

/// Polarization optic acting identically on both paths.
fn on_polarization(m: &DMatrix<C64>) -> DMatrix<C64> {
    m.kronecker(&DMatrix::identity(2, 2))
}

/// Different polarization optics on the U and L paths.
fn per_path(upper: &DMatrix<C64>, lower: &DMatrix<C64>) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(4, 4);
    for (path, m) in [(U, upper), (L, lower)] {
        for a in 0..2 {
            for b in 0..2 {
                out[(idx(a, path), idx(b, path))] = m[(a, b)];
            }
        }
    }
    out
}

fn polarization_filter(pol: usize) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(4, 4);
    for path in [U, L] {
        out[(idx(pol, path), idx(pol, path))] = c(1.0, 0.0);
    }
    out
}

fn first_displacer() -> DMatrix<C64> {
    let mut m = DMatrix::zeros(4, 2);
    m[(idx(H, U), H)] = c(1.0, 0.0);
    m[(idx(V, L), V)] = c(1.0, 0.0);
    m
}

fn recombining_displacer() -> DMatrix<C64> {
    let mut m = DMatrix::zeros(2, 4);
    m[(V, idx(V, U))] = c(1.0, 0.0);
    m[(H, idx(H, L))] = c(1.0, 0.0);
    m
}

/// First-stage arm after the first PBS.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arm {
    Transmitted,
    Reflected,
}

/// The interferometer at one setting.
#[derive(Clone, Debug)]
pub struct Interferometer {
    pub phi: f64,
    pub theta: f64,
    pub balancing_phase: f64,
}

impl Interferometer {
    pub fn new(phi: f64, theta: f64) -> Self {
        Interferometer { phi, theta, balancing_phase: BALANCING_PLATE_PHASE }
    }

    /// Map from input polarization to the recombined polarization qubit in `arm`.
    pub fn arm_map(&self, arm: Arm) -> DMatrix<C64> {
        let split = on_polarization(&half_wave_plate(self.phi / 4.0)) * first_displacer();
        let flip = half_wave_plate(std::f64::consts::FRAC_PI_4);
        let balance = half_wave_plate(0.0) * C64::from_polar(1.0, self.balancing_phase);
        let (filter, plates) = match arm {
            Arm::Transmitted => (polarization_filter(H), per_path(&flip, &balance)),
            Arm::Reflected => (polarization_filter(V), per_path(&balance, &flip)),
        };
        recombining_displacer() * plates * filter * split
    }

    /// Second-stage analyzer in `arm`: QWP at 45 degrees then HWP at -theta/4
    /// (transmitted arm) or +theta/4 (reflected arm).
    pub fn analyzer(&self, arm: Arm) -> DMatrix<C64> {
        let hwp_angle = match arm {
            Arm::Transmitted => -self.theta / 4.0,
            Arm::Reflected => self.theta / 4.0,
        };
        half_wave_plate(hwp_angle) * quarter_wave_plate(std::f64::consts::FRAC_PI_4)
    }

    /// Amplitude functional `<detector| ... |input>` as a row vector.
    pub fn detector_row(&self, label: OutcomeLabel) -> RowDVector<C64> {
        let arm = if label.first_reflected() { Arm::Reflected } else { Arm::Transmitted };
        let pol = if label.second_reflected() { V } else { H };
        let total = self.analyzer(arm) * self.arm_map(arm);
        total.row(pol).into_owned()
    }

    /// Rank-1 effect `e^dagger e` for one detector.
    pub fn effect(&self, label: OutcomeLabel) -> Operator {
        let row = self.detector_row(label);
        Operator::from_matrix(row.adjoint() * row).expect("2x2 effect")
    }

    pub fn povm(&self) -> Povm {
        let elements = OutcomeLabel::ALL.iter().map(|&l| self.effect(l)).collect();
        Povm::new(OutcomeLabel::ALL.to_vec(), elements).expect("four labelled effects")
    }
}

/// The four detector effects of the interferometer at `(phi, theta)`.
pub fn optical_model_povm(phi: f64, theta: f64) -> Povm {
    Interferometer::new(phi, theta).povm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::{povm_experimental, validate};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn plate_conventions() {
        let q = quarter_wave_plate(FRAC_PI_4);
        let s = C64::from_polar(1.0, FRAC_PI_4) / 2f64.sqrt();
        let expect = DMatrix::from_row_slice(2, 2, &[s, s * c(0.0, -1.0), s * c(0.0, -1.0), s]);
        assert!((q - expect).norm() < 1e-15);
        let h = half_wave_plate(0.3);
        let via_retarder = wave_plate(0.3, PI);
        assert!((h - via_retarder).norm() < 1e-15);
    }

    #[test]
    fn first_displacer_entangles_path() {
        // a|H> + b|V> -> a|HU> + b|VL>
        let out = first_displacer() * nalgebra::DVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        assert_eq!(out[idx(H, U)], c(0.6, 0.0));
        assert_eq!(out[idx(V, L)], c(0.0, 0.8));
        assert_eq!(out[idx(H, L)], c(0.0, 0.0));
        assert_eq!(out[idx(V, U)], c(0.0, 0.0));
    }

    #[test]
    fn matches_experimental_povm_on_grid() {
        for i in 0..=12 {
            for j in 0..=12 {
                let phi = PI * i as f64 / 12.0;
                let theta = -PI + 2.0 * PI * j as f64 / 12.0;
                let d = optical_model_povm(phi, theta).labelled_distance(&povm_experimental(phi, theta));
                assert!(d < 1e-10, "phi={phi} theta={theta} d={d}");
            }
        }
    }

    #[test]
    fn complete_by_construction() {
        for (phi, theta) in [(0.0, 0.0), (0.4, 1.7), (PI, -2.0), (2.2, 3.1)] {
            assert!(validate(&optical_model_povm(phi, theta)).unwrap().passes);
        }
    }

    #[test]
    fn equatorial_setting_has_x_bloch_vectors() {
        let p = optical_model_povm(FRAC_PI_2, 0.0);
        let x = crate::catalog::Gate::X.matrix();
        for e in p.elements() {
            assert!((e.trace() - c(0.5, 0.0)).norm() < 1e-12);
            let bx = (x.trace_product(e).re) * 2.0;
            assert!((bx.abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_balancing_phase_breaks_agreement() {
        let mut ifm = Interferometer::new(1.0, 0.7);
        ifm.balancing_phase = 0.0;
        assert!(ifm.povm().labelled_distance(&povm_experimental(1.0, 0.7)) > 1e-3);
    }
}
