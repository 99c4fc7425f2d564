//! Rotating-frame qutrit Hamiltonians over the basis (|0⟩, |1⟩, |e⟩).
//!
//! `H₀ = (Ω/2)(e^{iψ}|b⟩⟨e| + h.c.) + Δ|e⟩⟨e|` and the counterdiabatic term
//! `H_a = iφ̇ e^{iψ}|b⟩⟨e| + h.c.`, where `ψ` is the coupling phase of the
//! drive sample (segment phase plus echo).

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, StateVector, C64, ZERO};
use crate::schedule::{DriveSample, GateSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HamiltonianKind {
    /// `H₀` only.
    Bare,
    /// `H₀ + H_a`.
    Sta,
}

/// Instantaneous eigenbasis of `H₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenFrame {
    /// |E₀⟩ = |d⟩, eigenvalue 0.
    pub dark: StateVector,
    pub e_minus: StateVector,
    pub eigenvalue_minus: f64,
    pub e_plus: StateVector,
    pub eigenvalue_plus: f64,
    /// `½ atan2(Ω, Δ) ∈ [0, π/2]`.
    pub mixing_angle: f64,
}

fn bright_dark_amplitudes(g: &GateSpec) -> (Vector3<C64>, Vector3<C64>) {
    let (s, c) = (0.5 * g.theta()).sin_cos();
    let phase = C64::from_polar(1.0, g.phi_rel());
    let bright = Vector3::new(phase * s, C64::new(c, 0.0), ZERO);
    let dark = Vector3::new(phase * c, C64::new(-s, 0.0), ZERO);
    (bright, dark)
}

/// `|b⟩ = sin(θ/2)e^{iφ}|0⟩ + cos(θ/2)|1⟩`, `|d⟩ = cos(θ/2)e^{iφ}|0⟩ − sin(θ/2)|1⟩`.
pub fn bright_dark_pair(g: &GateSpec) -> (StateVector, StateVector) {
    let (b, d) = bright_dark_amplitudes(g);
    let to_state = |v: Vector3<C64>| StateVector::new(v.iter().copied().collect()).unwrap();
    (to_state(b), to_state(d))
}

pub(crate) fn coupling(kind: HamiltonianKind, d: &DriveSample) -> C64 {
    let amplitude = match kind {
        HamiltonianKind::Bare => C64::new(0.5 * d.omega, 0.0),
        HamiltonianKind::Sta => C64::new(0.5 * d.omega, d.mixing_rate),
    };
    amplitude * C64::from_polar(1.0, d.coupling_phase())
}

/// Static-size assembly used inside the propagator loop.
pub(crate) fn hamiltonian3(
    kind: HamiltonianKind,
    bright: &Vector3<C64>,
    d: &DriveSample,
) -> Matrix3<C64> {
    let c = coupling(kind, d);
    let mut h = Matrix3::zeros();
    for i in 0..2 {
        let v = c * bright[i];
        h[(i, 2)] = v;
        h[(2, i)] = v.conj();
    }
    h[(2, 2)] = C64::new(d.delta, 0.0);
    h
}

pub(crate) fn bright_vector(g: &GateSpec) -> Vector3<C64> {
    bright_dark_amplitudes(g).0
}

/// Hamiltonian for bright-state parameters `g` (the schedule's bright frame) at sample `d`.
pub fn hamiltonian_at(kind: HamiltonianKind, g: &GateSpec, d: &DriveSample) -> CMatrix {
    let h = hamiltonian3(kind, &bright_vector(g), d);
    CMatrix::from_matrix(nalgebra::DMatrix::from_iterator(3, 3, h.iter().copied())).unwrap()
}

/// Closed-form eigenframe of `H₀`, gauge fixed so every |b⟩ component is real and non-negative.
pub fn eigensystem_at(g: &GateSpec, d: &DriveSample) -> Result<EigenFrame> {
    let radius = d.omega.hypot(d.delta);
    if radius == 0.0 {
        return Err(Error::Degenerate);
    }
    let (bright, dark) = bright_dark_amplitudes(g);
    let excited = Vector3::new(ZERO, ZERO, C64::from_polar(1.0, -d.coupling_phase()));
    let mixing_angle = 0.5 * d.omega.atan2(d.delta);
    let (s, c) = mixing_angle.sin_cos();
    let (s, c) = (C64::new(s, 0.0), C64::new(c, 0.0));
    let to_state = |v: Vector3<C64>| StateVector::new(v.iter().copied().collect()).unwrap();
    Ok(EigenFrame {
        dark: to_state(dark),
        e_minus: to_state(bright * c - excited * s),
        eigenvalue_minus: 0.5 * (d.delta - radius),
        e_plus: to_state(bright * s + excited * c),
        eigenvalue_plus: 0.5 * (d.delta + radius),
        mixing_angle,
    })
}

/// `⟨b|H|e⟩` for a Hamiltonian assembled with bright state `b`.
pub fn bright_excited_element(h: &CMatrix, bright: &StateVector) -> C64 {
    let e = StateVector::basis(3, 2);
    let he = h.apply(&e).expect("3x3 Hamiltonian");
    bright.inner(&he)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigenvalues;
    use crate::schedule::Segment;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn sample(omega: f64, delta: f64, phi1: f64, rate: f64) -> DriveSample {
        DriveSample {
            t: 0.0,
            omega,
            delta,
            phi1,
            echo_phase: 0.0,
            mixing_rate: rate,
            segment: Segment::FirstHalf,
        }
    }

    #[test]
    fn bright_dark_examples() {
        let z = GateSpec::new(PI, 0.0, PI).unwrap();
        let (b, d) = bright_dark_pair(&z);
        assert!((b[0] - C64::new(1.0, 0.0)).norm() < 1e-15 && b[1].norm() < 1e-15);
        assert!((d[1] + C64::new(1.0, 0.0)).norm() < 1e-15 && d[0].norm() < 1e-15);

        let g0 = GateSpec::new(0.0, 1.3, 0.0).unwrap();
        let (b, d) = bright_dark_pair(&g0);
        assert_eq!(b, StateVector::basis(3, 1));
        assert!((d[0] - C64::from_polar(1.0, 1.3)).norm() < 1e-15);
    }

    #[test]
    fn bright_dark_orthonormal() {
        for &(t, p) in &[(0.3, 0.1), (1.9, 5.0), (PI, 3.3)] {
            let (b, d) = bright_dark_pair(&GateSpec::new(t, p, 0.0).unwrap());
            assert_abs_diff_eq!(b.norm(), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(d.norm(), 1.0, epsilon = 1e-15);
            assert!(b.inner(&d).norm() < 1e-14);
            assert_eq!(b[2], ZERO);
        }
    }

    #[test]
    fn drive_off_leaves_detuning_only() {
        let g = GateSpec::new(1.0, 2.0, 0.5).unwrap();
        let h = hamiltonian_at(HamiltonianKind::Sta, &g, &sample(0.0, 7.0, 0.3, 0.0));
        let expected = CMatrix::diagonal(&[ZERO, ZERO, C64::new(7.0, 0.0)]).unwrap();
        assert!(h.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn counterdiabatic_coupling_element() {
        let oa = 2.0 * PI * 2e6;
        let rate = PI / 0.5e-6;
        let g = GateSpec::new(PI / 2.0, 0.0, PI).unwrap();
        let h = hamiltonian_at(HamiltonianKind::Sta, &g, &sample(oa, 0.0, 0.0, rate));
        let (b, _) = bright_dark_pair(&g);
        let elem = bright_excited_element(&h, &b);
        assert!((elem - C64::new(0.5 * oa, rate)).norm() < 1e-6);
        assert!(h.hermiticity_defect() < 1e-14 * h.max_abs());
    }

    #[test]
    fn bare_hamiltonian_annihilates_dark_state() {
        let g = GateSpec::new(0.9, 4.1, 1.0).unwrap();
        let d = sample(3.0e7, -1.0e7, 2.2, 5e6);
        let h = hamiltonian_at(HamiltonianKind::Bare, &g, &d);
        let (_, dark) = bright_dark_pair(&g);
        assert!(h.apply(&dark).unwrap().norm() < 1e-8);
        let hs = hamiltonian_at(HamiltonianKind::Sta, &g, &d);
        assert!(hs.apply(&dark).unwrap().norm() < 1e-8);
    }

    #[test]
    fn eigenframe_at_drive_off() {
        let oa = 10.0;
        let g = GateSpec::new(1.0, 0.4, 0.0).unwrap();
        let f = eigensystem_at(&g, &sample(0.0, oa, 0.7, 0.0)).unwrap();
        let (b, _) = bright_dark_pair(&g);
        assert!(f.e_minus.inner(&b).norm() > 1.0 - 1e-15);
        assert_eq!(f.eigenvalue_minus, 0.0);
        assert_abs_diff_eq!(f.e_plus[2].norm(), 1.0, epsilon = 1e-15);
        assert_eq!(f.eigenvalue_plus, oa);
    }

    #[test]
    fn eigenframe_on_resonance() {
        // block [[0, Ω/2], [Ω/2, 0]] → ±Ω/2, E₋ = (|b⟩ − e^{−iφ₁}|e⟩)/√2
        let oa = 4.0;
        let phi1 = 0.9;
        let g = GateSpec::new(2.0, 1.0, 0.0).unwrap();
        let f = eigensystem_at(&g, &sample(oa, 0.0, phi1, 0.0)).unwrap();
        assert_abs_diff_eq!(f.eigenvalue_minus, -0.5 * oa, epsilon = 1e-15);
        assert_abs_diff_eq!(f.eigenvalue_plus, 0.5 * oa, epsilon = 1e-15);
        let (b, _) = bright_dark_pair(&g);
        let mut amps: Vec<C64> = b.amplitudes().iter().map(|z| z * FRAC_1_SQRT_2).collect();
        amps[2] = -C64::from_polar(FRAC_1_SQRT_2, -phi1);
        let expected = StateVector::new(amps).unwrap();
        assert!((f.e_minus.inner(&expected).norm() - 1.0).abs() < 1e-14);
        assert!(f.e_minus.inner(&b).im.abs() < 1e-15 && f.e_minus.inner(&b).re > 0.0);
    }

    #[test]
    fn eigenframe_matches_numerical_diagonalisation() {
        let g = GateSpec::new(0.7, 5.5, 0.0).unwrap();
        for &(om, de) in &[(1.0, 2.0), (3.0, -1.0), (0.5, 0.0), (2.0, -7.0)] {
            let d = sample(om, de, 1.3, 0.0);
            let f = eigensystem_at(&g, &d).unwrap();
            let h = hamiltonian_at(HamiltonianKind::Bare, &g, &d);
            let mut numeric = hermitian_eigenvalues(&h);
            numeric.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut closed = vec![0.0, f.eigenvalue_minus, f.eigenvalue_plus];
            closed.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in numeric.iter().zip(&closed) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
            for (v, lam) in [
                (&f.e_minus, f.eigenvalue_minus),
                (&f.e_plus, f.eigenvalue_plus),
                (&f.dark, 0.0),
            ] {
                let hv = h.apply(v).unwrap();
                let residual = StateVector::new(
                    hv.amplitudes()
                        .iter()
                        .zip(v.amplitudes().iter())
                        .map(|(a, b)| a - b * lam)
                        .collect(),
                )
                .unwrap();
                assert!(residual.norm() < 1e-10);
            }
            assert!(f.e_minus.inner(&f.e_plus).norm() < 1e-10);
            assert!(f.dark.inner(&f.e_plus).norm() < 1e-10);
        }
    }

    #[test]
    fn degenerate_drive_flagged() {
        let g = GateSpec::new(0.7, 0.0, 0.0).unwrap();
        assert!(matches!(
            eigensystem_at(&g, &sample(0.0, 0.0, 0.0, 0.0)),
            Err(Error::Degenerate)
        ));
    }
}
