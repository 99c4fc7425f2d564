use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::{
    check_phases, check_time, ControlSchedule, DriveSample, ErrorModel, GateSpec, Scheme, Segment,
    ECHO_PHASE,
};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianKind;

/// Mixing-angle profile of one half-gate, `s ∈ [0, T/2]`:
///
/// `φ(s) = πs/T + Σ_k c_k sin(4πk s/T)`
///
/// Each harmonic vanishes at both ends of the half and is odd about `T/4`, so
/// `φ(0) = 0`, `φ(T/2) = π/2` and `φ(T/2 − s) = π/2 − φ(s)` hold for any
/// coefficients. The last identity makes `∫cos 2φ ds = 0`, which is what lets
/// the dynamical phases of the two halves cancel.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MixingProfile {
    coeffs: Vec<f64>,
}

impl MixingProfile {
    pub const MAX_HARMONICS: usize = 8;

    pub fn baseline() -> Self {
        MixingProfile::default()
    }

    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() > Self::MAX_HARMONICS {
            return Err(Error::invalid(format!(
                "at most {} harmonics supported",
                Self::MAX_HARMONICS
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite profile coefficient"));
        }
        Ok(MixingProfile { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_baseline(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Raw `φ(s)` without mirroring.
    fn raw_angle(&self, s: f64, duration: f64) -> f64 {
        let harmonics: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * (4.0 * PI * (k + 1) as f64 * s / duration).sin())
            .sum();
        PI * s / duration + harmonics
    }

    /// `φ(s)`, evaluated on the nearer end so both endpoints are exact.
    pub fn angle(&self, s: f64, duration: f64) -> f64 {
        let half = 0.5 * duration;
        if s <= 0.5 * half {
            self.raw_angle(s, duration)
        } else {
            FRAC_PI_2 - self.raw_angle(half - s, duration)
        }
    }

    /// `(sin 2φ(s), cos 2φ(s))` with exact zeros at `s = 0` and `s = T/2`.
    pub fn drive_shape(&self, s: f64, duration: f64) -> (f64, f64) {
        let half = 0.5 * duration;
        if s <= 0.5 * half {
            (2.0 * self.raw_angle(s, duration)).sin_cos()
        } else {
            let (sin, cos) = (2.0 * self.raw_angle(half - s, duration)).sin_cos();
            (sin, -cos)
        }
    }

    /// `dφ/ds`.
    pub fn rate(&self, s: f64, duration: f64) -> f64 {
        let harmonics: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let w = 4.0 * PI * (k + 1) as f64 / duration;
                c * w * (w * s).cos()
            })
            .sum();
        PI / duration + harmonics
    }

    /// Whether `0 ≤ φ(s) ≤ π/2` on a fine grid, i.e. Ω(t) ≥ 0 throughout.
    pub fn is_feasible(&self, duration: f64) -> bool {
        const GRID: usize = 1024;
        let half = 0.5 * duration;
        (0..=GRID).all(|k| {
            let phi = self.angle(half * k as f64 / GRID as f64, duration);
            (-1e-12..=FRAC_PI_2 + 1e-12).contains(&phi)
        })
    }
}

/// Counterdiabatic single-loop protocol: sinusoidal Ω/Δ per half with the
/// second half repeating the first, segment phases `γ₁`, `γ₂`, and a spin echo at `T/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaSchedule {
    gate: GateSpec,
    omega_a: f64,
    duration: f64,
    gamma1: f64,
    gamma2: f64,
    profile: MixingProfile,
}

impl StaSchedule {
    /// Baseline schedule with the default split `γ₁ = 0`, `γ₂ = γ`.
    pub fn new(gate: GateSpec, omega_a: f64, duration: f64) -> Result<Self> {
        Self::with_phases(gate, omega_a, duration, 0.0, gate.gamma())
    }

    pub fn with_phases(
        gate: GateSpec,
        omega_a: f64,
        duration: f64,
        gamma1: f64,
        gamma2: f64,
    ) -> Result<Self> {
        if !(omega_a > 0.0 && omega_a.is_finite()) {
            return Err(Error::invalid("omega_a must be positive"));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::invalid("duration must be positive"));
        }
        check_phases(&gate, gamma1, gamma2)?;
        Ok(StaSchedule {
            gate,
            omega_a,
            duration,
            gamma1,
            gamma2,
            profile: MixingProfile::baseline(),
        })
    }

    /// Schedule on axis `(θ, φ_rel)` with explicit segment phases; the gate's γ
    /// is inferred as `γ₂ − γ₁` reduced into `(−2π, 2π)`.
    pub fn from_segment_phases(
        theta: f64,
        phi_rel: f64,
        omega_a: f64,
        duration: f64,
        gamma1: f64,
        gamma2: f64,
    ) -> Result<Self> {
        let gamma = (gamma2 - gamma1) % (2.0 * PI);
        let gate = GateSpec::new(theta, phi_rel, gamma)?;
        Self::with_phases(gate, omega_a, duration, gamma1, gamma2)
    }

    pub fn with_profile(mut self, profile: MixingProfile) -> Result<Self> {
        if !profile.is_feasible(self.duration) {
            return Err(Error::invalid(
                "mixing profile leaves [0, pi/2] (negative Rabi frequency)",
            ));
        }
        self.profile = profile;
        Ok(self)
    }

    pub fn omega_a(&self) -> f64 {
        self.omega_a
    }

    pub fn profile(&self) -> &MixingProfile {
        &self.profile
    }

    fn split(&self, t: f64) -> (Segment, f64) {
        match Segment::at(t, self.duration) {
            Segment::FirstHalf => (Segment::FirstHalf, t),
            Segment::SecondHalf => (Segment::SecondHalf, t - 0.5 * self.duration),
        }
    }

    /// Branch-continuous mixing angle of the followed eigenstate: `φ(t)` on
    /// the first half and `π/2 + φ(t − T/2)` on the second, ending at π
    /// (the same ray as 0, so the followed state closes on |b⟩).
    pub fn mixing_angle_at(&self, t: f64) -> Result<f64> {
        check_time(t, self.duration)?;
        let (segment, s) = self.split(t);
        let phi = self.profile.angle(s, self.duration);
        Ok(match segment {
            Segment::FirstHalf => phi,
            Segment::SecondHalf => FRAC_PI_2 + phi,
        })
    }
}

impl ControlSchedule for StaSchedule {
    fn scheme(&self) -> Option<Scheme> {
        Some(if self.profile.is_baseline() {
            Scheme::StaBaseline
        } else {
            Scheme::StaOptimized
        })
    }

    fn gate(&self) -> &GateSpec {
        &self.gate
    }

    fn duration(&self) -> f64 {
        self.duration
    }

    fn segment_phases(&self) -> (f64, f64) {
        (self.gamma1, self.gamma2)
    }

    fn drive_at(&self, t: f64, err: &ErrorModel) -> Result<DriveSample> {
        check_time(t, self.duration)?;
        let (segment, s) = self.split(t);
        let (sin2, cos2) = self.profile.drive_shape(s, self.duration);
        let (phi1, echo_phase) = match segment {
            Segment::FirstHalf => (self.gamma1, 0.0),
            Segment::SecondHalf => (self.gamma2, ECHO_PHASE),
        };
        Ok(DriveSample {
            t,
            omega: err.omega_scale() * self.omega_a * sin2,
            delta: self.omega_a * cos2,
            phi1,
            echo_phase,
            mixing_rate: err.rate_scale() * self.profile.rate(s, self.duration),
            segment,
        })
    }

    fn hamiltonian_kind(&self) -> HamiltonianKind {
        HamiltonianKind::Sta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::default_omega_a;
    use approx::assert_abs_diff_eq;

    fn schedule(gamma1: f64, gamma2: f64) -> StaSchedule {
        StaSchedule::from_segment_phases(0.7, 0.3, default_omega_a(), 0.5e-6, gamma1, gamma2)
            .unwrap()
    }

    #[test]
    fn drive_examples() {
        let s = schedule(0.4, 1.1);
        let oa = s.omega_a();
        let t = s.duration();
        let none = ErrorModel::none();

        let d0 = s.drive_at(0.0, &none).unwrap();
        assert_eq!(d0.omega, 0.0);
        assert_abs_diff_eq!(d0.delta, oa, epsilon = 1e-9);
        assert_eq!(d0.phi1, 0.4);
        assert_eq!(d0.segment, Segment::FirstHalf);

        let dq = s.drive_at(0.25 * t, &none).unwrap();
        assert_abs_diff_eq!(dq.omega, oa, epsilon = 1e-6);
        assert_abs_diff_eq!(dq.delta, 0.0, epsilon = 1e-6);

        let err = ErrorModel::new(0.1).unwrap();
        let d3 = s.drive_at(0.75 * t, &err).unwrap();
        assert_abs_diff_eq!(d3.omega, 1.1 * oa, epsilon = 1e-6);
        assert_abs_diff_eq!(d3.delta, 0.0, epsilon = 1e-6);
        assert_eq!(d3.phi1, 1.1);
        assert_eq!(d3.segment, Segment::SecondHalf);
        assert_eq!(d3.echo_phase, ECHO_PHASE);
    }

    #[test]
    fn closed_form_schedule_matches_sinusoids() {
        // Ω = Ωa|sin(2πt/T)|, Δ = ±Ωa cos(2πt/T) with the sign flip after T/2.
        let s = schedule(0.0, 1.0);
        let (oa, t) = (s.omega_a(), s.duration());
        for k in 0..=400 {
            let tk = t * k as f64 / 400.0;
            let d = s.drive_at(tk, &ErrorModel::none()).unwrap();
            let arg = 2.0 * PI * tk / t;
            let sign = if tk <= 0.5 * t { 1.0 } else { -1.0 };
            assert_abs_diff_eq!(d.omega, oa * arg.sin().abs(), epsilon = 1e-6);
            assert_abs_diff_eq!(d.delta, sign * oa * arg.cos(), epsilon = 1e-6);
            assert_abs_diff_eq!(d.mixing_rate, PI / t, epsilon = 1e-3);
        }
    }

    #[test]
    fn endpoints_are_exact() {
        let s = schedule(0.0, 2.0);
        let none = ErrorModel::none();
        assert_eq!(s.drive_at(0.0, &none).unwrap().omega, 0.0);
        assert_eq!(s.drive_at(s.duration(), &none).unwrap().omega, 0.0);
        assert_eq!(s.drive_at(0.5 * s.duration(), &none).unwrap().omega, 0.0);
        assert_eq!(s.drive_at(0.0, &none).unwrap().delta, s.omega_a());
    }

    #[test]
    fn out_of_range_times() {
        let s = schedule(0.0, 1.0);
        let none = ErrorModel::none();
        assert!(matches!(
            s.drive_at(-1e-12, &none),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            s.drive_at(s.duration() * 1.0001, &none),
            Err(Error::OutOfRange { .. })
        ));
        assert!(s.mixing_angle_at(f64::NAN).is_err());
    }

    #[test]
    fn mixing_angle_examples() {
        let s = schedule(0.0, 1.0);
        let t = s.duration();
        assert_eq!(s.mixing_angle_at(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            s.mixing_angle_at(0.5 * t).unwrap(),
            FRAC_PI_2,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            s.mixing_angle_at(0.25 * t).unwrap(),
            PI / 4.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(s.mixing_angle_at(t).unwrap(), PI, epsilon = 1e-12);
    }

    #[test]
    fn mixing_angle_solves_tan_relation() {
        // independent route: φ = ½ atan2(Ω, Δ) on the first half, shifted by π/2 on the second
        let s = schedule(0.0, 1.0);
        let t = s.duration();
        for k in 0..=200 {
            let tk = t * k as f64 / 200.0;
            let d = s.drive_at(tk, &ErrorModel::none()).unwrap();
            let mut expected = 0.5 * d.omega.atan2(d.delta);
            if d.segment == Segment::SecondHalf {
                expected += FRAC_PI_2;
            }
            assert_abs_diff_eq!(s.mixing_angle_at(tk).unwrap(), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn profile_preserves_boundary_constraints() {
        let p = MixingProfile::new(vec![0.05, -0.02, 0.01]).unwrap();
        let t = 0.5e-6;
        assert_eq!(p.angle(0.0, t), 0.0);
        assert_abs_diff_eq!(p.angle(0.5 * t, t), FRAC_PI_2, epsilon = 1e-15);
        for k in 0..=50 {
            let s = 0.5 * t * k as f64 / 50.0;
            assert_abs_diff_eq!(
                p.angle(s, t) + p.angle(0.5 * t - s, t),
                FRAC_PI_2,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn profile_rate_matches_finite_difference() {
        let p = MixingProfile::new(vec![0.05, -0.02]).unwrap();
        let t = 0.5e-6;
        let h = 1e-13;
        for k in 1..50 {
            let s = 0.5 * t * k as f64 / 50.0;
            let fd = (p.angle(s + h, t) - p.angle(s - h, t)) / (2.0 * h);
            assert_abs_diff_eq!(p.rate(s, t), fd, epsilon = 1e-6 * PI / t);
        }
    }

    #[test]
    fn infeasible_profile_rejected() {
        let s = schedule(0.0, 1.0);
        for c in [-0.5, 2.0] {
            let bad = MixingProfile::new(vec![c]).unwrap();
            assert!(s.clone().with_profile(bad).is_err());
        }
        assert!(MixingProfile::new(vec![0.0; 9]).is_err());
    }

    #[test]
    fn phase_relation_enforced() {
        let g = GateSpec::new(1.0, 0.0, PI / 2.0).unwrap();
        assert!(StaSchedule::with_phases(g, 1e7, 1e-6, 0.0, PI / 2.0).is_ok());
        assert!(StaSchedule::with_phases(g, 1e7, 1e-6, PI / 2.0, 0.0).is_err());
        assert!(StaSchedule::with_phases(g, -1.0, 1e-6, 0.0, PI / 2.0).is_err());
        let s = StaSchedule::new(g, 1e7, 1e-6).unwrap();
        assert_eq!(s.segment_phases(), (0.0, PI / 2.0));
    }
}
