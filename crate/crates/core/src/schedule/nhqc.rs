use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{
    check_phases, check_time, ControlSchedule, DriveSample, ErrorModel, GateSpec, Scheme, Segment,
};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianKind;

/// Coupling phase jump between the two resonant π pulses. Recovered by
/// [`crate::bench::calibrate_echo_phase`] against the noiseless propagator.
pub const NHQC_ECHO_PHASE: f64 = PI;

/// Resonant two-pulse holonomic protocol: each half is a sin²-shaped π pulse
/// on the |b⟩–|e⟩ transition, with a phase jump between them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NhqcSchedule {
    gate: GateSpec,
    duration: f64,
    gamma1: f64,
    gamma2: f64,
    echo_phase: f64,
}

impl NhqcSchedule {
    pub fn new(gate: GateSpec, duration: f64) -> Result<Self> {
        Self::with_phases(gate, duration, 0.0, gate.gamma())
    }

    pub fn with_phases(gate: GateSpec, duration: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::invalid("duration must be positive"));
        }
        check_phases(&gate, gamma1, gamma2)?;
        Ok(NhqcSchedule {
            gate,
            duration,
            gamma1,
            gamma2,
            echo_phase: NHQC_ECHO_PHASE,
        })
    }

    /// Overrides the mid-gate phase jump (used by calibration).
    pub fn with_echo_phase(mut self, echo_phase: f64) -> Self {
        self.echo_phase = echo_phase;
        self
    }

    pub fn echo_phase(&self) -> f64 {
        self.echo_phase
    }

    /// `Ω_env(t) = (4π/T) sin²(2πt/T)`; each half integrates to π.
    pub fn envelope(&self, t: f64) -> f64 {
        let s = (2.0 * PI * t / self.duration).sin();
        4.0 * PI / self.duration * s * s
    }
}

impl ControlSchedule for NhqcSchedule {
    fn scheme(&self) -> Option<Scheme> {
        Some(Scheme::Nhqc)
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
        let segment = Segment::at(t, self.duration);
        let (phi1, echo_phase) = match segment {
            Segment::FirstHalf => (self.gamma1, 0.0),
            Segment::SecondHalf => (self.gamma2, self.echo_phase),
        };
        Ok(DriveSample {
            t,
            omega: err.omega_scale() * self.envelope(t),
            delta: 0.0,
            phi1,
            echo_phase,
            mixing_rate: 0.0,
            segment,
        })
    }

    fn hamiltonian_kind(&self) -> HamiltonianKind {
        HamiltonianKind::Bare
    }
}
