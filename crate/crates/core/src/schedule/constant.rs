use super::{check_time, ControlSchedule, DriveSample, ErrorModel, GateSpec, Scheme, Segment};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianKind;

/// Time-independent drive held for a fixed duration. With `omega = delta = 0`
/// it is free evolution, which is how relaxation is probed.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantDrive {
    gate: GateSpec,
    duration: f64,
    omega: f64,
    delta: f64,
    coupling_phase: f64,
}

impl ConstantDrive {
    pub fn new(
        gate: GateSpec,
        duration: f64,
        omega: f64,
        delta: f64,
        coupling_phase: f64,
    ) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::invalid("duration must be positive"));
        }
        if !(omega >= 0.0 && omega.is_finite() && delta.is_finite()) {
            return Err(Error::invalid("drive must be finite with omega >= 0"));
        }
        Ok(ConstantDrive {
            gate,
            duration,
            omega,
            delta,
            coupling_phase,
        })
    }

    pub fn idle(duration: f64) -> Result<Self> {
        let gate = GateSpec::new(0.0, 0.0, 0.0)?;
        Self::new(gate, duration, 0.0, 0.0, 0.0)
    }
}

impl ControlSchedule for ConstantDrive {
    fn scheme(&self) -> Option<Scheme> {
        None
    }

    fn gate(&self) -> &GateSpec {
        &self.gate
    }

    /// The drive's bright state is the gate's own `(θ, φ_rel)`; no frame shift applies.
    fn bright_frame(&self) -> GateSpec {
        self.gate
    }

    fn duration(&self) -> f64 {
        self.duration
    }

    fn segment_phases(&self) -> (f64, f64) {
        (self.coupling_phase, self.coupling_phase)
    }

    fn drive_at(&self, t: f64, err: &ErrorModel) -> Result<DriveSample> {
        check_time(t, self.duration)?;
        Ok(DriveSample {
            t,
            omega: err.omega_scale() * self.omega,
            delta: self.delta,
            phi1: self.coupling_phase,
            echo_phase: 0.0,
            mixing_rate: 0.0,
            segment: Segment::at(t, self.duration),
        })
    }

    fn hamiltonian_kind(&self) -> HamiltonianKind {
        HamiltonianKind::Bare
    }
}
