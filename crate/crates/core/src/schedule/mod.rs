//! Time-domain control protocols.
//!
//! Every protocol implements [`ControlSchedule`]: a pure function from time
//! (and an amplitude error) to a [`DriveSample`] in the rotating frame of the
//! |b⟩–|e⟩ transition. Protocols are selected by name through
//! [`registry::SchemeRegistry`].
//!
//! Conventions shared by all protocols (fixed against the noiseless
//! propagator, see `tests/conventions.rs`):
//!
//! * the drive's bright state uses the azimuth `φ_rel + π` of the target
//!   [`GateSpec`] ([`GateSpec::bright_frame`]);
//! * the programmed segment phases satisfy `γ₁ − γ₂ = −γ` (default `γ₁ = 0`, `γ₂ = γ`);
//! * the coupling picks up a spin-echo phase jump of π at `T/2`.
//!
//! With these, the cyclic evolution realizes the holonomy matrix of
//! [`crate::holonomy::holonomy_matrix`] exactly.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianKind;

mod constant;
mod nhqc;
pub mod registry;
mod sta;
mod tones;

pub use constant::ConstantDrive;
pub use nhqc::{NhqcSchedule, NHQC_ECHO_PHASE};
pub use sta::{MixingProfile, StaSchedule};
pub use tones::{export_pulses, raw_tone_params, ToneParams, PULSE_CSV_HEADER};

/// Ωₐ/2π of the demonstrated schedule, in Hz.
pub const DEFAULT_OMEGA_A_HZ: f64 = 2.0e6;
/// Gate duration used when none is configured, in seconds.
pub const DEFAULT_DURATION_S: f64 = 0.5e-6;
/// Phase jump of the |b⟩–|e⟩ coupling at mid-gate (spin echo).
pub const ECHO_PHASE: f64 = PI;

pub fn default_omega_a() -> f64 {
    2.0 * PI * DEFAULT_OMEGA_A_HZ
}

/// Target holonomy parameters `(θ, φ_rel, γ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    theta: f64,
    phi_rel: f64,
    gamma: f64,
}

impl GateSpec {
    /// `θ ∈ [0, π]`, `φ_rel ∈ [0, 2π)`, `γ ∈ (−2π, 2π)`.
    pub fn new(theta: f64, phi_rel: f64, gamma: f64) -> Result<Self> {
        const EPS: f64 = 1e-12;
        if !(theta.is_finite() && phi_rel.is_finite() && gamma.is_finite()) {
            return Err(Error::invalid("gate parameters must be finite"));
        }
        if !(-EPS..=PI + EPS).contains(&theta) {
            return Err(Error::invalid(format!("theta {theta} outside [0, pi]")));
        }
        if !(-EPS..2.0 * PI).contains(&phi_rel) {
            return Err(Error::invalid(format!(
                "phi_rel {phi_rel} outside [0, 2pi)"
            )));
        }
        if gamma.abs() >= 2.0 * PI {
            return Err(Error::invalid(format!("gamma {gamma} outside (-2pi, 2pi)")));
        }
        Ok(GateSpec {
            theta: theta.clamp(0.0, PI),
            phi_rel: phi_rel.max(0.0),
            gamma,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi_rel(&self) -> f64 {
        self.phi_rel
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `n = (sinθ cosφ, sinθ sinφ, cosθ)`.
    pub fn axis(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi_rel.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// The triple the drive actually programs: bright-state azimuth shifted by
    /// π and the phase sign reversed. In this frame the realized gate reads
    /// `|d⟩⟨d| + e^{−iγ}|b⟩⟨b|` with `(b, d)` from
    /// [`crate::hamiltonian::bright_dark_pair`].
    pub fn bright_frame(&self) -> GateSpec {
        GateSpec {
            theta: self.theta,
            phi_rel: (self.phi_rel + PI).rem_euclid(2.0 * PI),
            gamma: -self.gamma,
        }
    }
}

/// Where a multiplicative amplitude error is applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorTarget {
    /// Scales the bare Rabi drive and the counterdiabatic term together.
    #[default]
    TotalDrive,
    /// Scales only the bare Rabi drive Ω.
    BareOnly,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    alpha_rabi: f64,
    target: ErrorTarget,
}

impl ErrorModel {
    pub fn new(alpha_rabi: f64) -> Result<Self> {
        Self::with_target(alpha_rabi, ErrorTarget::TotalDrive)
    }

    pub fn with_target(alpha_rabi: f64, target: ErrorTarget) -> Result<Self> {
        if alpha_rabi.is_nan() || alpha_rabi.abs() >= 1.0 {
            return Err(Error::invalid(format!(
                "|alpha| = {alpha_rabi} must be < 1"
            )));
        }
        Ok(ErrorModel { alpha_rabi, target })
    }

    pub fn none() -> Self {
        ErrorModel::default()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_rabi
    }

    pub fn target(&self) -> ErrorTarget {
        self.target
    }

    pub(crate) fn omega_scale(&self) -> f64 {
        1.0 + self.alpha_rabi
    }

    pub(crate) fn rate_scale(&self) -> f64 {
        match self.target {
            ErrorTarget::TotalDrive => 1.0 + self.alpha_rabi,
            ErrorTarget::BareOnly => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    FirstHalf,
    SecondHalf,
}

impl Segment {
    /// `t ≤ T/2` belongs to the first half.
    pub fn at(t: f64, duration: f64) -> Self {
        if t <= 0.5 * duration {
            Segment::FirstHalf
        } else {
            Segment::SecondHalf
        }
    }
}

/// Drive parameters at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSample {
    pub t: f64,
    /// Total Rabi frequency Ω(t) ≥ 0, rad/s.
    pub omega: f64,
    /// Detuning Δ(t), rad/s.
    pub delta: f64,
    /// Programmed segment phase φ₁(t).
    pub phi1: f64,
    /// Spin-echo phase added to the coupling (0 or π).
    pub echo_phase: f64,
    /// Counterdiabatic rate φ̇_mix(t), rad/s.
    pub mixing_rate: f64,
    pub segment: Segment,
}

impl DriveSample {
    /// Phase of the |b⟩⟨e| coupling: `φ₁ + echo`.
    pub fn coupling_phase(&self) -> f64 {
        self.phi1 + self.echo_phase
    }
}

/// The family of interchangeable control protocols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "sta")]
    StaBaseline,
    #[serde(rename = "nhqc")]
    Nhqc,
    #[serde(rename = "sta-optimized")]
    StaOptimized,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::StaBaseline, Scheme::Nhqc, Scheme::StaOptimized];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::StaBaseline => "sta",
            Scheme::Nhqc => "nhqc",
            Scheme::StaOptimized => "sta-optimized",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::NotFound {
                kind: "scheme",
                name: s.to_string(),
            })
    }
}

/// A cyclic single-loop control protocol of duration `T`.
pub trait ControlSchedule: Send + Sync + fmt::Debug {
    /// Protocol family; `None` for auxiliary drives such as [`ConstantDrive`].
    fn scheme(&self) -> Option<Scheme>;

    /// Target gate in holonomy-matrix convention.
    fn gate(&self) -> &GateSpec;

    /// Bright-state parameters the drive programs (see [`GateSpec::bright_frame`]).
    fn bright_frame(&self) -> GateSpec {
        self.gate().bright_frame()
    }

    fn duration(&self) -> f64;

    /// `(γ₁, γ₂)`.
    fn segment_phases(&self) -> (f64, f64);

    fn drive_at(&self, t: f64, err: &ErrorModel) -> Result<DriveSample>;

    /// Hamiltonian the protocol is designed for.
    fn hamiltonian_kind(&self) -> HamiltonianKind;
}

pub(crate) fn check_time(t: f64, duration: f64) -> Result<()> {
    if t.is_finite() && (0.0..=duration).contains(&t) {
        Ok(())
    } else {
        Err(Error::OutOfRange { t, duration })
    }
}

pub(crate) fn check_phases(gate: &GateSpec, gamma1: f64, gamma2: f64) -> Result<()> {
    let mismatch = crate::linalg::wrap_angle(gamma1 - gamma2 + gate.gamma());
    if mismatch.abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "segment phases ({gamma1}, {gamma2}) do not satisfy gamma1 - gamma2 = -gamma (mod 2pi) for gamma = {}",
            gate.gamma()
        )));
    }
    Ok(())
}
