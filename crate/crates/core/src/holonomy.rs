//! Closed-form holonomies, the named gate table, qubit-gate extraction from
//! simulated propagators, and numeric geometric/dynamical phases.
//!
//! Sign convention: along the followed eigenstate of an STA loop with
//! segment phases `γ₁`, `γ₂`, the discrete loop phase equals `σ(γ₁ − γ₂)`
//! with `σ = −1` (mod 2π). With the default split `γ₁ = 0`, `γ₂ = γ` this is
//! the γ of the target [`GateSpec`].

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{bright_dark_pair, eigensystem_at, HamiltonianKind};
use crate::linalg::{global_phase_align, wrap_angle, CMatrix, StateVector, C64, ZERO};
use crate::propagator::evolve_unitary;
use crate::schedule::{ControlSchedule, ErrorModel, GateSpec, Segment, StaSchedule};

/// Leakage above which the projected block is not unitarized.
pub const LEAKAGE_LIMIT: f64 = 1e-3;
/// Minimal eigenstate overlap between adjacent samples of the followed branch.
pub const BRANCH_OVERLAP_MIN: f64 = 0.9;
pub const MIN_PHASE_STEPS: usize = 1000;

/// The geometric phase equals `PHASE_SIGN · (γ₁ − γ₂)` (mod 2π).
pub const PHASE_SIGN: f64 = -1.0;

/// ```text
/// e^{iγ/2} [ c − i s cosθ        −i s sinθ e^{iφ} ]
///          [ −i s sinθ e^{−iφ}    c + i s cosθ    ]
/// ```
/// with `c = cos(γ/2)`, `s = sin(γ/2)`.
pub fn holonomy_matrix(g: &GateSpec) -> CMatrix {
    let (s, c) = (0.5 * g.gamma()).sin_cos();
    let (st, ct) = g.theta().sin_cos();
    let i = C64::i();
    let e_phi = C64::from_polar(1.0, g.phi_rel());
    let pre = C64::from_polar(1.0, 0.5 * g.gamma());
    let m = [
        C64::new(c, 0.0) - i * s * ct,
        -i * s * st * e_phi,
        -i * s * st * e_phi.conj(),
        C64::new(c, 0.0) + i * s * ct,
    ];
    CMatrix::from_row_slice(2, &m.map(|z| pre * z)).expect("2x2")
}

/// Gates demonstrated with the protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NamedGate {
    I,
    Z,
    X,
    H,
    #[serde(rename = "Xhalf")]
    XHalf,
}

impl NamedGate {
    pub const ALL: [NamedGate; 5] = [
        NamedGate::I,
        NamedGate::Z,
        NamedGate::X,
        NamedGate::H,
        NamedGate::XHalf,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NamedGate::I => "I",
            NamedGate::Z => "Z",
            NamedGate::X => "X",
            NamedGate::H => "H",
            NamedGate::XHalf => "Xhalf",
        }
    }

    pub fn spec(&self) -> GateSpec {
        let (theta, phi, gamma) = match self {
            NamedGate::I => (0.0, 0.0, 0.0),
            NamedGate::Z => (PI, 0.0, PI),
            NamedGate::X => (FRAC_PI_2, 0.0, PI),
            NamedGate::H => (FRAC_PI_4, 0.0, PI),
            NamedGate::XHalf => (FRAC_PI_2, 0.0, FRAC_PI_2),
        };
        GateSpec::new(theta, phi, gamma).expect("table entries are in range")
    }
}

impl fmt::Display for NamedGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NamedGate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NamedGate::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::NotFound {
                kind: "gate",
                name: s.to_string(),
            })
    }
}

/// `(θ, φ, γ)` of a named gate.
pub fn named_gate(name: &str) -> Result<GateSpec> {
    Ok(name.parse::<NamedGate>()?.spec())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedGate {
    pub qubit_unitary: CMatrix,
    /// `1 − σ_min²` of the computational block.
    pub leakage: f64,
    pub global_phase_removed: bool,
}

/// Projects a qutrit propagator onto `{|0⟩, |1⟩}` and unitarizes the block by
/// polar decomposition. With `reference`, the global phase is aligned to it.
pub fn extract_qubit_gate(u3: &CMatrix, reference: Option<&CMatrix>) -> Result<ExtractedGate> {
    if u3.dim() != 3 {
        return Err(Error::invalid("expected a 3x3 propagator"));
    }
    if !u3.is_unitary(1e-8) {
        return Err(Error::invalid(format!(
            "propagator not unitary (defect {:e})",
            u3.unitarity_defect()
        )));
    }
    let block = u3.leading_block(2)?;
    let svd = block.matrix().clone().svd(true, true);
    let sigma_min = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let leakage = (1.0 - sigma_min * sigma_min).clamp(0.0, 1.0);
    if leakage >= LEAKAGE_LIMIT {
        return Err(Error::HighLeakage {
            leakage,
            block: Box::new(block),
        });
    }
    let (w, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut qubit_unitary = CMatrix::from_matrix(w * vt)?;
    if let Some(r) = reference {
        qubit_unitary = global_phase_align(&qubit_unitary, r)?;
    }
    Ok(ExtractedGate {
        qubit_unitary,
        leakage,
        global_phase_removed: reference.is_some(),
    })
}

/// Followed eigenstate at `t`: `E₋` on the first half, `E₊` on the second.
fn followed_state(schedule: &StaSchedule, t: f64) -> Result<(StateVector, f64)> {
    let d = schedule.drive_at(t, &ErrorModel::none())?;
    let frame = eigensystem_at(&schedule.bright_frame(), &d)?;
    Ok(match d.segment {
        Segment::FirstHalf => (frame.e_minus, frame.eigenvalue_minus),
        Segment::SecondHalf => (frame.e_plus, frame.eigenvalue_plus),
    })
}

fn check_phase_steps(n_steps: usize) -> Result<usize> {
    if n_steps < MIN_PHASE_STEPS {
        return Err(Error::invalid(format!(
            "phase computation needs n_steps >= {MIN_PHASE_STEPS}"
        )));
    }
    Ok(n_steps + n_steps % 2)
}

/// Discrete loop phase `−Σ_k arg⟨E(t_k)|E(t_{k+1})⟩` along the followed
/// branch, closed back onto `E(0)`. Each term lies in `(−π, π]`; the total is
/// gauge-invariant mod 2π.
pub fn geometric_phase_numeric(schedule: &StaSchedule, n_steps: usize) -> Result<f64> {
    let n = check_phase_steps(n_steps)?;
    let duration = schedule.duration();
    let time = |k: usize| {
        if k == n {
            duration
        } else {
            duration * k as f64 / n as f64
        }
    };
    let first = followed_state(schedule, 0.0)?.0;
    let mut prev = first.clone();
    let mut phase = 0.0;
    for k in 1..=n {
        let t = time(k);
        let (next, _) = followed_state(schedule, t)?;
        let overlap = prev.inner(&next);
        if overlap.norm() < BRANCH_OVERLAP_MIN {
            return Err(Error::BranchLost {
                t,
                overlap: overlap.norm(),
            });
        }
        phase -= overlap.arg();
        prev = next;
    }
    let closing = prev.inner(&first);
    if closing.norm() < BRANCH_OVERLAP_MIN {
        return Err(Error::BranchLost {
            t: duration,
            overlap: closing.norm(),
        });
    }
    Ok(phase - closing.arg())
}

/// `∫ E_k(t) dt` of the followed branch over one half (composite Simpson).
pub fn dynamical_phase_segment(
    schedule: &StaSchedule,
    segment: Segment,
    n_steps: usize,
) -> Result<f64> {
    let n = check_phase_steps(n_steps)?;
    let half = 0.5 * schedule.duration();
    let (start, branch_minus) = match segment {
        Segment::FirstHalf => (0.0, true),
        Segment::SecondHalf => (half, false),
    };
    let energy = |t: f64| -> Result<f64> {
        let d = schedule.drive_at(t, &ErrorModel::none())?;
        let f = eigensystem_at(&schedule.bright_frame(), &d)?;
        Ok(if branch_minus {
            f.eigenvalue_minus
        } else {
            f.eigenvalue_plus
        })
    };
    // Sample the second half strictly inside so the branch at t = T/2 is not
    // taken from the first-half convention.
    let h = half / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let mut t = start + k as f64 * h;
        if k == 0 && !branch_minus {
            t += 1e-9 * h;
        }
        if k == n {
            t = start + half;
        }
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * energy(t)?;
    }
    Ok(acc * h / 3.0)
}

/// `∫₀ᵀ E(t) dt` along the followed branch.
pub fn dynamical_phase_numeric(schedule: &StaSchedule, n_steps: usize) -> Result<f64> {
    Ok(
        dynamical_phase_segment(schedule, Segment::FirstHalf, n_steps)?
            + dynamical_phase_segment(schedule, Segment::SecondHalf, n_steps)?,
    )
}

/// Phases of the followed bright state over one loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub geometric: f64,
    /// `∫E dt`; the state acquires `e^{−i∫E dt}` from it.
    pub dynamical: f64,
    /// `arg⟨b|U|b⟩` from the propagator; equals `geometric − dynamical` mod 2π.
    pub total: f64,
}

impl PhaseReport {
    /// `|wrap(total − (geometric − dynamical))|`.
    pub fn closure_defect(&self) -> f64 {
        wrap_angle(self.total - (self.geometric - self.dynamical)).abs()
    }
}

pub fn phase_report(schedule: &StaSchedule, n_steps: usize) -> Result<PhaseReport> {
    let geometric = geometric_phase_numeric(schedule, n_steps)?;
    let dynamical = dynamical_phase_numeric(schedule, n_steps)?;
    let u = evolve_unitary(schedule, HamiltonianKind::Sta, &ErrorModel::none(), n_steps)?;
    let u = u.final_unitary().expect("unitary run");
    let (bright, _) = bright_dark_pair(&schedule.bright_frame());
    let bright = StateVector::new(vec![bright[0], bright[1], ZERO])?;
    let total = bright.inner(&u.apply(&bright)?).arg();
    Ok(PhaseReport {
        geometric,
        dynamical,
        total,
    })
}

/// Qubit-subspace part of the realized gate, `|d⟩⟨d| + e^{−iγ_b}|b⟩⟨b|`, for
/// the schedule's bright frame. Equals [`holonomy_matrix`] of the target gate.
pub fn bright_frame_unitary(bright_frame: &GateSpec) -> CMatrix {
    let (b, d) = bright_dark_pair(bright_frame);
    let phase = C64::from_polar(1.0, -bright_frame.gamma());
    let m = DMatrix::from_fn(2, 2, |i, j| d[i] * d[j].conj() + phase * b[i] * b[j].conj());
    CMatrix::from_matrix(m).expect("2x2")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{average_gate_fidelity, pauli, ONE};
    use approx::assert_abs_diff_eq;

    fn gate(theta: f64, phi: f64, gamma: f64) -> GateSpec {
        GateSpec::new(theta, phi, gamma).unwrap()
    }

    fn aligned(u: &CMatrix, v: &CMatrix) -> f64 {
        global_phase_align(u, v).unwrap().max_abs_diff(v)
    }

    #[test]
    fn table_gates_match_named_matrices() {
        let x = holonomy_matrix(&named_gate("X").unwrap());
        assert!(aligned(&x, &pauli::x()) < 1e-14);
        let h = holonomy_matrix(&named_gate("H").unwrap());
        assert!(aligned(&h, &pauli::hadamard()) < 1e-14);
        let z = holonomy_matrix(&named_gate("Z").unwrap());
        assert!(aligned(&z, &pauli::z().scale(-ONE)) < 1e-14);
        let id = holonomy_matrix(&named_gate("I").unwrap());
        assert!(id.max_abs_diff(&CMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn zero_gamma_is_identity() {
        for (theta, phi) in [(0.3, 1.0), (PI, 5.0), (1.2, 0.0)] {
            let u = holonomy_matrix(&gate(theta, phi, 0.0));
            assert!(u.max_abs_diff(&CMatrix::identity(2)) < 1e-15);
        }
    }

    #[test]
    fn determinant_is_phase() {
        let g = gate(0.7, 2.1, -1.3);
        let det = holonomy_matrix(&g).determinant();
        assert!((det - C64::from_polar(1.0, -1.3)).norm() < 1e-14);
    }

    #[test]
    fn named_table() {
        assert_eq!(named_gate("Z").unwrap(), gate(PI, 0.0, PI));
        assert_eq!(
            named_gate("Xhalf").unwrap(),
            gate(FRAC_PI_2, 0.0, FRAC_PI_2)
        );
        assert_eq!(named_gate("I").unwrap(), gate(0.0, 0.0, 0.0));
        assert!(matches!(named_gate("T"), Err(Error::NotFound { .. })));
    }

    #[test]
    fn bright_frame_form_equals_matrix() {
        for g in [
            gate(0.4, 1.0, 2.0),
            gate(2.5, 4.0, -0.7),
            gate(FRAC_PI_2, 0.0, PI),
        ] {
            let u = bright_frame_unitary(&g.bright_frame());
            assert!(u.max_abs_diff(&holonomy_matrix(&g)) < 1e-14);
        }
    }

    #[test]
    fn extraction_of_block_diagonal() {
        let chi = C64::from_polar(1.0, 0.8);
        let u3 = CMatrix::diagonal(&[-ONE, ONE, chi]).unwrap();
        let e = extract_qubit_gate(&u3, Some(&pauli::z())).unwrap();
        assert!(e.leakage < 1e-15);
        assert!(average_gate_fidelity(&e.qubit_unitary, &pauli::z()).unwrap() > 1.0 - 1e-14);
        let id = extract_qubit_gate(&CMatrix::identity(3), None).unwrap();
        assert!(id.qubit_unitary.max_abs_diff(&CMatrix::identity(2)) < 1e-15);
        assert!(!id.global_phase_removed);
    }

    #[test]
    fn extraction_flags_leakage() {
        let (s, c) = 0.1f64.sin_cos();
        let u3 = CMatrix::from_row_slice(
            3,
            &[
                C64::new(c, 0.0),
                ZERO,
                C64::new(-s, 0.0),
                ZERO,
                ONE,
                ZERO,
                C64::new(s, 0.0),
                ZERO,
                C64::new(c, 0.0),
            ],
        )
        .unwrap();
        match extract_qubit_gate(&u3, None) {
            Err(Error::HighLeakage { leakage, block }) => {
                assert_abs_diff_eq!(leakage, s * s, epsilon = 1e-14);
                assert_eq!(block.dim(), 2);
            }
            other => panic!("expected HighLeakage, got {other:?}"),
        }
    }

    fn sta(gamma1: f64, gamma2: f64) -> StaSchedule {
        StaSchedule::from_segment_phases(
            FRAC_PI_2,
            0.0,
            crate::schedule::default_omega_a(),
            0.5e-6,
            gamma1,
            gamma2,
        )
        .unwrap()
    }

    #[test]
    fn geometric_phase_examples() {
        assert_abs_diff_eq!(
            geometric_phase_numeric(&sta(PI, 0.0), 10_000)
                .unwrap()
                .abs(),
            PI,
            epsilon = 1e-3
        );
        assert_abs_diff_eq!(
            geometric_phase_numeric(&sta(0.4, 0.4), 10_000).unwrap(),
            0.0,
            epsilon = 1e-6
        );
        let g = geometric_phase_numeric(&sta(FRAC_PI_2, 0.0), 10_000).unwrap();
        assert_abs_diff_eq!(g, PHASE_SIGN * FRAC_PI_2, epsilon = 1e-3);
    }

    #[test]
    fn dynamical_phase_cancels_between_halves() {
        let s = sta(0.0, PI);
        let scale = s.omega_a() * s.duration();
        let first = dynamical_phase_segment(&s, Segment::FirstHalf, 2000).unwrap();
        let second = dynamical_phase_segment(&s, Segment::SecondHalf, 2000).unwrap();
        assert_abs_diff_eq!(first / (-0.25 * scale), 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(second / (0.25 * scale), 1.0, epsilon = 1e-4);
        assert!(dynamical_phase_numeric(&s, 2000).unwrap().abs() < 1e-6 * scale);
    }

    #[test]
    fn too_few_steps_rejected() {
        assert!(geometric_phase_numeric(&sta(0.0, PI), 500).is_err());
    }
}
