//! Time-ordered evolution under a [`ControlSchedule`].
//!
//! Unitary runs multiply midpoint exponentials `exp(−i H(t_k + dt/2) dt)`.
//! Lindblad runs use the same coherent step, symmetrically split with the
//! exact exponential of the (time-independent) dissipator:
//! `e^{𝒟dt/2} ∘ 𝒰_k ∘ e^{𝒟dt/2}`. The step count is forced even so that the
//! mid-gate phase jump falls on a step boundary.

use std::io::Write;

use nalgebra::{DMatrix, Matrix3, SMatrix, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{bright_vector, hamiltonian3, HamiltonianKind};
use crate::linalg::{herm_exp, CMatrix, DensityMatrix, StateVector, C64, ONE};
use crate::schedule::{ControlSchedule, ErrorModel};

pub const DEFAULT_STEPS: usize = 10_000;
pub const MIN_STEPS: usize = 100;

/// Trace drift tolerated over a full noisy run.
const TRACE_TOL: f64 = 1e-8;
/// Most negative eigenvalue tolerated in a propagated density matrix.
const PSD_TOL: f64 = 1e-7;

/// Amplitude damping and pure dephasing of the two excited levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    t1_e: f64,
    t1_f: f64,
    t2_ge: f64,
    t2_ef: f64,
    enabled: bool,
}

impl NoiseModel {
    pub const DEVICE_T1_E: f64 = 29e-6;
    pub const DEVICE_T1_F: f64 = 9e-6;
    pub const DEVICE_T2_GE: f64 = 5.9e-6;
    pub const DEVICE_T2_EF: f64 = 5.8e-6;

    /// Times in seconds; `f64::INFINITY` switches a channel off.
    pub fn new(t1_e: f64, t1_f: f64, t2_ge: f64, t2_ef: f64) -> Result<Self> {
        for (name, t) in [
            ("t1_e", t1_e),
            ("t1_f", t1_f),
            ("t2_ge", t2_ge),
            ("t2_ef", t2_ef),
        ] {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::InvalidNoiseModel(format!(
                    "{name} = {t} must be > 0"
                )));
            }
        }
        let raw = 1.0 / t2_ge - 0.5 / t1_e;
        if raw < -1e-12 * (1.0 / t2_ge) {
            return Err(Error::InvalidNoiseModel(format!(
                "t2_ge = {t2_ge:e} exceeds 2*t1_e = {:e}; pure dephasing rate would be negative",
                2.0 * t1_e
            )));
        }
        Ok(NoiseModel {
            t1_e,
            t1_f,
            t2_ge,
            t2_ef,
            enabled: true,
        })
    }

    /// Coherence times of the demonstrated device.
    pub fn device() -> Self {
        NoiseModel::new(
            Self::DEVICE_T1_E,
            Self::DEVICE_T1_F,
            Self::DEVICE_T2_GE,
            Self::DEVICE_T2_EF,
        )
        .expect("device parameters are consistent")
    }

    pub fn with_enabled(mut self, enabled: bool) -> Self {
        self.enabled = enabled;
        self
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn t1_e(&self) -> f64 {
        self.t1_e
    }

    pub fn t1_f(&self) -> f64 {
        self.t1_f
    }

    pub fn t2_ge(&self) -> f64 {
        self.t2_ge
    }

    pub fn t2_ef(&self) -> f64 {
        self.t2_ef
    }

    /// `(γ_φe, γ_φf)` with `γ_φe = 1/T₂ᵍᵉ − 1/2T₁ᵉ` and
    /// `γ_φf = max(0, 1/T₂ᵉᶠ − 1/2T₁ᶠ)`.
    pub fn dephasing_rates(&self) -> (f64, f64) {
        let e = (1.0 / self.t2_ge - 0.5 / self.t1_e).max(0.0);
        let f = (1.0 / self.t2_ef - 0.5 / self.t1_f).max(0.0);
        (e, f)
    }

    /// `L₁ = √(1/T₁ᵉ)|0⟩⟨e|`, `L₂ = √(1/T₁ᶠ)|e⟩⟨1|`, `L₃ = √(2γ_φe)|e⟩⟨e|`,
    /// `L₄ = √(2γ_φf)|1⟩⟨1|` in the basis `(|0⟩, |1⟩, |e⟩)`.
    pub fn collapse_operators(&self) -> Vec<CMatrix> {
        self.collapse3().iter().map(to_cmatrix).collect()
    }

    fn collapse3(&self) -> Vec<Matrix3<C64>> {
        let (ge, gf) = self.dephasing_rates();
        let single = |i: usize, j: usize, rate: f64| {
            let mut m = Matrix3::zeros();
            m[(i, j)] = C64::new(rate.sqrt(), 0.0);
            m
        };
        vec![
            single(0, 2, 1.0 / self.t1_e),
            single(2, 1, 1.0 / self.t1_f),
            single(2, 2, 2.0 * ge),
            single(1, 1, 2.0 * gf),
        ]
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::device()
    }
}

/// Populations and qubit coherence at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    /// `(P₀, P₁, P_e)`.
    pub populations: [f64; 3],
    /// `ρ₀₁`.
    pub rho01: C64,
}

impl TrajectoryPoint {
    fn from_state(t: f64, psi: &Vector3<C64>) -> Self {
        TrajectoryPoint {
            t,
            populations: [psi[0].norm_sqr(), psi[1].norm_sqr(), psi[2].norm_sqr()],
            rho01: psi[0] * psi[1].conj(),
        }
    }

    fn from_density(t: f64, rho: &Matrix3<C64>) -> Self {
        TrajectoryPoint {
            t,
            populations: [rho[(0, 0)].re, rho[(1, 1)].re, rho[(2, 2)].re],
            rho01: rho[(0, 1)],
        }
    }
}

pub const TRAJECTORY_CSV_HEADER: &str = "t_s,p0,p1,pe,re_rho01,im_rho01";

pub fn write_trajectory_csv<W: Write>(points: &[TrajectoryPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRAJECTORY_CSV_HEADER.split(','))?;
    for p in points {
        w.write_record(&[
            p.t.to_string(),
            p.populations[0].to_string(),
            p.populations[1].to_string(),
            p.populations[2].to_string(),
            p.rho01.re.to_string(),
            p.rho01.im.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum FinalState {
    Unitary(CMatrix),
    Density(DensityMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationResult {
    pub final_state: FinalState,
    pub trajectory: Vec<TrajectoryPoint>,
    pub steps_used: usize,
    /// Largest `|tr ρ − 1|` seen during a noisy run (0 for unitary runs).
    pub max_trace_error: f64,
}

impl PropagationResult {
    pub fn final_unitary(&self) -> Option<&CMatrix> {
        match &self.final_state {
            FinalState::Unitary(u) => Some(u),
            FinalState::Density(_) => None,
        }
    }

    pub fn final_rho(&self) -> Option<&DensityMatrix> {
        match &self.final_state {
            FinalState::Density(rho) => Some(rho),
            FinalState::Unitary(_) => None,
        }
    }
}

fn to_cmatrix(m: &Matrix3<C64>) -> CMatrix {
    CMatrix::from_matrix(DMatrix::from_iterator(3, 3, m.iter().copied())).expect("3x3")
}

fn to_matrix3(m: &CMatrix) -> Matrix3<C64> {
    Matrix3::from_iterator(m.matrix().iter().copied())
}

fn even_steps(n_steps: usize) -> Result<usize> {
    if n_steps < MIN_STEPS {
        return Err(Error::invalid(format!(
            "n_steps = {n_steps} below minimum {MIN_STEPS}"
        )));
    }
    Ok(n_steps + n_steps % 2)
}

struct Stepper<'a> {
    schedule: &'a dyn ControlSchedule,
    kind: HamiltonianKind,
    err: ErrorModel,
    bright: Vector3<C64>,
    dt: f64,
    n: usize,
}

impl<'a> Stepper<'a> {
    fn new(
        schedule: &'a dyn ControlSchedule,
        kind: HamiltonianKind,
        err: &ErrorModel,
        n_steps: usize,
    ) -> Result<Self> {
        let n = even_steps(n_steps)?;
        let duration = schedule.duration();
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::invalid("schedule duration must be positive"));
        }
        Ok(Stepper {
            schedule,
            kind,
            err: *err,
            bright: bright_vector(&schedule.bright_frame()),
            dt: duration / n as f64,
            n,
        })
    }

    fn time(&self, k: usize) -> f64 {
        if k == self.n {
            self.schedule.duration()
        } else {
            k as f64 * self.dt
        }
    }

    /// Propagator of step `k`, i.e. over `[t_k, t_{k+1}]`.
    fn step(&self, k: usize) -> Result<Matrix3<C64>> {
        let mid = (k as f64 + 0.5) * self.dt;
        let d = self.schedule.drive_at(mid, &self.err)?;
        Ok(herm_exp(hamiltonian3(self.kind, &self.bright, &d), self.dt))
    }
}

fn validate_stride(every: usize) -> Result<()> {
    if every == 0 {
        return Err(Error::invalid("trajectory stride must be >= 1"));
    }
    Ok(())
}

fn unitary_run(
    stepper: &Stepper<'_>,
    trace: Option<(&Vector3<C64>, usize)>,
) -> Result<PropagationResult> {
    let mut u = Matrix3::<C64>::identity();
    let mut trajectory = Vec::new();
    if let Some((psi0, _)) = trace {
        trajectory.push(TrajectoryPoint::from_state(0.0, psi0));
    }
    for k in 0..stepper.n {
        u = stepper.step(k)? * u;
        if let Some((psi0, every)) = trace {
            let done = k + 1;
            if done % every == 0 || done == stepper.n {
                trajectory.push(TrajectoryPoint::from_state(stepper.time(done), &(u * psi0)));
            }
        }
    }
    Ok(PropagationResult {
        final_state: FinalState::Unitary(to_cmatrix(&u)),
        trajectory,
        steps_used: stepper.n,
        max_trace_error: 0.0,
    })
}

/// `𝒯 exp(−i∫H dt)` over the full schedule.
pub fn evolve_unitary(
    schedule: &dyn ControlSchedule,
    kind: HamiltonianKind,
    err: &ErrorModel,
    n_steps: usize,
) -> Result<PropagationResult> {
    unitary_run(&Stepper::new(schedule, kind, err, n_steps)?, None)
}

/// As [`evolve_unitary`], also recording `U(t)|ψ₀⟩` every `every` steps
/// (plus both endpoints).
pub fn evolve_unitary_traced(
    schedule: &dyn ControlSchedule,
    kind: HamiltonianKind,
    err: &ErrorModel,
    n_steps: usize,
    psi0: &StateVector,
    every: usize,
) -> Result<PropagationResult> {
    validate_stride(every)?;
    let psi = qutrit_amplitudes(psi0)?;
    unitary_run(
        &Stepper::new(schedule, kind, err, n_steps)?,
        Some((&psi, every)),
    )
}

fn qutrit_amplitudes(psi: &StateVector) -> Result<Vector3<C64>> {
    let psi = match psi.dim() {
        2 => psi.embed_qutrit()?,
        3 => psi.clone(),
        d => return Err(Error::invalid(format!("state dimension {d} is not 2 or 3"))),
    };
    Ok(Vector3::from_iterator(psi.amplitudes().iter().copied()))
}

type Super9 = SMatrix<C64, 9, 9>;

/// Column-major `vec` convention: `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.
fn superop(a: &Matrix3<C64>, b: &Matrix3<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(9, 9, |r, c| {
        let (ra, rb) = (r % 3, r / 3);
        let (ca, cb) = (c % 3, c / 3);
        b[(cb, rb)] * a[(ra, ca)]
    })
}

/// Matrix of `ρ ↦ Σ_k L ρ L† − ½{L†L, ρ}` acting on `vec(ρ)`.
fn dissipator(ops: &[Matrix3<C64>]) -> DMatrix<C64> {
    let id = Matrix3::<C64>::identity();
    let mut d = DMatrix::zeros(9, 9);
    for l in ops {
        let ll = l.adjoint() * l;
        d += superop(l, &l.adjoint());
        d -= superop(&ll, &id).scale(0.5);
        d -= superop(&id, &ll).scale(0.5);
    }
    d
}

fn half_step_dissipator(noise: &NoiseModel, dt: f64) -> Super9 {
    let d = dissipator(&noise.collapse3()) * C64::new(0.5 * dt, 0.0);
    let e = d.exp();
    Super9::from_iterator(e.iter().copied())
}

fn apply_super(s: &Super9, rho: &Matrix3<C64>) -> Matrix3<C64> {
    let v = SMatrix::<C64, 9, 1>::from_iterator(rho.iter().copied());
    Matrix3::from_iterator((s * v).iter().copied())
}

fn lindblad_run(
    stepper: &Stepper<'_>,
    noise: &NoiseModel,
    rho0: &DensityMatrix,
    every: Option<usize>,
) -> Result<PropagationResult> {
    let rho0 = match rho0.dim() {
        2 => rho0.embed_qutrit()?,
        3 => rho0.clone(),
        d => {
            return Err(Error::invalid(format!(
                "density matrix dimension {d} is not 2 or 3"
            )))
        }
    };
    let half = noise
        .enabled()
        .then(|| half_step_dissipator(noise, stepper.dt));
    let mut rho = to_matrix3(rho0.matrix());
    let mut trajectory = Vec::new();
    if every.is_some() {
        trajectory.push(TrajectoryPoint::from_density(0.0, &rho));
    }
    let mut max_trace_error: f64 = 0.0;
    for k in 0..stepper.n {
        let u = stepper.step(k)?;
        if let Some(h) = &half {
            rho = apply_super(h, &rho);
        }
        rho = u * rho * u.adjoint();
        if let Some(h) = &half {
            rho = apply_super(h, &rho);
        }
        rho = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
        let tr = rho.trace();
        max_trace_error = max_trace_error.max((tr - ONE).norm());
        if let Some(every) = every {
            let done = k + 1;
            if done % every == 0 || done == stepper.n {
                trajectory.push(TrajectoryPoint::from_density(stepper.time(done), &rho));
            }
        }
    }
    if max_trace_error > TRACE_TOL {
        return Err(Error::invalid(format!(
            "trace drifted by {max_trace_error:e} (> {TRACE_TOL:e}); increase n_steps"
        )));
    }
    let rho = DensityMatrix::with_tolerance(to_cmatrix(&rho), 1e-12, TRACE_TOL, PSD_TOL)?;
    Ok(PropagationResult {
        final_state: FinalState::Density(rho),
        trajectory,
        steps_used: stepper.n,
        max_trace_error,
    })
}

/// Master-equation evolution of `ρ₀` (qubit inputs are embedded into the qutrit).
pub fn evolve_lindblad(
    schedule: &dyn ControlSchedule,
    kind: HamiltonianKind,
    err: &ErrorModel,
    noise: &NoiseModel,
    rho0: &DensityMatrix,
    n_steps: usize,
) -> Result<PropagationResult> {
    lindblad_run(
        &Stepper::new(schedule, kind, err, n_steps)?,
        noise,
        rho0,
        None,
    )
}

pub fn evolve_lindblad_traced(
    schedule: &dyn ControlSchedule,
    kind: HamiltonianKind,
    err: &ErrorModel,
    noise: &NoiseModel,
    rho0: &DensityMatrix,
    n_steps: usize,
    every: usize,
) -> Result<PropagationResult> {
    validate_stride(every)?;
    lindblad_run(
        &Stepper::new(schedule, kind, err, n_steps)?,
        noise,
        rho0,
        Some(every),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConvergenceOrder {
    /// Step-halving changes the result only at rounding level.
    Exact,
    Empirical(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_steps: usize,
    /// `‖U_n − U_{2n}‖_max`.
    pub error: f64,
    /// `‖U_{2n} − U_{4n}‖_max`.
    pub refined_error: f64,
    pub order: ConvergenceOrder,
}

impl ConvergenceReport {
    /// Differences below this are treated as rounding noise.
    pub const EXACT_THRESHOLD: f64 = 1e-12;
    pub const MIN_ORDER: f64 = 1.8;

    pub fn passed(&self) -> bool {
        match self.order {
            ConvergenceOrder::Exact => true,
            ConvergenceOrder::Empirical(p) => p >= Self::MIN_ORDER,
        }
    }
}

/// Step-halving study at `n`, `2n` and `4n` steps.
pub fn convergence_check(
    schedule: &dyn ControlSchedule,
    kind: HamiltonianKind,
    err: &ErrorModel,
    n_steps: usize,
) -> Result<ConvergenceReport> {
    if n_steps < 2 * MIN_STEPS {
        return Err(Error::invalid(format!(
            "convergence check needs n_steps >= {}",
            2 * MIN_STEPS
        )));
    }
    let n = even_steps(n_steps)?;
    let runs = [n, 2 * n, 4 * n]
        .par_iter()
        .map(|&m| {
            let r = evolve_unitary(schedule, kind, err, m)?;
            Ok(r.final_unitary().cloned().expect("unitary run"))
        })
        .collect::<Result<Vec<CMatrix>>>()?;
    let error = runs[0].max_abs_diff(&runs[1]);
    let refined_error = runs[1].max_abs_diff(&runs[2]);
    let order = if error < ConvergenceReport::EXACT_THRESHOLD {
        ConvergenceOrder::Exact
    } else {
        ConvergenceOrder::Empirical((error / refined_error).log2())
    };
    Ok(ConvergenceReport {
        n_steps: n,
        error,
        refined_error,
        order,
    })
}

/// `|⟨ψ|U|ψ⟩|` helper used by invariants: overlap of `U|ψ⟩` with `|ψ⟩`.
pub fn return_overlap(u: &CMatrix, psi: &StateVector) -> Result<f64> {
    Ok(psi.inner(&u.apply(psi)?).norm())
}
