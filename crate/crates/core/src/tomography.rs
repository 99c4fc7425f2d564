//! Single-qubit state and process tomography of simulated channels.
//!
//! Process tomography uses the four inputs |0⟩, (|0⟩+i|1⟩)/√2,
//! (|0⟩+|1⟩)/√2, |1⟩ and linear inversion. Outputs are projected onto the
//! qubit subspace without renormalization, so leakage shows up as trace loss
//! in χ.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianKind;
use crate::linalg::{
    hermitian_eigenvalues, pauli, CMatrix, DensityMatrix, StateVector, C64, I, ONE, ZERO,
};
use crate::propagator::{evolve_lindblad, evolve_unitary, NoiseModel};
use crate::schedule::{ControlSchedule, ErrorModel, GateSpec};

/// χ with a smaller eigenvalue than this carries a [`ReconstructionWarning`].
pub const NEGATIVITY_WARNING: f64 = -0.05;

pub const PAULI_LABELS: [&str; 4] = ["I", "X", "Y", "Z"];

/// Qubit-block Bloch vector and excited-level population of a qutrit state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliReadout {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub leak: f64,
}

pub fn pauli_expectations(rho3: &DensityMatrix) -> Result<PauliReadout> {
    if rho3.dim() != 3 {
        return Err(Error::invalid(
            "state tomography expects a qutrit density matrix",
        ));
    }
    let m = rho3.matrix();
    let r01 = m[(0, 1)];
    Ok(PauliReadout {
        x: 2.0 * r01.re,
        y: -2.0 * r01.im,
        z: m[(0, 0)].re - m[(1, 1)].re,
        leak: m[(2, 2)].re,
    })
}

type ChannelFn = dyn Fn(&DensityMatrix) -> Result<DensityMatrix> + Send + Sync;

/// Black-box map from a qubit (or qutrit) input state to a qutrit output state.
#[derive(Clone)]
pub struct Channel {
    label: String,
    eval: Arc<ChannelFn>,
}

impl std::fmt::Debug for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Channel")
            .field("label", &self.label)
            .finish()
    }
}

impl Channel {
    pub fn new<F>(label: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&DensityMatrix) -> Result<DensityMatrix> + Send + Sync + 'static,
    {
        Channel {
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    /// `ρ ↦ U ρ U†` for a qubit or qutrit unitary.
    pub fn unitary(label: impl Into<String>, u: CMatrix) -> Result<Self> {
        let u = match u.dim() {
            2 => CMatrix::from_fn(3, |i, j| match (i, j) {
                (2, 2) => ONE,
                (i, j) if i < 2 && j < 2 => u[(i, j)],
                _ => ZERO,
            })?,
            3 => u,
            d => {
                return Err(Error::invalid(format!(
                    "unitary dimension {d} is not 2 or 3"
                )))
            }
        };
        if !u.is_unitary(1e-9) {
            return Err(Error::invalid("channel operator is not unitary"));
        }
        Ok(Channel::new(label, move |rho| rho.conjugate_by(&u)))
    }

    /// One simulated run of `schedule`: unitary when `noise` is `None` or
    /// disabled (the propagator is computed once), master equation otherwise.
    pub fn from_schedule(
        label: impl Into<String>,
        schedule: Arc<dyn ControlSchedule>,
        kind: HamiltonianKind,
        err: ErrorModel,
        noise: Option<NoiseModel>,
        n_steps: usize,
    ) -> Result<Self> {
        match noise.filter(|n| n.enabled()) {
            None => {
                let r = evolve_unitary(schedule.as_ref(), kind, &err, n_steps)?;
                Channel::unitary(label, r.final_unitary().expect("unitary run").clone())
            }
            Some(noise) => Ok(Channel::new(label, move |rho| {
                let r = evolve_lindblad(schedule.as_ref(), kind, &err, &noise, rho, n_steps)?;
                Ok(r.final_rho().expect("noisy run").clone())
            })),
        }
    }

    /// Applies `first` with probability `p`, otherwise `second`.
    pub fn mixture(first: Channel, second: Channel, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("mixture weight outside [0, 1]"));
        }
        let label = format!("{p}*{}+{}*{}", first.label, 1.0 - p, second.label);
        Ok(Channel::new(label, move |rho| {
            let a = first.apply(rho)?;
            let b = second.apply(rho)?;
            let m = &a.matrix().scale(C64::new(p, 0.0)) + &b.matrix().scale(C64::new(1.0 - p, 0.0));
            DensityMatrix::new(m)
        }))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Embeds qubit inputs, evaluates, and checks the output is a unit-trace qutrit state.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let input = match rho.dim() {
            2 => rho.embed_qutrit()?,
            3 => rho.clone(),
            d => return Err(Error::invalid(format!("channel input dimension {d}"))),
        };
        let out = (self.eval)(&input)?;
        if out.dim() != 3 {
            return Err(Error::invalid("channel output must be a qutrit state"));
        }
        if (out.trace() - 1.0).abs() > 1e-8 {
            return Err(Error::invalid(format!(
                "channel output trace {}",
                out.trace()
            )));
        }
        Ok(out)
    }
}

/// Ideal tomography inputs `|0⟩, |+i⟩, |+⟩, |1⟩`.
pub fn input_states() -> [StateVector; 4] {
    let h = FRAC_1_SQRT_2;
    [
        StateVector::basis(2, 0),
        StateVector::new(vec![C64::new(h, 0.0), C64::new(0.0, h)]).expect("normalized"),
        StateVector::new(vec![C64::new(h, 0.0), C64::new(h, 0.0)]).expect("normalized"),
        StateVector::basis(2, 1),
    ]
}

/// Holonomies that prepare the inputs from |0⟩: identity, `R_x(−π/2)`, `R_y(π/2)`, X.
pub fn preparation_gates() -> [GateSpec; 4] {
    let spec = |t, p, g| GateSpec::new(t, p, g).expect("in range");
    [
        spec(0.0, 0.0, 0.0),
        spec(FRAC_PI_2, 0.0, -FRAC_PI_2),
        spec(FRAC_PI_2, 3.0 * FRAC_PI_2, FRAC_PI_2),
        spec(FRAC_PI_2, 0.0, std::f64::consts::PI),
    ]
}

/// How tomography inputs are produced.
#[derive(Clone, Debug, Default)]
pub enum Preparation {
    /// Inputs assigned exactly.
    #[default]
    Exact,
    /// Inputs prepared from |0⟩ by the given channels (one per input, in
    /// [`input_states`] order), so preparation errors enter the result.
    Pulsed(Box<[Channel; 4]>),
}

impl Preparation {
    /// Builds gate-based preparation from a factory mapping each of
    /// [`preparation_gates`] to a channel.
    pub fn pulsed(factory: impl Fn(&GateSpec) -> Result<Channel>) -> Result<Self> {
        let [a, b, c, d] = preparation_gates();
        Ok(Preparation::Pulsed(Box::new([
            factory(&a)?,
            factory(&b)?,
            factory(&c)?,
            factory(&d)?,
        ])))
    }

    fn inputs(&self) -> Result<Vec<DensityMatrix>> {
        match self {
            Preparation::Exact => Ok(input_states().iter().map(DensityMatrix::pure).collect()),
            Preparation::Pulsed(chans) => {
                let ground = DensityMatrix::pure(&StateVector::basis(3, 0));
                chans.par_iter().map(|c| c.apply(&ground)).collect()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionWarning {
    pub min_eigenvalue: f64,
}

/// Process matrix in the Pauli basis `(I, X, Y, Z)`:
/// `E(ρ) = Σ_mn χ_mn σ_m ρ σ_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiMatrix {
    entries: CMatrix,
    warning: Option<ReconstructionWarning>,
}

impl ChiMatrix {
    pub fn from_entries(entries: CMatrix) -> Result<Self> {
        if entries.dim() != 4 {
            return Err(Error::invalid("chi matrix must be 4x4"));
        }
        let min = hermitian_eigenvalues(&entries)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let warning = (min < NEGATIVITY_WARNING).then_some(ReconstructionWarning {
            min_eigenvalue: min,
        });
        Ok(ChiMatrix { entries, warning })
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn warning(&self) -> Option<&ReconstructionWarning> {
        self.warning.as_ref()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.entries)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn get(&self, m: usize, n: usize) -> C64 {
        self.entries[(m, n)]
    }
}

/// `v_m = vec(σ_m)` with index `2i + a ↔ |i⟩⊗|a⟩`.
fn pauli_vectors() -> [Vec<C64>; 4] {
    pauli::basis().map(|s| {
        let mut v = vec![ZERO; 4];
        for i in 0..2 {
            for a in 0..2 {
                v[2 * i + a] = s[(a, i)];
            }
        }
        v
    })
}

/// χ from the four projected outputs `E(|0⟩⟨0|), E(|+i⟩⟨+i|), E(|+⟩⟨+|), E(|1⟩⟨1|)`.
fn chi_from_outputs(out: &[CMatrix; 4]) -> Result<ChiMatrix> {
    let [e0, ei, ep, e1] = out;
    let diag = e0 + e1;
    let e01 = &(ep + &ei.scale(I)) - &diag.scale(C64::new(0.5, 0.5));
    let e10 = &(ep - &ei.scale(I)) - &diag.scale(C64::new(0.5, -0.5));
    let blocks = [[e0, &e01], [&e10, e1]];
    let choi = DMatrix::from_fn(4, 4, |r, c| {
        let (i, a) = (r / 2, r % 2);
        let (j, b) = (c / 2, c % 2);
        blocks[i][j][(a, b)]
    });
    let v = pauli_vectors();
    let chi = CMatrix::from_fn(4, |m, n| {
        let mut acc = ZERO;
        for r in 0..4 {
            for c in 0..4 {
                acc += v[m][r].conj() * choi[(r, c)] * v[n][c];
            }
        }
        acc * 0.25
    })?;
    ChiMatrix::from_entries(chi)
}

/// Linear-inversion χ of `ch` with exactly assigned inputs.
pub fn process_chi(ch: &Channel) -> Result<ChiMatrix> {
    process_chi_with(ch, &Preparation::Exact)
}

pub fn process_chi_with(ch: &Channel, prep: &Preparation) -> Result<ChiMatrix> {
    let inputs = prep.inputs()?;
    let outputs = inputs
        .par_iter()
        .map(|rho| ch.apply(rho)?.matrix().leading_block(2))
        .collect::<Result<Vec<_>>>()?;
    let outputs: [CMatrix; 4] = outputs.try_into().expect("four inputs");
    chi_from_outputs(&outputs)
}

/// Pauli coefficients `c_m = Tr(σ_m U)/2`.
fn pauli_coefficients(u: &CMatrix) -> Result<[C64; 4]> {
    if u.dim() != 2 {
        return Err(Error::invalid("ideal gate must be 2x2"));
    }
    Ok(pauli::basis().map(|s| (&s * u).trace() * 0.5))
}

pub fn ideal_chi(u: &CMatrix) -> Result<ChiMatrix> {
    let c = pauli_coefficients(u)?;
    ChiMatrix::from_entries(CMatrix::from_fn(4, |m, n| c[m] * c[n].conj())?)
}

/// `Tr(χ_ideal χ)`, clamped to `[0, 1]`.
pub fn process_fidelity(chi: &ChiMatrix, ideal_gate: &CMatrix) -> Result<f64> {
    let c = pauli_coefficients(ideal_gate)?;
    let mut acc = ZERO;
    for m in 0..4 {
        for n in 0..4 {
            acc += c[m].conj() * chi.get(m, n) * c[n];
        }
    }
    Ok(acc.re.clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiExport {
    pub basis: [String; 4],
    pub re: [[f64; 4]; 4],
    pub im: [[f64; 4]; 4],
    pub fidelity: f64,
    pub gate: String,
}

impl ChiExport {
    pub fn new(chi: &ChiMatrix, fidelity: f64, gate: impl Into<String>) -> Self {
        let mut re = [[0.0; 4]; 4];
        let mut im = [[0.0; 4]; 4];
        for m in 0..4 {
            for n in 0..4 {
                re[m][n] = chi.get(m, n).re;
                im[m][n] = chi.get(m, n).im;
            }
        }
        ChiExport {
            basis: PAULI_LABELS.map(String::from),
            re,
            im,
            fidelity,
            gate: gate.into(),
        }
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}
