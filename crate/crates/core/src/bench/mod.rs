//! Robustness of the control schemes against amplitude errors, and pulse
//! optimization of the shaped STA family.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::holonomy::{holonomy_matrix, NamedGate};
use crate::linalg::{projected_gate_fidelity, CMatrix};
use crate::propagator::{evolve_unitary, NoiseModel};
use crate::schedule::registry::{ScheduleParams, SchemeRegistry};
use crate::schedule::{
    ControlSchedule, ErrorModel, ErrorTarget, GateSpec, MixingProfile, NhqcSchedule, Scheme,
    StaSchedule,
};
use crate::tomography::{process_chi, process_fidelity, Channel};

mod simplex;

pub use simplex::{minimize, Evaluation, SimplexOptions, SimplexResult};

/// Largest |α| accepted by sweeps.
pub const MAX_SWEEP_ALPHA: f64 = 0.5;

/// Nine-point grid `{−0.1, −0.075, …, 0.1}`.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..9).map(|k| -0.1 + 0.025 * k as f64).collect()
}

/// Display name of a gate: the table name when it matches one, else the triple.
pub fn gate_label(g: &GateSpec) -> String {
    NamedGate::ALL
        .into_iter()
        .find(|n| n.spec() == *g)
        .map(|n| n.name().to_string())
        .unwrap_or_else(|| format!("({:.6},{:.6},{:.6})", g.theta(), g.phi_rel(), g.gamma()))
}

/// Noiseless average gate fidelity of one run of `schedule` against `target`,
/// scored on the raw computational block so that leakage counts as error.
/// Equals the unitary average gate fidelity when nothing leaks.
pub fn unitary_fidelity(
    schedule: &dyn ControlSchedule,
    target: &CMatrix,
    err: &ErrorModel,
    n_steps: usize,
) -> Result<f64> {
    let r = evolve_unitary(schedule, schedule.hamiltonian_kind(), err, n_steps)?;
    let block = r.final_unitary().expect("unitary run").leading_block(2)?;
    projected_gate_fidelity(&block, target)
}

/// Process fidelity of one noisy run of `schedule` against `target`.
pub fn noisy_fidelity(
    schedule: Arc<dyn ControlSchedule>,
    target: &CMatrix,
    err: &ErrorModel,
    noise: &NoiseModel,
    n_steps: usize,
) -> Result<f64> {
    let kind = schedule.hamiltonian_kind();
    let ch = Channel::from_schedule("sweep", schedule, kind, *err, Some(*noise), n_steps)?;
    process_fidelity(&process_chi(&ch)?, target)
}

#[derive(Clone)]
pub struct SweepRequest<'a> {
    pub registry: &'a SchemeRegistry,
    pub scheme: Scheme,
    pub gate: GateSpec,
    pub params: ScheduleParams,
    pub alphas: Vec<f64>,
    pub noise: NoiseModel,
    pub target: ErrorTarget,
    pub n_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scheme: Scheme,
    pub gate: GateSpec,
    pub gate_label: String,
    pub alphas: Vec<f64>,
    /// NaN where the point failed (see `errors`).
    pub fidelities: Vec<f64>,
    pub errors: Vec<Option<String>>,
    pub noise_enabled: bool,
}

impl SweepResult {
    /// Mean over successful points.
    pub fn mean_fidelity(&self) -> f64 {
        let ok: Vec<f64> = self
            .fidelities
            .iter()
            .copied()
            .filter(|f| f.is_finite())
            .collect();
        ok.iter().sum::<f64>() / ok.len().max(1) as f64
    }

    pub fn fidelity_at(&self, alpha: f64) -> Option<f64> {
        self.alphas
            .iter()
            .position(|a| (a - alpha).abs() < 1e-12)
            .map(|k| self.fidelities[k])
    }
}

/// Fidelity of `scheme` at each α, noiseless (average gate fidelity) or noisy
/// (process fidelity). Points are independent and run concurrently; a failing
/// point records its error and the sweep continues.
pub fn sweep_alpha(req: &SweepRequest<'_>) -> Result<SweepResult> {
    if let Some(a) = req
        .alphas
        .iter()
        .find(|a| a.is_nan() || a.abs() >= MAX_SWEEP_ALPHA)
    {
        return Err(Error::invalid(format!("alpha {a} outside (-0.5, 0.5)")));
    }
    let factory = req.registry.get(req.scheme.name())?;
    let schedule: Arc<dyn ControlSchedule> = Arc::from(factory.build(&req.gate, &req.params)?);
    let target = holonomy_matrix(&req.gate);
    let outcomes: Vec<Result<f64>> = req
        .alphas
        .par_iter()
        .map(|&alpha| {
            let err = ErrorModel::with_target(alpha, req.target)?;
            if req.noise.enabled() {
                noisy_fidelity(schedule.clone(), &target, &err, &req.noise, req.n_steps)
            } else {
                unitary_fidelity(schedule.as_ref(), &target, &err, req.n_steps)
            }
        })
        .collect();
    let (fidelities, errors) = outcomes
        .into_iter()
        .map(|r| match r {
            Ok(f) => (f, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        })
        .unzip();
    Ok(SweepResult {
        scheme: req.scheme,
        gate: req.gate,
        gate_label: gate_label(&req.gate),
        alphas: req.alphas.clone(),
        fidelities,
        errors,
        noise_enabled: req.noise.enabled(),
    })
}

pub const SWEEP_CSV_HEADER: &str = "scheme,gate,alpha,fidelity,noise_enabled";

pub fn write_sweep_csv<W: Write>(results: &[SweepResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_CSV_HEADER.split(','))?;
    for r in results {
        for (alpha, f) in r.alphas.iter().zip(&r.fidelities) {
            w.write_record(&[
                r.scheme.name().to_string(),
                r.gate_label.clone(),
                alpha.to_string(),
                f.to_string(),
                r.noise_enabled.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Echo phase of the NHQC loop that maximizes noiseless fidelity, from a
/// 64-point scan over `[0, 2π)` refined by golden-section search.
pub fn calibrate_echo_phase(gate: &GateSpec, duration: f64, n_steps: usize) -> Result<f64> {
    let target = holonomy_matrix(gate);
    let base = NhqcSchedule::new(*gate, duration)?;
    let infidelity = |phase: f64| -> Result<f64> {
        let s = base.clone().with_echo_phase(phase);
        Ok(1.0 - unitary_fidelity(&s, &target, &ErrorModel::none(), n_steps)?)
    };
    const GRID: usize = 64;
    let h = 2.0 * PI / GRID as f64;
    let scan = (0..GRID)
        .into_par_iter()
        .map(|k| Ok((k, infidelity(k as f64 * h)?)))
        .collect::<Result<Vec<_>>>()?;
    let (k_best, _) = scan
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    let (mut a, mut b) = ((k_best as f64 - 1.0) * h, (k_best as f64 + 1.0) * h);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (infidelity(c)?, infidelity(d)?);
    while b - a > 1e-7 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = infidelity(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = infidelity(d)?;
        }
    }
    Ok((0.5 * (a + b)).rem_euclid(2.0 * PI))
}

/// Settings of [`optimize_schedule`] beyond the problem definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSettings {
    pub omega_a: f64,
    pub duration: f64,
    pub target: ErrorTarget,
    /// Steps per propagation inside the objective.
    pub n_steps: usize,
    pub seed: u64,
    pub initial_step: f64,
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        let p = ScheduleParams::default();
        OptimizeSettings {
            omega_a: p.omega_a,
            duration: p.duration,
            target: ErrorTarget::TotalDrive,
            n_steps: 2000,
            seed: SimplexOptions::default().seed,
            initial_step: SimplexOptions::default().initial_step,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationLogEntry {
    pub iteration: usize,
    pub params: Vec<f64>,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationOutcome {
    /// Harmonic coefficients of the best [`MixingProfile`].
    pub params: Vec<f64>,
    pub objective_before: f64,
    pub objective_after: f64,
    pub evaluations: usize,
    pub history: Vec<OptimizationLogEntry>,
}

impl OptimizationOutcome {
    pub fn profile(&self) -> Result<MixingProfile> {
        MixingProfile::new(self.params.clone())
    }

    /// One JSON object per evaluation.
    pub fn write_log<W: Write>(&self, mut writer: W) -> Result<()> {
        for entry in &self.history {
            serde_json::to_writer(&mut writer, entry)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Mean noiseless infidelity over `alphas` of the STA schedule with profile
/// coefficients `coeffs`; infeasible profiles score `+∞`.
pub fn robustness_objective(
    gate: &GateSpec,
    coeffs: &[f64],
    alphas: &[f64],
    settings: &OptimizeSettings,
) -> f64 {
    let build = || -> Result<StaSchedule> {
        let profile = MixingProfile::new(coeffs.to_vec())?;
        StaSchedule::new(*gate, settings.omega_a, settings.duration)?.with_profile(profile)
    };
    let Ok(schedule) = build() else {
        return f64::INFINITY;
    };
    let target = holonomy_matrix(gate);
    let total: Result<f64> = alphas
        .par_iter()
        .map(|&alpha| {
            let err = ErrorModel::with_target(alpha, settings.target)?;
            Ok(1.0 - unitary_fidelity(&schedule, &target, &err, settings.n_steps)?)
        })
        .sum();
    match total {
        Ok(t) => t / alphas.len() as f64,
        Err(_) => f64::INFINITY,
    }
}

/// Minimizes the mean infidelity over `alpha_grid` within the shaped
/// mixing-angle family of `family_dim` harmonics, starting from the baseline.
/// Best-so-far semantics: the returned objective never exceeds the baseline's.
pub fn optimize_schedule(
    gate: &GateSpec,
    alpha_grid: &[f64],
    family_dim: usize,
    budget: usize,
    settings: &OptimizeSettings,
) -> Result<OptimizationOutcome> {
    if family_dim == 0 || family_dim > MixingProfile::MAX_HARMONICS {
        return Err(Error::invalid(format!(
            "family_dim must be in 1..={}",
            MixingProfile::MAX_HARMONICS
        )));
    }
    if budget < 100 {
        return Err(Error::invalid("budget must allow at least 100 evaluations"));
    }
    if alpha_grid.is_empty() {
        return Err(Error::invalid("empty alpha grid"));
    }
    if let Some(a) = alpha_grid
        .iter()
        .find(|a| a.is_nan() || a.abs() >= MAX_SWEEP_ALPHA)
    {
        return Err(Error::invalid(format!("alpha {a} outside (-0.5, 0.5)")));
    }
    let objective = |c: &[f64]| robustness_objective(gate, c, alpha_grid, settings);
    let baseline = vec![0.0; family_dim];
    let opts = SimplexOptions {
        initial_step: settings.initial_step,
        max_evaluations: budget,
        seed: settings.seed,
        ..SimplexOptions::default()
    };
    let result = minimize(&objective, &baseline, &opts);
    // The first evaluation is the baseline itself.
    let objective_before = result
        .history
        .first()
        .map(|e| e.value)
        .unwrap_or(f64::INFINITY);
    let (params, objective_after) = if result.best_value < objective_before {
        (result.best, result.best_value)
    } else {
        (baseline, objective_before)
    };
    Ok(OptimizationOutcome {
        params,
        objective_before,
        objective_after,
        evaluations: result.history.len(),
        history: result
            .history
            .into_iter()
            .map(|e| OptimizationLogEntry {
                iteration: e.index,
                params: e.params,
                objective: e.value,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::NoiseModel;

    fn request(registry: &SchemeRegistry, scheme: Scheme, alphas: Vec<f64>) -> SweepRequest<'_> {
        SweepRequest {
            registry,
            scheme,
            gate: NamedGate::X.spec(),
            params: ScheduleParams::default(),
            alphas,
            noise: NoiseModel::device().with_enabled(false),
            target: ErrorTarget::TotalDrive,
            n_steps: 4000,
        }
    }

    #[test]
    fn zero_error_is_ideal_for_each_scheme() {
        let reg = SchemeRegistry::with_defaults();
        for scheme in [Scheme::StaBaseline, Scheme::Nhqc] {
            let r = sweep_alpha(&request(&reg, scheme, vec![0.0])).unwrap();
            assert!(
                r.fidelities[0] > 1.0 - 1e-6,
                "{scheme}: {}",
                r.fidelities[0]
            );
        }
    }

    #[test]
    fn amplitude_error_costs_fidelity() {
        let reg = SchemeRegistry::with_defaults();
        let r = sweep_alpha(&request(&reg, Scheme::StaBaseline, vec![-0.1, 0.1])).unwrap();
        assert!(r.fidelities.iter().all(|f| *f < 1.0 - 1e-6));
        assert_eq!(r.gate_label, "X");
    }

    #[test]
    fn out_of_range_alpha_rejected() {
        let reg = SchemeRegistry::with_defaults();
        assert!(sweep_alpha(&request(&reg, Scheme::StaBaseline, vec![0.6])).is_err());
    }

    #[test]
    fn sweep_csv_layout() {
        let reg = SchemeRegistry::with_defaults();
        let r = sweep_alpha(&request(&reg, Scheme::StaBaseline, vec![0.0])).unwrap();
        let mut out = Vec::new();
        write_sweep_csv(&[r], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert!(lines[1].starts_with("sta,X,0,"));
        assert!(lines[1].ends_with(",false"));
    }

    #[test]
    fn echo_phase_calibrates_to_pi() {
        let phase = calibrate_echo_phase(&NamedGate::X.spec(), 0.5e-6, 1000).unwrap();
        assert!((phase - PI).abs() < 1e-4, "{phase}");
    }

    #[test]
    fn optimizer_keeps_baseline_at_zero_error() {
        let settings = OptimizeSettings {
            n_steps: 400,
            ..Default::default()
        };
        let out = optimize_schedule(&NamedGate::X.spec(), &[0.0], 2, 100, &settings).unwrap();
        assert!(out.objective_before < 1e-9);
        assert!(out.objective_after <= out.objective_before);
        assert!(out.objective_before - out.objective_after < 1e-6);
        assert!(out.evaluations <= 100);
    }

    #[test]
    fn optimizer_validates_inputs() {
        let s = OptimizeSettings::default();
        let g = NamedGate::X.spec();
        assert!(optimize_schedule(&g, &[0.0], 9, 100, &s).is_err());
        assert!(optimize_schedule(&g, &[0.0], 2, 50, &s).is_err());
    }
}
