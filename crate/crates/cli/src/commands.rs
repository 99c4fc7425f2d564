use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use serde::Serialize;
use stahqc::bench::{
    optimize_schedule, sweep_alpha, write_sweep_csv, OptimizationOutcome, SweepRequest,
};
use stahqc::config::{load_config, RunConfig};
use stahqc::hamiltonian::HamiltonianKind;
use stahqc::holonomy::{extract_qubit_gate, holonomy_matrix, phase_report};
use stahqc::linalg::{average_gate_fidelity, CMatrix, DensityMatrix, StateVector};
use stahqc::propagator::{
    evolve_lindblad, evolve_lindblad_traced, evolve_unitary, evolve_unitary_traced,
    write_trajectory_csv, NoiseModel,
};
use stahqc::schedule::registry::SchemeRegistry;
use stahqc::schedule::{
    export_pulses, ControlSchedule, ErrorModel, GateSpec, MixingProfile, Scheme, StaSchedule,
};
use stahqc::tomography::{process_chi_with, process_fidelity, Channel, ChiExport, Preparation};

use crate::{Cli, Command, Overrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] stahqc::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 3 for a failed simulation, 2 for bad input or I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut cfg, &cli.overrides);
    match &cli.command {
        Command::SimulateGate { every, .. } => {
            if let Some(k) = every {
                cfg.trajectory_every = *k;
            }
        }
        Command::Tomography { gate_prep } => cfg.gate_prep |= gate_prep,
        Command::SweepError { schemes, alphas } => {
            if let Some(s) = schemes {
                cfg.schemes = s.clone();
            }
            if let Some(a) = alphas {
                cfg.alphas = a.clone();
            }
        }
        Command::Optimize {
            budget,
            family_dim,
            seed,
            alphas,
        } => {
            cfg.budget = budget.unwrap_or(cfg.budget);
            cfg.family_dim = family_dim.unwrap_or(cfg.family_dim);
            cfg.seed = seed.unwrap_or(cfg.seed);
            if let Some(a) = alphas {
                cfg.alphas = a.clone();
            }
        }
        Command::ExportPulses { samples } => {
            cfg.pulse_samples = samples.unwrap_or(cfg.pulse_samples);
        }
        Command::Phases => {}
    }
    cfg.validate()?;

    let out_dir = cli
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    fs::create_dir_all(&out_dir).map_err(|source| CliError::Io {
        path: out_dir.clone(),
        source,
    })?;
    let ctx = Context::new(cfg, out_dir)?;
    match cli.command {
        Command::SimulateGate { alpha, .. } => ctx.simulate_gate(alpha),
        Command::Tomography { .. } => ctx.tomography(),
        Command::SweepError { .. } => ctx.sweep_error(),
        Command::Optimize { .. } => ctx.optimize(),
        Command::ExportPulses { .. } => ctx.export_pulses(),
        Command::Phases => ctx.phases(),
    }
}

fn apply_overrides(cfg: &mut RunConfig, o: &Overrides) {
    if o.gate.is_some() {
        cfg.gate = o.gate.clone();
        (cfg.theta, cfg.phi, cfg.gamma) = (None, None, None);
    }
    if o.theta.is_some() || o.phi.is_some() || o.gamma.is_some() {
        (cfg.theta, cfg.phi, cfg.gamma) = (o.theta, o.phi, o.gamma);
    }
    if let Some(s) = &o.scheme {
        cfg.scheme = s.clone();
    }
    cfg.duration_s = o.duration.unwrap_or(cfg.duration_s);
    cfg.omega_a_hz = o.omega_a_hz.unwrap_or(cfg.omega_a_hz);
    cfg.n_steps = o.n_steps.unwrap_or(cfg.n_steps);
    if o.no_noise {
        cfg.noise = false;
    }
}

struct Context {
    cfg: RunConfig,
    out_dir: PathBuf,
    registry: SchemeRegistry,
    gate: GateSpec,
    target: CMatrix,
    noise: NoiseModel,
}

#[derive(Serialize)]
struct MatrixJson {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl MatrixJson {
    fn new(m: &CMatrix) -> Self {
        let rows = |f: fn(&stahqc::linalg::C64) -> f64| {
            (0..m.dim())
                .map(|i| (0..m.dim()).map(|j| f(&m.matrix()[(i, j)])).collect())
                .collect()
        };
        MatrixJson {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}

#[derive(Serialize)]
struct GateReport {
    gate: String,
    scheme: String,
    theta: f64,
    phi: f64,
    gamma: f64,
    duration_s: f64,
    omega_a_hz: f64,
    n_steps: usize,
    noise_enabled: bool,
    /// `average-gate` when noiseless, `process` otherwise.
    fidelity_kind: &'static str,
    fidelity: f64,
    leakage: f64,
    qubit_unitary: Option<MatrixJson>,
    max_trace_error: f64,
}

#[derive(Serialize)]
struct PhasesReport {
    gate: String,
    geometric: f64,
    dynamical: f64,
    total: f64,
    closure_defect: f64,
    omega_a_t: f64,
}

impl Context {
    fn new(cfg: RunConfig, out_dir: PathBuf) -> Result<Self> {
        let gate = cfg.gate_spec()?;
        Ok(Context {
            registry: SchemeRegistry::with_defaults(),
            target: holonomy_matrix(&gate),
            noise: cfg.noise_model()?,
            gate,
            cfg,
            out_dir,
        })
    }

    fn schedule(&self) -> Result<Arc<dyn ControlSchedule>> {
        let s = self
            .registry
            .build(&self.cfg.scheme, &self.gate, &self.cfg.schedule_params())?;
        Ok(Arc::from(s))
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out_dir.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|source| CliError::Io { path, source })
    }

    fn finish(&self, name: &str, mut w: BufWriter<File>) -> Result<()> {
        w.flush().map_err(|source| CliError::Io {
            path: self.out_dir.join(name),
            source,
        })?;
        println!("wrote {}", self.out_dir.join(name).display());
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(stahqc::Error::from)?;
        writeln!(w).map_err(|source| CliError::Io {
            path: self.out_dir.join(name),
            source,
        })?;
        self.finish(name, w)
    }

    fn simulate_gate(&self, alpha: f64) -> Result<()> {
        let schedule = self.schedule()?;
        let kind = schedule.hamiltonian_kind();
        let err = ErrorModel::with_target(alpha, self.cfg.error_target)?;
        let (n, every) = (self.cfg.n_steps, self.cfg.trajectory_every);
        let ground = StateVector::basis(3, 0);

        let traced = if self.noise.enabled() {
            let rho0 = DensityMatrix::pure(&ground);
            evolve_lindblad_traced(schedule.as_ref(), kind, &err, &self.noise, &rho0, n, every)?
        } else {
            evolve_unitary_traced(schedule.as_ref(), kind, &err, n, &ground, every)?
        };
        let mut w = self.create("trajectory.csv")?;
        write_trajectory_csv(&traced.trajectory, &mut w)?;
        self.finish("trajectory.csv", w)?;

        let (fidelity_kind, fidelity, leakage, qubit_unitary, max_trace_error) = if self
            .noise
            .enabled()
        {
            let (f, leak, drift) = self.noisy_gate_metrics(schedule, kind, &err)?;
            ("process", f, leak, None, drift)
        } else {
            let r = evolve_unitary(schedule.as_ref(), kind, &err, n)?;
            let e =
                extract_qubit_gate(r.final_unitary().expect("unitary run"), Some(&self.target))?;
            let f = average_gate_fidelity(&e.qubit_unitary, &self.target)?;
            (
                "average-gate",
                f,
                e.leakage,
                Some(MatrixJson::new(&e.qubit_unitary)),
                0.0,
            )
        };
        println!(
            "{} {}: fidelity {fidelity:.6}, leakage {leakage:.3e}",
            self.cfg.scheme,
            self.cfg.gate_name()
        );
        self.write_json(
            "gate.json",
            &GateReport {
                gate: self.cfg.gate_name(),
                scheme: self.cfg.scheme.clone(),
                theta: self.gate.theta(),
                phi: self.gate.phi_rel(),
                gamma: self.gate.gamma(),
                duration_s: self.cfg.duration_s,
                omega_a_hz: self.cfg.omega_a_hz,
                n_steps: n,
                noise_enabled: self.noise.enabled(),
                fidelity_kind,
                fidelity,
                leakage,
                qubit_unitary,
                max_trace_error,
            },
        )
    }

    /// Process fidelity, mean |e⟩ population left by |0⟩ and |1⟩, and worst trace drift.
    fn noisy_gate_metrics(
        &self,
        schedule: Arc<dyn ControlSchedule>,
        kind: HamiltonianKind,
        err: &ErrorModel,
    ) -> Result<(f64, f64, f64)> {
        let n = self.cfg.n_steps;
        let mut leak = 0.0;
        let mut drift: f64 = 0.0;
        for k in 0..2 {
            let rho0 = DensityMatrix::pure(&StateVector::basis(3, k));
            let r = evolve_lindblad(schedule.as_ref(), kind, err, &self.noise, &rho0, n)?;
            leak += 0.5 * r.final_rho().expect("noisy run").population(2);
            drift = drift.max(r.max_trace_error);
        }
        let ch = Channel::from_schedule("gate", schedule, kind, *err, Some(self.noise), n)?;
        let chi = process_chi_with(&ch, &Preparation::Exact)?;
        Ok((process_fidelity(&chi, &self.target)?, leak, drift))
    }

    fn tomography(&self) -> Result<()> {
        let schedule = self.schedule()?;
        let kind = schedule.hamiltonian_kind();
        let n = self.cfg.n_steps;
        let noise = Some(self.noise);
        let ch = Channel::from_schedule(
            self.cfg.gate_name(),
            schedule,
            kind,
            ErrorModel::none(),
            noise,
            n,
        )?;
        let prep = if self.cfg.gate_prep {
            Preparation::pulsed(|g| {
                let s: Arc<dyn ControlSchedule> = Arc::from(self.registry.build(
                    &self.cfg.scheme,
                    g,
                    &self.cfg.schedule_params(),
                )?);
                let kind = s.hamiltonian_kind();
                Channel::from_schedule("prep", s, kind, ErrorModel::none(), noise, n)
            })?
        } else {
            Preparation::Exact
        };
        let chi = process_chi_with(&ch, &prep)?;
        if let Some(w) = chi.warning() {
            eprintln!(
                "warning: reconstructed chi is not positive (min eigenvalue {:.4})",
                w.min_eigenvalue
            );
        }
        let fidelity = process_fidelity(&chi, &self.target)?;
        println!(
            "{} {}: process fidelity {fidelity:.6}",
            self.cfg.scheme,
            self.cfg.gate_name()
        );
        let mut w = self.create("chi.json")?;
        ChiExport::new(&chi, fidelity, self.cfg.gate_name()).write_json(&mut w)?;
        self.finish("chi.json", w)
    }

    fn sweep_error(&self) -> Result<()> {
        let mut results = Vec::with_capacity(self.cfg.schemes.len());
        for name in &self.cfg.schemes {
            let scheme: Scheme = name.parse()?;
            let r = sweep_alpha(&SweepRequest {
                registry: &self.registry,
                scheme,
                gate: self.gate,
                params: self.cfg.schedule_params(),
                alphas: self.cfg.alphas.clone(),
                noise: self.noise,
                target: self.cfg.error_target,
                n_steps: self.cfg.n_steps,
            })?;
            for (a, e) in r.alphas.iter().zip(&r.errors) {
                if let Some(e) = e {
                    eprintln!("warning: {scheme} alpha {a}: {e}");
                }
            }
            println!("{scheme}: mean fidelity {:.6}", r.mean_fidelity());
            results.push(r);
        }
        let mut w = self.create("sweep.csv")?;
        write_sweep_csv(&results, &mut w)?;
        self.finish("sweep.csv", w)
    }

    fn optimize(&self) -> Result<()> {
        let outcome: OptimizationOutcome = optimize_schedule(
            &self.gate,
            &self.cfg.alphas,
            self.cfg.family_dim,
            self.cfg.budget,
            &self.cfg.optimize_settings(),
        )?;
        println!(
            "objective {:.4e} -> {:.4e} after {} evaluations",
            outcome.objective_before, outcome.objective_after, outcome.evaluations
        );
        let mut w = self.create("optimization.jsonl")?;
        outcome.write_log(&mut w)?;
        self.finish("optimization.jsonl", w)?;

        // The optimized schedule is itself a run config.
        let schedule = RunConfig {
            scheme: Scheme::StaOptimized.name().into(),
            shape: outcome.params.clone(),
            ..self.cfg.clone()
        };
        self.write_json("schedule.json", &schedule)
    }

    fn export_pulses(&self) -> Result<()> {
        let schedule = self.schedule()?;
        let mut w = self.create("pulses.csv")?;
        export_pulses(
            schedule.as_ref(),
            &ErrorModel::none(),
            self.cfg.pulse_samples,
            &mut w,
        )?;
        self.finish("pulses.csv", w)
    }

    fn phases(&self) -> Result<()> {
        let scheme = self.cfg.scheme()?;
        if scheme == Scheme::Nhqc {
            return Err(CliError::Usage(
                "phases needs an adiabatic-frame scheme (sta or sta-optimized)".into(),
            ));
        }
        let mut schedule = StaSchedule::new(self.gate, self.cfg.omega_a(), self.cfg.duration_s)?;
        if !self.cfg.shape.is_empty() {
            schedule = schedule.with_profile(MixingProfile::new(self.cfg.shape.clone())?)?;
        }
        let r = phase_report(&schedule, self.cfg.n_steps)?;
        println!(
            "geometric {:.6} rad, dynamical {:.3e} rad, total {:.6} rad",
            r.geometric, r.dynamical, r.total
        );
        self.write_json(
            "phases.json",
            &PhasesReport {
                gate: self.cfg.gate_name(),
                geometric: r.geometric,
                dynamical: r.dynamical,
                total: r.total,
                closure_defect: r.closure_defect(),
                omega_a_t: self.cfg.omega_a() * self.cfg.duration_s,
            },
        )
    }
}
