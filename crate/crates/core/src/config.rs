//! JSON run configuration.
//!
//! Every key is optional; an empty object yields the demonstrated device
//! and schedule. Frequencies are given in Hz and converted to rad/s.
//!
//! ```json
//! {
//!   "gate": "X",
//!   "scheme": "sta",
//!   "omega_a_hz": 2e6,
//!   "duration_s": 5e-7,
//!   "n_steps": 10000,
//!   "noise": true,
//!   "t1_e_s": 29e-6, "t1_f_s": 9e-6, "t2_ge_s": 5.9e-6, "t2_ef_s": 5.8e-6
//! }
//! ```

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::{default_alpha_grid, OptimizeSettings, MAX_SWEEP_ALPHA};
use crate::error::{Error, Result};
use crate::holonomy::named_gate;
use crate::propagator::{NoiseModel, DEFAULT_STEPS, MIN_STEPS};
use crate::schedule::registry::ScheduleParams;
use crate::schedule::{
    ErrorTarget, GateSpec, MixingProfile, Scheme, DEFAULT_DURATION_S, DEFAULT_OMEGA_A_HZ,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Named gate (`I`, `Z`, `X`, `H`, `Xhalf`); ignored when a triple is given.
    pub gate: Option<String>,
    pub theta: Option<f64>,
    pub phi: Option<f64>,
    pub gamma: Option<f64>,
    pub scheme: String,
    /// Schemes compared by `sweep-error`.
    pub schemes: Vec<String>,
    /// Ωₐ/2π in Hz.
    pub omega_a_hz: f64,
    pub duration_s: f64,
    pub n_steps: usize,
    pub noise: bool,
    pub t1_e_s: f64,
    pub t1_f_s: f64,
    pub t2_ge_s: f64,
    pub t2_ef_s: f64,
    pub alphas: Vec<f64>,
    pub error_target: ErrorTarget,
    /// Harmonic coefficients for `sta-optimized`.
    pub shape: Vec<f64>,
    pub trajectory_every: usize,
    pub pulse_samples: usize,
    /// Prepare tomography inputs with simulated gates instead of exactly.
    pub gate_prep: bool,
    pub family_dim: usize,
    pub budget: usize,
    pub seed: u64,
    /// Steps per propagation inside the optimizer objective.
    pub optimize_n_steps: usize,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let opt = OptimizeSettings::default();
        RunConfig {
            gate: None,
            theta: None,
            phi: None,
            gamma: None,
            scheme: Scheme::StaBaseline.name().to_string(),
            schemes: vec!["sta".into(), "nhqc".into()],
            omega_a_hz: DEFAULT_OMEGA_A_HZ,
            duration_s: DEFAULT_DURATION_S,
            n_steps: DEFAULT_STEPS,
            noise: true,
            t1_e_s: NoiseModel::DEVICE_T1_E,
            t1_f_s: NoiseModel::DEVICE_T1_F,
            t2_ge_s: NoiseModel::DEVICE_T2_GE,
            t2_ef_s: NoiseModel::DEVICE_T2_EF,
            alphas: default_alpha_grid(),
            error_target: ErrorTarget::TotalDrive,
            shape: Vec::new(),
            trajectory_every: 50,
            pulse_samples: 1001,
            gate_prep: false,
            family_dim: 4,
            budget: 500,
            seed: opt.seed,
            optimize_n_steps: opt.n_steps,
            out_dir: "out".into(),
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            key,
            format!("must be a positive finite number, got {v}"),
        ))
    }
}

impl RunConfig {
    /// Checks every field, reporting the first offending key.
    pub fn validate(&self) -> Result<()> {
        positive("omega_a_hz", self.omega_a_hz)?;
        positive("duration_s", self.duration_s)?;
        for (key, v) in [
            ("t1_e_s", self.t1_e_s),
            ("t1_f_s", self.t1_f_s),
            ("t2_ge_s", self.t2_ge_s),
            ("t2_ef_s", self.t2_ef_s),
        ] {
            positive(key, v)?;
        }
        self.noise_model()?;
        if self.n_steps < MIN_STEPS {
            return Err(Error::config("n_steps", format!("must be >= {MIN_STEPS}")));
        }
        if self.optimize_n_steps < MIN_STEPS {
            return Err(Error::config(
                "optimize_n_steps",
                format!("must be >= {MIN_STEPS}"),
            ));
        }
        if let Some(a) = self
            .alphas
            .iter()
            .find(|a| a.is_nan() || a.abs() >= MAX_SWEEP_ALPHA)
        {
            return Err(Error::config("alphas", format!("{a} outside (-0.5, 0.5)")));
        }
        self.scheme()?;
        for s in &self.schemes {
            s.parse::<Scheme>()
                .map_err(|e| Error::config("schemes", e.to_string()))?;
        }
        MixingProfile::new(self.shape.clone())
            .map_err(|e| Error::config("shape", e.to_string()))?;
        if self.trajectory_every == 0 {
            return Err(Error::config("trajectory_every", "must be >= 1"));
        }
        if self.pulse_samples < 2 {
            return Err(Error::config("pulse_samples", "must be >= 2"));
        }
        if self.family_dim == 0 || self.family_dim > MixingProfile::MAX_HARMONICS {
            return Err(Error::config(
                "family_dim",
                format!("must be in 1..={}", MixingProfile::MAX_HARMONICS),
            ));
        }
        if self.budget < 100 {
            return Err(Error::config("budget", "must be >= 100"));
        }
        self.gate_spec()?;
        Ok(())
    }

    pub fn omega_a(&self) -> f64 {
        2.0 * PI * self.omega_a_hz
    }

    pub fn scheme(&self) -> Result<Scheme> {
        self.scheme
            .parse()
            .map_err(|e: Error| Error::config("scheme", e.to_string()))
    }

    pub fn schedule_params(&self) -> ScheduleParams {
        ScheduleParams {
            omega_a: self.omega_a(),
            duration: self.duration_s,
            shape: self.shape.clone(),
        }
    }

    /// Device noise with overrides; disabled when `noise` is false.
    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.t1_e_s, self.t1_f_s, self.t2_ge_s, self.t2_ef_s)
            .map(|n| n.with_enabled(self.noise))
            .map_err(|e| Error::config("t2_ge_s", e.to_string()))
    }

    /// Explicit `(theta, phi, gamma)` if all three are set, else the named gate (default `X`).
    pub fn gate_spec(&self) -> Result<GateSpec> {
        match (self.theta, self.phi, self.gamma) {
            (Some(t), Some(p), Some(g)) => {
                GateSpec::new(t, p, g).map_err(|e| Error::config("theta", e.to_string()))
            }
            (None, None, None) => {
                let name = self.gate.as_deref().unwrap_or("X");
                named_gate(name).map_err(|e| Error::config("gate", e.to_string()))
            }
            _ => Err(Error::config(
                "theta",
                "theta, phi and gamma must be given together",
            )),
        }
    }

    /// Label for output files: the gate name, or `custom` for a triple.
    pub fn gate_name(&self) -> String {
        match (self.theta, self.gate.as_deref()) {
            (Some(_), _) => "custom".into(),
            (None, Some(g)) => g.to_string(),
            (None, None) => "X".into(),
        }
    }

    pub fn optimize_settings(&self) -> OptimizeSettings {
        OptimizeSettings {
            omega_a: self.omega_a(),
            duration: self.duration_s,
            target: self.error_target,
            n_steps: self.optimize_n_steps,
            seed: self.seed,
            ..OptimizeSettings::default()
        }
    }
}

/// Parses and validates a JSON config; errors name the offending key.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.to_string();
        let key = if matches!(path.as_str(), "" | "." | "?") {
            unknown_field(&msg).unwrap_or_else(|| "<root>".into())
        } else {
            path
        };
        Error::config(key, msg)
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn unknown_field(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(text: &str) -> String {
        match parse_config(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_object_gives_device_defaults() {
        let c = parse_config("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.noise_model().unwrap(), NoiseModel::device());
        assert_eq!(c.n_steps, 10_000);
        assert!((c.omega_a() - 2.0 * PI * 2e6).abs() < 1e-6);
    }

    #[test]
    fn frequency_override_is_converted() {
        let c = parse_config(r#"{"omega_a_hz": 4e6}"#).unwrap();
        assert!((c.omega_a() - 2.0 * PI * 4e6).abs() < 1e-6);
        assert_eq!(c.duration_s, DEFAULT_DURATION_S);
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(r#"{"t1_e_s": -1}"#), "t1_e_s");
        assert_eq!(key_of(r#"{"t1_e_s": "long"}"#), "t1_e_s");
        assert_eq!(key_of(r#"{"t2_ge_s": 1e-3}"#), "t2_ge_s");
        assert_eq!(key_of(r#"{"colour": 1}"#), "colour");
        assert_eq!(key_of(r#"{"gate": "T"}"#), "gate");
        assert_eq!(key_of(r#"{"scheme": "drag"}"#), "scheme");
        assert_eq!(key_of(r#"{"alphas": [0.7]}"#), "alphas");
        assert_eq!(key_of(r#"{"theta": 1.0}"#), "theta");
        assert_eq!(key_of("{"), "<root>");
    }

    #[test]
    fn explicit_triple_wins() {
        let c = parse_config(r#"{"theta": 1.0, "phi": 0.5, "gamma": 2.0}"#).unwrap();
        assert_eq!(
            c.gate_spec().unwrap(),
            GateSpec::new(1.0, 0.5, 2.0).unwrap()
        );
        assert_eq!(c.gate_name(), "custom");
    }
}
