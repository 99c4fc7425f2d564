//! Name-keyed registry of control protocols.
//!
//! Each protocol is a [`SchemeFactory`] that turns a target gate plus shared
//! [`ScheduleParams`] into a boxed [`ControlSchedule`]. The CLI and the
//! robustness bench look protocols up by name, so additional variants only
//! need to be registered here.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    default_omega_a, ControlSchedule, GateSpec, MixingProfile, NhqcSchedule, Scheme, StaSchedule,
    DEFAULT_DURATION_S,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    /// Ωₐ in rad/s.
    pub omega_a: f64,
    pub duration: f64,
    /// Harmonic coefficients of the shaped mixing-angle profile.
    #[serde(default)]
    pub shape: Vec<f64>,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            omega_a: default_omega_a(),
            duration: DEFAULT_DURATION_S,
            shape: Vec::new(),
        }
    }
}

pub trait SchemeFactory: Send + Sync {
    fn scheme(&self) -> Scheme;

    fn description(&self) -> &'static str;

    fn build(&self, gate: &GateSpec, params: &ScheduleParams) -> Result<Box<dyn ControlSchedule>>;
}

struct StaBaselineFactory;

impl SchemeFactory for StaBaselineFactory {
    fn scheme(&self) -> Scheme {
        Scheme::StaBaseline
    }

    fn description(&self) -> &'static str {
        "counterdiabatic loop with sinusoidal Rabi/detuning and spin echo"
    }

    fn build(&self, gate: &GateSpec, params: &ScheduleParams) -> Result<Box<dyn ControlSchedule>> {
        Ok(Box::new(StaSchedule::new(
            *gate,
            params.omega_a,
            params.duration,
        )?))
    }
}

struct NhqcFactory;

impl SchemeFactory for NhqcFactory {
    fn scheme(&self) -> Scheme {
        Scheme::Nhqc
    }

    fn description(&self) -> &'static str {
        "resonant two-pi-pulse holonomic loop (sin^2 envelopes)"
    }

    fn build(&self, gate: &GateSpec, params: &ScheduleParams) -> Result<Box<dyn ControlSchedule>> {
        Ok(Box::new(NhqcSchedule::new(*gate, params.duration)?))
    }
}

struct StaOptimizedFactory;

impl SchemeFactory for StaOptimizedFactory {
    fn scheme(&self) -> Scheme {
        Scheme::StaOptimized
    }

    fn description(&self) -> &'static str {
        "counterdiabatic loop with a harmonically shaped mixing angle"
    }

    fn build(&self, gate: &GateSpec, params: &ScheduleParams) -> Result<Box<dyn ControlSchedule>> {
        let profile = MixingProfile::new(params.shape.clone())?;
        let schedule =
            StaSchedule::new(*gate, params.omega_a, params.duration)?.with_profile(profile)?;
        Ok(Box::new(schedule))
    }
}

#[derive(Default)]
pub struct SchemeRegistry {
    factories: BTreeMap<&'static str, Box<dyn SchemeFactory>>,
}

impl SchemeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding `sta`, `nhqc` and `sta-optimized`.
    pub fn with_defaults() -> Self {
        let mut reg = Self::new();
        reg.register(Box::new(StaBaselineFactory));
        reg.register(Box::new(NhqcFactory));
        reg.register(Box::new(StaOptimizedFactory));
        reg
    }

    /// Registers a factory under its scheme name, replacing any previous one.
    pub fn register(&mut self, factory: Box<dyn SchemeFactory>) {
        self.factories.insert(factory.scheme().name(), factory);
    }

    pub fn get(&self, name: &str) -> Result<&dyn SchemeFactory> {
        self.factories
            .get(name)
            .map(|f| f.as_ref())
            .ok_or_else(|| Error::NotFound {
                kind: "scheme",
                name: name.to_string(),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn build(
        &self,
        name: &str,
        gate: &GateSpec,
        params: &ScheduleParams,
    ) -> Result<Box<dyn ControlSchedule>> {
        self.get(name)?.build(gate, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn defaults_are_registered() {
        let reg = SchemeRegistry::with_defaults();
        let names: Vec<_> = reg.names().collect();
        assert_eq!(names, vec!["nhqc", "sta", "sta-optimized"]);
        for name in names {
            assert_eq!(reg.get(name).unwrap().scheme().name(), name);
        }
    }

    #[test]
    fn unknown_scheme_is_not_found() {
        let reg = SchemeRegistry::with_defaults();
        assert!(matches!(reg.get("drag"), Err(Error::NotFound { .. })));
    }

    #[test]
    fn builds_each_scheme() {
        let reg = SchemeRegistry::with_defaults();
        let gate = GateSpec::new(PI / 2.0, 0.0, PI).unwrap();
        let mut params = ScheduleParams::default();
        assert_eq!(
            reg.build("sta", &gate, &params).unwrap().scheme(),
            Some(Scheme::StaBaseline)
        );
        assert_eq!(
            reg.build("nhqc", &gate, &params).unwrap().scheme(),
            Some(Scheme::Nhqc)
        );
        params.shape = vec![0.02];
        let opt = reg.build("sta-optimized", &gate, &params).unwrap();
        assert_eq!(opt.scheme(), Some(Scheme::StaOptimized));
        params.shape = vec![-0.5];
        assert!(reg.build("sta-optimized", &gate, &params).is_err());
    }
}
