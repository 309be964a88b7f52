//! Scenario files: one JSON document describing a single run.
//!
//! ```json
//! {
//!   "id": "fig3",
//!   "params": { "m": 10, "a": 0.5 },
//!   "initial": { "S": 1, "x": 2 },
//!   "disturbance": { "kind": "exp_decay", "amplitude": 0.5, "rate": 1, "ubar": 0.5, "mode": "iiss" },
//!   "integrator": { "h": 0.001, "tf": 60 }
//! }
//! ```
//!
//! Multi-species runs add `"species": [{ "m": 1, "a": 1 }]`, initial `"y"`
//! values and optionally `"epsilon"` (default 0.1). Only the integrator block
//! has defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::certificates::{multi_certificate, settling_time, ubar_limit, Certificate};
use crate::disturbance::{DisturbanceKind, DisturbanceMode, DisturbanceSpec};
use crate::error::{ChemostatError, Result};
use crate::integrator::IntegratorConfig;
use crate::model::{AugmentedState, ModelParams, SpeciesGrowth, State};
use crate::simulate::{simulate_multi, simulate_single};
use crate::trajectory::Trajectory;

pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalConfig {
    Zero,
    ExpDecay {
        amplitude: f64,
        rate: f64,
    },
    Const {
        u1: f64,
        u2: f64,
    },
    /// Piecewise constant with pieces of length `interval` (default `10 h`).
    Random {
        seed: u64,
        #[serde(default)]
        interval: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceConfig {
    #[serde(flatten)]
    pub signal: SignalConfig,
    pub ubar: f64,
    pub mode: DisturbanceMode,
}

impl DisturbanceConfig {
    /// Checks `ubar` against the admissible range of the mode and builds the
    /// signal over the integration horizon.
    pub fn build(&self, params: &ModelParams, cfg: &IntegratorConfig) -> Result<DisturbanceSpec> {
        let limit = ubar_limit(params, self.mode);
        if !(self.ubar > 0.0 && self.ubar < limit) {
            return Err(ChemostatError::DisturbanceOutOfRange {
                ubar: self.ubar,
                limit,
                mode: self.mode.as_str().into(),
            });
        }
        let kind = match self.signal {
            SignalConfig::Zero => DisturbanceKind::Zero,
            SignalConfig::ExpDecay { amplitude, rate } => DisturbanceKind::ExpDecay { amplitude, rate },
            SignalConfig::Const { u1, u2 } => DisturbanceKind::Const { u1, u2 },
            SignalConfig::Random { seed, interval } => {
                let interval = interval.unwrap_or(10.0 * cfg.h);
                return DisturbanceSpec::random(seed, self.ubar, self.mode, cfg.t0, cfg.tf, interval);
            }
        };
        DisturbanceSpec::new(kind, self.ubar, self.mode)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default)]
    pub trajectory: Option<PathBuf>,
    #[serde(default)]
    pub certificate: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub params: ModelParams,
    pub initial: AugmentedState,
    pub disturbance: DisturbanceConfig,
    #[serde(default)]
    pub species: Vec<SpeciesGrowth>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub outputs: OutputPaths,
}

/// A finished run: the trajectory and the certificate it is checked against.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub certificate: Certificate,
}

fn line_of(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map_or(1, |i| i + 1)
}

impl Scenario {
    /// Parses and validates a scenario. Errors carry the line and column of
    /// the offending entry.
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| ChemostatError::Config {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let at = |key: &str, err: ChemostatError| ChemostatError::Config {
            line: line_of(text, key),
            column: 1,
            message: err.to_string(),
        };
        scenario.integrator.validate().map_err(|e| at("integrator", e))?;
        scenario
            .disturbance
            .build(&scenario.params, &scenario.integrator)
            .map_err(|e| at("disturbance", e))?;
        if !scenario.initial.is_admissible() {
            return Err(at(
                "initial",
                ChemostatError::Domain("initial state needs S > 0, x > 0 and y_i >= 0".into()),
            ));
        }
        if scenario.initial.y.len() != scenario.species.len() {
            return Err(at(
                "initial",
                ChemostatError::InvalidConfig(format!(
                    "{} initial competitor values for {} species",
                    scenario.initial.y.len(),
                    scenario.species.len()
                )),
            ));
        }
        if scenario.is_multi() && scenario.disturbance.signal != SignalConfig::Zero {
            return Err(at(
                "disturbance",
                ChemostatError::InvalidConfig("multi-species runs are undisturbed; use kind \"zero\"".into()),
            ));
        }
        if let Some(eps) = scenario.epsilon {
            if !(eps > 0.0) {
                return Err(at("epsilon", ChemostatError::InvalidConfig("epsilon must be positive".into())));
            }
        }
        Ok(scenario)
    }

    pub fn is_multi(&self) -> bool {
        !self.species.is_empty()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(DEFAULT_EPSILON)
    }

    pub fn certificate(&self) -> Result<Certificate> {
        Certificate::new(self.params, Some(self.disturbance.ubar), self.disturbance.mode)
    }

    pub fn run(&self) -> Result<RunOutput> {
        let mut certificate = self.certificate()?;
        let disturbance = self.disturbance.build(&self.params, &self.integrator)?;
        let mut trajectory = if self.is_multi() {
            let mut mc = multi_certificate(&self.params, &self.species, self.epsilon(), self.integrator.t0)?;
            let traj = simulate_multi(
                self.params,
                &self.species,
                &certificate,
                &mc,
                &self.initial,
                &self.integrator,
            )?;
            mc.t_settle = settling_time(&traj, mc.epsilon).ok_or_else(|| {
                ChemostatError::MissingData(format!(
                    "S never settles below 1 + {} within the horizon",
                    mc.epsilon
                ))
            })?;
            certificate.multi = Some(mc);
            traj
        } else {
            simulate_single(
                self.params,
                &disturbance,
                &certificate,
                State::new(self.initial.s, self.initial.x),
                &self.integrator,
            )?
        };
        trajectory.meta.scenario_id = self.id.clone();
        Ok(RunOutput {
            trajectory,
            certificate,
        })
    }
}
