//! Scenario documents (JSON) and their validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Bioreactor, Evaluator, Metabolism, State7};
use crate::kinetics::KineticParams;
use crate::lp::{MetabolicNetwork, NetworkError};
use crate::oxygen::{OxygenProblem, SigmaParams, State5};
use crate::schedule::{ControlSchedule, ScheduleFile};
use crate::surrogate::SurrogateCoeffs;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// Network given inline or as a path relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSource {
    Path(PathBuf),
    Inline(crate::lp::NetworkFile),
}

/// On-disk layout of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub kinetic: KineticParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<SurrogateCoeffs>,
    pub x0: [f64; 7],
    pub feed_rate_l_per_h: f64,
    pub t_final_h: f64,
    pub step_h: f64,
    #[serde(default)]
    pub oxygen_concentration_g_per_l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<SigmaParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_schedule: Option<ScheduleFile>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Network(MetabolicNetwork),
    Surrogate(SurrogateCoeffs),
}

/// How the metabolism is evaluated during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Surrogate,
    Lp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kinetic: KineticParams,
    pub model: Model,
    pub x0: State7,
    pub feed_rate: f64,
    pub t_final: f64,
    pub step: f64,
    pub oxygen: f64,
    pub sigma: Option<SigmaParams>,
    pub fixed_schedule: Option<ControlSchedule>,
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

fn network_error(e: NetworkError) -> ScenarioError {
    invalid(format!("network: {e}"))
}

impl Scenario {
    /// Validates a parsed document; relative network paths resolve against `base`.
    pub fn from_file(f: ScenarioFile, base: &Path) -> Result<Self, ScenarioError> {
        f.kinetic.validate().map_err(|e| invalid(e.to_string()))?;
        let model = match (f.network, f.surrogate) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(invalid("exactly one of `network` and `surrogate` must be given"));
            }
            (Some(NetworkSource::Inline(nf)), None) => Model::Network(MetabolicNetwork::try_from(nf).map_err(network_error)?),
            (Some(NetworkSource::Path(p)), None) => Model::Network(load_network(&base.join(p))?),
            (None, Some(s)) => {
                if !s.is_finite() {
                    return Err(invalid("surrogate coefficients must be finite"));
                }
                Model::Surrogate(s)
            }
        };
        for (i, v) in f.x0.iter().enumerate() {
            if !v.is_finite() || (i < 6 && *v < 0.0) {
                return Err(invalid(format!("x0[{i}] must be finite and >= 0 (got {v})")));
            }
        }
        if !(f.x0[6] > 0.0) {
            return Err(invalid(format!("x0[6] (volume) must be > 0 (got {})", f.x0[6])));
        }
        if !(f.feed_rate_l_per_h > 0.0 && f.feed_rate_l_per_h.is_finite()) {
            return Err(invalid(format!("feed_rate_l_per_h must be > 0 (got {})", f.feed_rate_l_per_h)));
        }
        if !(f.t_final_h > 0.0 && f.t_final_h.is_finite()) {
            return Err(invalid(format!("t_final_h must be > 0 (got {})", f.t_final_h)));
        }
        check_step(f.step_h, f.t_final_h)?;
        if !(f.oxygen_concentration_g_per_l >= 0.0) {
            return Err(invalid("oxygen_concentration_g_per_l must be >= 0"));
        }
        if let Some(s) = &f.sigma {
            s.validate().map_err(|e| invalid(e.to_string()))?;
        }
        let fixed_schedule = f
            .fixed_schedule
            .map(|s| ControlSchedule::try_from(s).map_err(|e| invalid(format!("fixed_schedule: {e}"))))
            .transpose()?;
        if let Some(s) = &fixed_schedule {
            if (s.t_final() - f.t_final_h).abs() > 1e-12 * f.t_final_h {
                return Err(invalid("fixed_schedule.knots_h must end at t_final_h"));
            }
        }
        Ok(Scenario {
            kinetic: f.kinetic,
            model,
            x0: State7::from(f.x0),
            feed_rate: f.feed_rate_l_per_h,
            t_final: f.t_final_h,
            step: f.step_h,
            oxygen: f.oxygen_concentration_g_per_l,
            sigma: f.sigma,
            fixed_schedule,
        })
    }

    pub fn to_file(&self) -> ScenarioFile {
        let (network, surrogate) = match &self.model {
            Model::Network(n) => (Some(NetworkSource::Inline(n.clone().into())), None),
            Model::Surrogate(s) => (None, Some(*s)),
        };
        let mut x0 = [0.0; 7];
        x0.copy_from_slice(self.x0.as_slice());
        ScenarioFile {
            kinetic: self.kinetic,
            network,
            surrogate,
            x0,
            feed_rate_l_per_h: self.feed_rate,
            t_final_h: self.t_final,
            step_h: self.step,
            oxygen_concentration_g_per_l: self.oxygen,
            sigma: self.sigma,
            fixed_schedule: self.fixed_schedule.clone().map(Into::into),
        }
    }

    pub fn with_step(mut self, h: f64) -> Result<Self, ScenarioError> {
        check_step(h, self.t_final)?;
        self.step = h;
        Ok(self)
    }

    /// Model used when no mode is requested.
    pub fn default_mode(&self) -> Mode {
        match self.model {
            Model::Network(_) => Mode::Lp,
            Model::Surrogate(_) => Mode::Surrogate,
        }
    }

    /// Surrogate in effect: given directly, or the basis sensitivity of the
    /// network at `x0`.
    pub fn surrogate(&self) -> Result<SurrogateCoeffs, ScenarioError> {
        match &self.model {
            Model::Surrogate(s) => Ok(*s),
            Model::Network(_) => {
                let sys = self.reactor_with(Metabolism::Network(self.network().expect("network model").clone()));
                Evaluator::new(&sys).local_coeffs(&self.x0).map_err(|e| invalid(format!("network sensitivity at x0: {e}")))
            }
        }
    }

    pub fn network(&self) -> Option<&MetabolicNetwork> {
        match &self.model {
            Model::Network(n) => Some(n),
            Model::Surrogate(_) => None,
        }
    }

    fn reactor_with(&self, metabolism: Metabolism) -> Bioreactor {
        Bioreactor { kinetics: self.kinetic, feed_rate: self.feed_rate, metabolism, oxygen: self.oxygen }
    }

    pub fn bioreactor(&self, mode: Mode) -> Result<Bioreactor, ScenarioError> {
        let metabolism = match mode {
            Mode::Lp => Metabolism::Network(
                self.network().ok_or_else(|| invalid("--mode lp needs a scenario with `network`"))?.clone(),
            ),
            Mode::Surrogate => Metabolism::Surrogate(self.surrogate()?),
        };
        Ok(self.reactor_with(metabolism))
    }

    pub fn oxygen_problem(&self) -> Result<OxygenProblem, ScenarioError> {
        let sigma = self.sigma.ok_or_else(|| invalid("oxygen runs need `sigma`"))?;
        Ok(OxygenProblem { kinetics: self.kinetic, feed_rate: self.feed_rate, surrogate: self.surrogate()?, sigma })
    }

    /// `(x3, x4, x5, x6, x7)` of the initial state.
    pub fn reduced_x0(&self) -> State5 {
        State5::from([self.x0[2], self.x0[3], self.x0[4], self.x0[5], self.x0[6]])
    }
}

fn check_step(h: f64, t_f: f64) -> Result<(), ScenarioError> {
    if !(h > 0.0 && h <= t_f / 10.0) {
        return Err(invalid(format!("step_h must satisfy 0 < step_h <= t_final_h/10 (got {h}, t_final_h = {t_f})")));
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_owned(), source })
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, ScenarioError> {
    serde_json::from_str(text).map_err(|e| ScenarioError::Parse { path: path.to_owned(), message: e.to_string() })
}

pub fn load_network(path: &Path) -> Result<MetabolicNetwork, ScenarioError> {
    let file: crate::lp::NetworkFile = parse(path, &read(path)?)?;
    MetabolicNetwork::try_from(file).map_err(network_error)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = parse(path, &read(path)?)?;
    Scenario::from_file(file, path.parent().unwrap_or(Path::new(".")))
}

pub fn save_scenario(path: &Path, s: &Scenario) -> Result<(), ScenarioError> {
    let text = serde_json::to_string_pretty(&s.to_file()).expect("scenario serializes");
    std::fs::write(path, text + "\n").map_err(|source| ScenarioError::Io { path: path.to_owned(), source })
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ScenarioError> {
    parse(path, &read(path)?)
}
