use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{ControllerConfig, Reference, SafetyFilter};
use crate::error::{Error, Result};
use crate::fxt_id::{AdaptOptions, AdaptationGains, AdaptationScheme, DecayRate, DEFAULT_NU_FLOOR};
use crate::observables::{make_monomial_basis, make_sinusoid_basis, BasisSet};
use crate::plant::{IntegrationMethod, NoiseModel, State, WindField, STATE_DIM};
use crate::safety::ObstacleCbf;

pub const SCHEMA_VERSION: u32 = 1;

/// Full description of one closed-loop experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub plant: PlantConfig,
    pub wind: WindField,
    pub noise: NoiseConfig,
    pub basis: BasisConfig,
    pub adaptation: AdaptationConfig,
    pub safety: SafetyConfig,
    pub controller: ControllerConfig,
    pub reference: Reference,
    pub integration: IntegrationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub initial_state: State,
}

/// Noise levels; the seed is supplied per run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma_x: f64,
    pub sigma_xdot: f64,
}

impl NoiseConfig {
    pub fn model(&self, enabled: bool, seed: u64) -> NoiseModel {
        if enabled {
            NoiseModel {
                sigma_x: self.sigma_x,
                sigma_xdot: self.sigma_xdot,
                seed,
            }
        } else {
            NoiseModel { seed, ..NoiseModel::off() }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisConfig {
    Sinusoid {
        harmonics: Vec<u32>,
        states: Vec<usize>,
        include_constant: bool,
    },
    Monomial {
        degree: u32,
        states: Vec<usize>,
        include_constant: bool,
    },
}

impl BasisConfig {
    pub fn build(&self, state_dim: usize) -> Result<BasisSet> {
        match self {
            BasisConfig::Sinusoid {
                harmonics,
                states,
                include_constant,
            } => make_sinusoid_basis(state_dim, harmonics, states, *include_constant),
            BasisConfig::Monomial {
                degree,
                states,
                include_constant,
            } => make_monomial_basis(state_dim, states, *degree, *include_constant),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationConfig {
    /// Target settling time; `Gamma = gamma I` is chosen to meet it.
    pub settling_time: f64,
    pub a: f64,
    pub b: f64,
    pub w: f64,
    /// Certified lower bound on `sigma_N(Psi)` over the run.
    pub s: f64,
    #[serde(default = "default_nu_floor")]
    pub nu_floor: f64,
    #[serde(default)]
    pub scheme: AdaptationScheme,
    #[serde(default)]
    pub decay_rate: DecayRate,
    /// Refit period of the batch baseline (seconds).
    pub batch_refit_period: f64,
}

fn default_nu_floor() -> f64 {
    DEFAULT_NU_FLOOR
}

impl AdaptationConfig {
    pub fn gains(&self, n_obs: usize) -> Result<AdaptationGains> {
        AdaptationGains::for_settling_time(n_obs, self.settling_time, self.a, self.b, self.w, self.s)
    }

    pub fn options(&self) -> AdaptOptions {
        AdaptOptions {
            scheme: self.scheme,
            nu_floor: self.nu_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyConfig {
    pub obstacles: Vec<ObstacleConfig>,
    pub k1: f64,
    pub alpha_gain: f64,
    /// `Omega = omega I` for the robust-adaptive barrier.
    pub omega: f64,
}

impl SafetyConfig {
    pub fn filter(&self) -> Result<SafetyFilter> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::Config(format!("omega must be positive (got {})", self.omega)));
        }
        let obstacles = self
            .obstacles
            .iter()
            .map(|o| ObstacleCbf::new(o.center, o.radius, self.k1, self.alpha_gain))
            .collect::<Result<Vec<_>>>()?;
        Ok(SafetyFilter {
            obstacles,
            omega_diag: vec![self.omega; STATE_DIM],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub method: IntegrationMethod,
    /// Keep every `decimation`-th row when writing CSV.
    pub decimation: usize,
}

impl IntegrationConfig {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

impl ScenarioConfig {
    /// The planar quadrotor-in-wind case study.
    pub fn paper_case_study() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            plant: PlantConfig {
                initial_state: [0.0; 4],
            },
            wind: WindField::default(),
            noise: NoiseConfig {
                sigma_x: 1e-3,
                sigma_xdot: 1e-2,
            },
            basis: BasisConfig::Sinusoid {
                harmonics: vec![1, 2],
                states: vec![0, 1, 2, 3],
                include_constant: true,
            },
            adaptation: AdaptationConfig {
                settling_time: 0.12,
                a: 1.0,
                b: 1.0,
                w: 4.0,
                s: 1.0,
                nu_floor: DEFAULT_NU_FLOOR,
                scheme: AdaptationScheme::FrozenExact,
                decay_rate: DecayRate::SettlingConsistent,
                batch_refit_period: 0.5,
            },
            safety: SafetyConfig {
                obstacles: vec![
                    ObstacleConfig {
                        center: [-2.5, 0.0],
                        radius: 1.5,
                    },
                    ObstacleConfig {
                        center: [2.0, -1.0],
                        radius: 1.5,
                    },
                ],
                k1: 1.0,
                alpha_gain: 1.0,
                omega: 1.0,
            },
            controller: ControllerConfig::default(),
            reference: Reference::default(),
            integration: IntegrationConfig {
                dt: 1e-3,
                horizon: 20.0,
                method: IntegrationMethod::Rk4,
                decimation: 10,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.plant.initial_state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("initial state must be finite".into()));
        }
        self.wind.validate()?;
        self.noise.model(true, 0).validate()?;
        let basis = self.basis.build(STATE_DIM)?;
        self.adaptation.gains(basis.len())?;
        let a = &self.adaptation;
        if !(a.nu_floor >= 0.0) {
            return Err(Error::Config("nu_floor must be nonnegative".into()));
        }
        if !(a.batch_refit_period > 0.0) {
            return Err(Error::Config("batch_refit_period must be positive".into()));
        }
        self.safety.filter()?;
        self.controller.validate()?;
        if !(self.reference.amplitude.is_finite() && self.reference.omega.is_finite()) {
            return Err(Error::Config("reference parameters must be finite".into()));
        }
        let i = &self.integration;
        if !(i.dt > 0.0 && i.dt.is_finite()) || !(i.horizon > 0.0 && i.horizon.is_finite()) {
            return Err(Error::Config(format!("dt and horizon must be positive (dt = {}, horizon = {})", i.dt, i.horizon)));
        }
        if i.steps() == 0 {
            return Err(Error::Config("horizon shorter than one step".into()));
        }
        if i.decimation == 0 {
            return Err(Error::Config("decimation must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = ScenarioConfig::paper_case_study();
        let text = cfg.to_json().unwrap();
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v: serde_json::Value = serde_json::to_value(ScenarioConfig::paper_case_study()).unwrap();
        v["integration"]["bogus"] = serde_json::json!(1);
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::to_value(ScenarioConfig::paper_case_study()).unwrap();
        v["basis"]["extra"] = serde_json::json!(true);
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::to_value(ScenarioConfig::paper_case_study()).unwrap();
        v["top_level"] = serde_json::json!(0);
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let mut cfg = ScenarioConfig::paper_case_study();
        cfg.schema_version = 99;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn case_study_basis_has_seventeen_functions() {
        let cfg = ScenarioConfig::paper_case_study();
        assert_eq!(cfg.basis.build(STATE_DIM).unwrap().len(), 17);
    }
}
