//! TOML run configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_rows, Vector};
use crate::model::{ConstraintSpec, LtiSystem, NoiseFamily, NoiseModel, ProblemInstance};
use crate::setops::Polytope;
use crate::synthesis::{TighteningOptions, DEFAULT_GENERATORS, DEFAULT_MPI_MAX_ITER};
use crate::tube_mpc::DEFAULT_XI_PENALTY;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: usize,
    pub initial_state: Vec<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub system: SystemSection,
    pub noise: NoiseSection,
    pub constraints: ConstraintSection,
    pub cost: CostSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub tightening: TighteningSection,
    #[serde(default)]
    pub simulation: SimulationSection,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub covariance: Vec<Vec<f64>>,
    #[serde(default = "default_family")]
    pub family: NoiseFamily,
}

fn default_family() -> NoiseFamily {
    NoiseFamily::Gaussian
}

/// A set given either as per-coordinate bounds or as `{x : A x <= b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    #[serde(default)]
    pub bounds: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
}

impl SetSpec {
    fn to_polytope(&self, what: &str) -> Result<Polytope> {
        match (&self.bounds, &self.a, &self.b) {
            (Some(bounds), None, None) => {
                let pairs: Vec<(f64, f64)> = bounds.iter().map(|[l, u]| (*l, *u)).collect();
                Polytope::from_box(&pairs)
            }
            (None, Some(a), Some(b)) => Polytope::new(from_rows(a)?, Vector::from_vec(b.clone())),
            _ => Err(Error::Config(format!(
                "{what}: give either `bounds` or both `a` and `b`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    pub state: SetSpec,
    #[serde(default)]
    pub input: Option<SetSpec>,
    pub p_bar_x: f64,
    #[serde(default)]
    pub p_bar_u: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_xi_penalty")]
    pub xi_penalty: f64,
}

fn default_xi_penalty() -> f64 {
    DEFAULT_XI_PENALTY
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            xi_penalty: DEFAULT_XI_PENALTY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TighteningSection {
    #[serde(default = "default_generators")]
    pub generators: usize,
    #[serde(default)]
    pub scale_family: Option<NoiseFamily>,
    #[serde(default = "default_mpi_max_iter")]
    pub mpi_max_iter: usize,
}

fn default_generators() -> usize {
    DEFAULT_GENERATORS
}

fn default_mpi_max_iter() -> usize {
    DEFAULT_MPI_MAX_ITER
}

impl Default for TighteningSection {
    fn default() -> Self {
        TighteningSection {
            generators: DEFAULT_GENERATORS,
            scale_family: None,
            mpi_max_iter: DEFAULT_MPI_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_steps() -> usize {
    50
}

fn default_trials() -> usize {
    1000
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            steps: default_steps(),
            trials: default_trials(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn instance(&self) -> Result<ProblemInstance> {
        let config_err = |e: Error| Error::Config(e.to_string());
        let system = LtiSystem::new(from_rows(&self.system.a)?, from_rows(&self.system.b)?)
            .map_err(config_err)?;
        let noise = NoiseModel {
            covariance: from_rows(&self.noise.covariance)?,
            family: self.noise.family,
        };
        let c = &self.constraints;
        let constraints = ConstraintSpec {
            state_set: c.state.to_polytope("constraints.state")?,
            input_set: c
                .input
                .as_ref()
                .map(|s| s.to_polytope("constraints.input"))
                .transpose()?,
            p_bar_x: c.p_bar_x,
            p_bar_u: c.p_bar_u,
        };
        if constraints.input_set.is_some() != constraints.p_bar_u.is_some() {
            return Err(Error::Config(
                "constraints.input and constraints.p_bar_u must be given together".into(),
            ));
        }
        Ok(ProblemInstance {
            system,
            noise,
            constraints,
            q: from_rows(&self.cost.q)?,
            r: from_rows(&self.cost.r)?,
            horizon: self.horizon,
            x0: Vector::from_vec(self.initial_state.clone()),
        })
    }

    pub fn tightening_options(&self) -> TighteningOptions {
        TighteningOptions {
            generators: self.tightening.generators,
            scale_family: self.tightening.scale_family,
            mpi_max_iter: self.tightening.mpi_max_iter,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
horizon = 15
initial_state = [1.0, 1.0]

[system]
a = [[1.0, 0.0075], [-0.143, 0.996]]
b = [[4.798], [0.115]]

[noise]
covariance = [[0.1, 0.0], [0.0, 0.1]]

[constraints]
state = { bounds = [[-2.0, 2.0], [-2.0, 2.0]] }
p_bar_x = 0.6

[cost]
q = [[1.0, 0.0], [0.0, 10.0]]
r = [[10.0]]
"#;

    #[test]
    fn parses_and_builds_instance() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        let inst = cfg.instance().unwrap();
        assert_eq!(inst, crate::case_study::case_study_instance());
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.tightening_options(), TighteningOptions::default());
    }

    #[test]
    fn round_trips() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_key_rejected() {
        let text = SAMPLE.replace("[cost]", "[cost]\nextra = 1");
        assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let text = SAMPLE.replace("b = [[4.798], [0.115]]", "b = [[4.798]]");
        assert!(RunConfig::from_toml(&text).unwrap().instance().is_err());
    }
}
