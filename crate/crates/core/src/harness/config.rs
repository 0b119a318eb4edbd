//! Scenario files. Unknown keys are rejected everywhere; the JSON Schema in
//! `docs/scenario.schema.json` describes the same structure.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamic::{GreedyAlgorithm, OpCostModel};
use crate::error::{Result, SelectError};
use crate::exec::derive_seed;
use crate::scene::{prism_scene, NoiseParams, Scene, SceneGenerator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub master_seed: u64,
    pub scene: SceneSource,
    /// Independent scenes (generator) or independent seeds (fixed scenes).
    #[serde(default = "one")]
    pub experiments: usize,
    pub m_values: Vec<usize>,
    #[serde(default)]
    pub algorithms: Vec<AlgorithmSpec>,
    /// Dynamic suite only: how many grid targets per scene to select for
    /// (all of them when absent).
    #[serde(default)]
    pub targets_per_experiment: Option<usize>,
    /// Dynamic suite only: Monte-Carlo trials per selected subset for the
    /// `mse` column (skipped when absent).
    #[serde(default)]
    pub mse_trials: Option<usize>,
    /// Largest exhaustive search (subsets x grid points) attempted.
    #[serde(default = "default_cap")]
    pub enumeration_cap: u64,
}

fn one() -> usize {
    1
}

fn default_cap() -> u64 {
    crate::dynamic::DEFAULT_ENUMERATION_CAP as u64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneSource {
    /// Random scene per experiment; experiment `e` uses generator seed
    /// `derive_seed(seed, [e])`.
    Generator(SceneGenerator),
    /// One fixed scene for every experiment.
    Explicit(Scene),
    /// Two stacked regular polygons with every sensor at radius `d_s`.
    Prism(PrismSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrismSpec {
    pub sides: usize,
    pub half_height: f64,
    pub d_s: f64,
    pub d_max: f64,
    pub g: usize,
    #[serde(default)]
    pub noise: NoiseParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    GssT {
        #[serde(default)]
        cost: OpCostModel,
    },
    GssF {
        #[serde(default)]
        cost: OpCostModel,
    },
    Bof {
        #[serde(default)]
        cost: OpCostModel,
    },
    Exhaustive,
    Relaxed,
    RoundTopM,
    Ico,
    Dcp {
        kappa: f64,
        #[serde(default = "default_n_dcp")]
        n_starts: usize,
        #[serde(default = "default_eps_conv")]
        eps_conv: f64,
    },
    Dmo {
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    ExhaustiveRobust,
}

fn default_n_dcp() -> usize {
    20
}
fn default_eps_conv() -> f64 {
    0.05
}
fn default_mu() -> f64 {
    100.0
}
fn default_delta() -> f64 {
    0.05
}

impl AlgorithmSpec {
    /// Name used in the `algorithm` CSV column.
    pub fn label(&self) -> String {
        match self {
            AlgorithmSpec::GssT { .. } => "gss_t".into(),
            AlgorithmSpec::GssF { .. } => "gss_f".into(),
            AlgorithmSpec::Bof { .. } => "bof".into(),
            AlgorithmSpec::Exhaustive => "exhaustive".into(),
            AlgorithmSpec::Relaxed => "relaxed".into(),
            AlgorithmSpec::RoundTopM => "round_top_m".into(),
            AlgorithmSpec::Ico => "ico".into(),
            AlgorithmSpec::Dcp { .. } => "dcp".into(),
            AlgorithmSpec::Dmo { .. } => "dmo".into(),
            AlgorithmSpec::ExhaustiveRobust => "exhaustive_robust".into(),
        }
    }

    pub fn greedy(&self) -> Option<(GreedyAlgorithm, OpCostModel)> {
        match self {
            AlgorithmSpec::GssT { cost } => Some((GreedyAlgorithm::GssT, *cost)),
            AlgorithmSpec::GssF { cost } => Some((GreedyAlgorithm::GssF, *cost)),
            AlgorithmSpec::Bof { cost } => Some((GreedyAlgorithm::Bof, *cost)),
            _ => None,
        }
    }

    pub fn is_dynamic(&self) -> bool {
        self.greedy().is_some() || matches!(self, AlgorithmSpec::Exhaustive)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuiteKind {
    Dynamic,
    Robust,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| SelectError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| SelectError::Config(format!("{}: {e}", path.display())))
    }

    /// Semantic checks that the schema cannot express.
    pub fn validate(&self, kind: SuiteKind) -> Result<()> {
        let bad = |msg: String| Err(SelectError::Config(msg));
        if self.experiments == 0 {
            return bad("experiments must be >= 1".into());
        }
        let n = match &self.scene {
            SceneSource::Generator(g) => g.m_max,
            SceneSource::Explicit(s) => {
                s.validate()?;
                s.sensor_count()
            }
            SceneSource::Prism(p) => 2 * p.sides,
        };
        for &m in &self.m_values {
            if m == 0 || m > n {
                return bad(format!("M={m} outside 1..={n}"));
            }
        }
        for alg in &self.algorithms {
            match (kind, alg.is_dynamic()) {
                (SuiteKind::Dynamic, false) => return bad(format!("{} is not a dynamic algorithm", alg.label())),
                (SuiteKind::Robust, true) => return bad(format!("{} is not a robust algorithm", alg.label())),
                _ => {}
            }
            match alg {
                AlgorithmSpec::Dcp { kappa, n_starts, eps_conv } => {
                    if !(*kappa >= 0.0) || *n_starts == 0 || !(*eps_conv > 0.0) {
                        return bad("dcp needs kappa >= 0, n_starts >= 1, eps_conv > 0".into());
                    }
                }
                AlgorithmSpec::Dmo { mu, delta } => {
                    if !(*mu > 0.0) || !(*delta > 0.0 && *delta < 1.0) {
                        return bad("dmo needs mu > 0 and 0 < delta < 1".into());
                    }
                }
                _ => {}
            }
        }
        if kind == SuiteKind::Dynamic && self.targets_per_experiment == Some(0) {
            return bad("targets_per_experiment must be >= 1".into());
        }
        if kind == SuiteKind::Robust && (self.targets_per_experiment.is_some() || self.mse_trials.is_some()) {
            return bad("targets_per_experiment and mse_trials apply to the dynamic suite only".into());
        }
        if self.mse_trials == Some(0) {
            return bad("mse_trials must be >= 1".into());
        }
        Ok(())
    }

    /// The scene used by experiment `e`.
    pub fn scene_for(&self, e: usize) -> Result<Scene> {
        match &self.scene {
            SceneSource::Generator(g) => SceneGenerator { seed: derive_seed(g.seed, &[e as u64]), ..g.clone() }.generate(),
            SceneSource::Explicit(s) => Ok(s.clone()),
            SceneSource::Prism(p) => prism_scene(p.sides, p.half_height, p.d_s, p.d_max, p.g, &p.noise),
        }
    }
}
