//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use lowdev_core::deviation::ModelSpec;
use lowdev_core::distributions::{OffspringLaw, StepFamily, StepLaw};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub model: ModelConfig,
    #[serde(default)]
    pub tasks: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub theta: f64,
    pub a: f64,
    pub offspring: OffspringLaw,
    pub step: StepFamily,
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec, CliError> {
        let step = StepLaw::new(self.step.clone()).map_err(CliError::from_model)?;
        ModelSpec::new(self.offspring.clone(), step, self.theta, self.a).map_err(CliError::from_model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.from],
            k => (0..k).map(|i| self.from + (self.to - self.from) * i as f64 / (k - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    Particle,
    #[default]
    LatticeCohort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyChoice {
    Schroder,
    BottcherUniform,
    BottcherGeometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    /// Rate constant of the model, its curves, and an optional sweep in `a`.
    Rates {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a_sweep: Option<Sweep>,
    },
    /// Level-set counts at `θ·x*·n` for each `θ` in `thetas`.
    Simulate {
        n_max: usize,
        runs: u64,
        #[serde(default)]
        mode: SimMode,
        thetas: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<(usize, usize)>,
    },
    /// Importance-sampling estimate of `P(S_n ≤ −xn)`.
    Oracle { x: f64, n: usize, reps: usize },
    Strategy {
        strategy: StrategyChoice,
        n: usize,
        reps: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<f64>,
        #[serde(default = "default_rho_points")]
        rho_points: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l_prime: Option<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        deltas: Vec<f64>,
    },
    /// Regime table over extra models.
    Table { models: Vec<ModelConfig> },
}

fn default_rho_points() -> usize {
    20
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Rates,
    Simulate,
    Oracle,
    Strategy,
    Table,
}

impl Task {
    pub fn kind(&self) -> TaskKind {
        match self {
            Task::Rates { .. } => TaskKind::Rates,
            Task::Simulate { .. } => TaskKind::Simulate,
            Task::Oracle { .. } => TaskKind::Oracle,
            Task::Strategy { .. } => TaskKind::Strategy,
            Task::Table { .. } => TaskKind::Table,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Normalized TOML text; parsing it gives back the same config.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config types serialize to TOML")
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7

[model]
theta = 0.3
a = 0.1
offspring = { probs = [[1, 0.5], [2, 0.5]] }
step = { family = "rademacher", s = 1.0 }

[[tasks]]
kind = "rates"
a_sweep = { from = 0.0, to = 0.2, points = 5 }

[[tasks]]
kind = "simulate"
n_max = 12
runs = 3
thetas = [0.0, 0.5]
window = [4, 12]

[[tasks]]
kind = "strategy"
strategy = "bottcher_geometric"
n = 40
reps = 10
deltas = [0.05, 0.1]
"#;

    #[test]
    fn canonical_text_round_trips() {
        let c = ExperimentConfig::parse(SAMPLE).unwrap();
        let text = c.canonical();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.canonical(), text);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(SAMPLE).unwrap();
        match &c.tasks[1] {
            Task::Simulate { mode, .. } => assert_eq!(*mode, SimMode::LatticeCohort),
            t => panic!("unexpected {t:?}"),
        }
        match &c.tasks[2] {
            Task::Strategy { rho_points, .. } => assert_eq!(*rho_points, 20),
            t => panic!("unexpected {t:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = SAMPLE.replace("seed = 7", "seed = 7\nsed = 8");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(CliError::Config(_))));
        let bad = SAMPLE.replace("[[1, 0.5], [2, 0.5]]", "[[1, 0.5], [2, 0.6]]");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn sweep_values() {
        assert_eq!(Sweep { from: 0.0, to: 1.0, points: 3 }.values(), vec![0.0, 0.5, 1.0]);
        assert!(Sweep { from: 0.0, to: 1.0, points: 0 }.values().is_empty());
    }
}
