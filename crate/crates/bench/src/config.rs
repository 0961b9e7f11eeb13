//! Experiment configuration file.

use std::path::Path;

use crossing_core::model::ModelConfig;
use crossing_core::pomcp::SolverConfig;
use crossing_core::sim::SimConfig;
use crossing_core::ConfigError;
use serde::{Deserialize, Serialize};

use crate::BenchError;

/// Threshold policy settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TtcConfig {
    /// Threshold of the baseline policy (s).
    pub threshold: f64,
    /// Threshold of the TTC rollout inside the planner (s).
    pub rollout_threshold: f64,
}

impl Default for TtcConfig {
    fn default() -> Self {
        Self {
            threshold: 4.5,
            rollout_threshold: 4.5,
        }
    }
}

/// Every tunable of an experiment. Missing keys take the defaults.
///
/// `model` is what the planner assumes, `sim` is the ground truth; they
/// share the decision period.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub model: ModelConfig,
    pub sim: SimConfig,
    pub solver: SolverConfig,
    pub ttc: TtcConfig,
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: BenchConfig = toml::from_str(text).map_err(|e| BenchError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        self.sim.validate()?;
        self.solver.validate()?;
        if (self.model.dt - self.sim.dt).abs() > 1e-12 {
            return Err(ConfigError::invalid("model.dt", "must equal sim.dt"));
        }
        if !(self.ttc.threshold >= 0.0 && self.ttc.rollout_threshold >= 0.0) {
            return Err(ConfigError::invalid("ttc", "thresholds must be non-negative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let cfg = BenchConfig::default();
        assert_eq!(BenchConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let cfg = BenchConfig::from_toml("[sim]\ndensity = 0.5\n[solver]\ntree_queries = 100\n").unwrap();
        assert_eq!(cfg.sim.density, 0.5);
        assert_eq!(cfg.solver.tree_queries, 100);
        assert_eq!(cfg.solver.depth, 15);
        assert_eq!(cfg.model.reward.collision_penalty, -2000.0);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(BenchConfig::from_toml("[sim]\ndensity = 1.5\n").is_err());
        assert!(BenchConfig::from_toml("[sim]\ndt = 0.1\n").is_err());
        assert!(BenchConfig::from_toml("[solver]\nbogus = 1\n").is_err());
    }
}
