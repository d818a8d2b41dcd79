//! Top-level run configuration (TOML). Command-line flags override it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logprob::Rounding;
use crate::machine::Mode;
use crate::stochastic::{RngMode, Strategy, TieBreak};
use crate::tasks::TaskKind;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    /// Generator used by `gen` when no spec file is given.
    pub task: Option<TaskKind>,
    /// Synthetic task spec file, relative to the config file.
    pub spec: Option<PathBuf>,
    pub machine: MachineSection,
    pub train: TrainSection,
    pub sweep: SweepSection,
    pub energy: EnergySection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MachineSection {
    pub mode: Option<Mode>,
    pub width: Option<u32>,
    pub strategy: Option<Strategy>,
    pub budget: Option<u32>,
    pub ber: Option<f64>,
    pub rng_mode: Option<RngMode>,
    pub tie_break: Option<TieBreak>,
    pub rounding: Option<Rounding>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub bins: Option<usize>,
    /// Keep this many features, chosen by greedy forward selection.
    pub select: Option<usize>,
    pub smoothing: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BitsEntry {
    pub width: u32,
    pub budget: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub budgets: Option<Vec<u32>>,
    pub strategies: Option<Vec<Strategy>>,
    pub bers: Option<Vec<f64>>,
    pub bits: Option<Vec<BitsEntry>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergySection {
    /// Cost table file, relative to the config file. Defaults to the
    /// built-in example table.
    pub costs: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config and resolves its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_prefix(&e))))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.spec, &mut cfg.energy.costs, &mut cfg.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = RunConfig::from_toml_str(
            r#"
            seed = 7
            trials = 5
            task = "gesture_like"
            [machine]
            mode = "stochastic"
            width = 16
            strategy = "power_conscious"
            [sweep]
            budgets = [10, 20]
            bits = [{ width = 8, budget = 255 }]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.machine.width, Some(16));
        assert_eq!(cfg.machine.strategy, Some(Strategy::PowerConscious));
        assert_eq!(cfg.sweep.bits.unwrap()[0].budget, 255);
    }

    #[test]
    fn rejects_unknown_keys_with_line() {
        let e = RunConfig::from_toml_str("seed = 1\n[machine]\nwidht = 8\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn relative_paths_follow_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "spec = \"task.toml\"\n[energy]\ncosts = \"/abs/costs.toml\"\n",
        )
        .unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.spec.unwrap(), dir.path().join("task.toml"));
        assert_eq!(cfg.energy.costs.unwrap(), PathBuf::from("/abs/costs.toml"));
    }
}
