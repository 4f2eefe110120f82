//! Scenario files: one TOML document naming the scene and carrying every
//! tunable of the stack. Paths are resolved relative to the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::TrackingConfig;
use crate::gait::{FrictionCoefficients, GaitError, GaitParams, ReductionMap, SimSettings};
use crate::perception::CameraModel;
use crate::planner::PlannerConfig;
use crate::scene::{Scene, SceneError};
use crate::world::{EpisodeConfig, LocalizationConfig, PerceptionConfig, SimMode, WorldError};

pub const CONFIG_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("unsupported config format {found}, expected {CONFIG_FORMAT}")]
    Format { found: u32 },
    #[error("scene {path}: {source}")]
    Scene {
        path: PathBuf,
        #[source]
        source: SceneError,
    },
    #[error("reduction map {path}: {source}")]
    Map {
        path: PathBuf,
        #[source]
        source: GaitError,
    },
    #[error("invalid config: {0}")]
    Invalid(#[from] WorldError),
    #[error("invalid sweep grid: {0}")]
    Sweep(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub amplitudes: Vec<f64>,
    pub kappas: Vec<f64>,
    pub settle_cycles: usize,
    pub average_cycles: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            amplitudes: vec![0.005, 0.01, 0.015, 0.02],
            kappas: (0..9).map(|i| -2.0 + 0.5 * i as f64).collect(),
            settle_cycles: 4,
            average_cycles: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub format: u32,
    pub scene: PathBuf,
    #[serde(default)]
    pub reduction_map: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: SimMode,
    #[serde(default = "default_budget")]
    pub budget_cycles: usize,
    #[serde(default)]
    pub gait: GaitParams,
    #[serde(default)]
    pub friction: FrictionCoefficients,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub camera: CameraModel,
    #[serde(default)]
    pub perception: PerceptionConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub controller: TrackingConfig,
    #[serde(default)]
    pub localization: LocalizationConfig,
}

fn default_budget() -> usize {
    EpisodeConfig::default().budget_cycles
}

/// A parsed scenario with its referenced files loaded.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub scene: Scene,
    pub map: Option<ReductionMap>,
    pub scene_path: PathBuf,
}

impl ScenarioConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        if cfg.format != CONFIG_FORMAT {
            return Err(ConfigError::Format { found: cfg.format });
        }
        Ok(cfg)
    }

    pub fn episode(&self) -> EpisodeConfig {
        EpisodeConfig {
            seed: self.seed,
            mode: self.mode,
            budget_cycles: self.budget_cycles,
            gait: self.gait,
            friction: self.friction,
            sim: self.sim,
            camera: self.camera,
            perception: self.perception,
            planner: self.planner,
            controller: self.controller,
            localization: self.localization,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.episode().validate()?;
        let s = &self.sweep;
        if s.amplitudes.is_empty() || s.kappas.is_empty() {
            return Err(ConfigError::Sweep("empty grid".into()));
        }
        if s.settle_cycles == 0 || s.average_cycles == 0 {
            return Err(ConfigError::Sweep("cycle counts must be positive".into()));
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a scenario file, its scene, and its reduction map if one is named.
pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let config = ScenarioConfig::parse(&read(path)?, path)?;
    config.validate()?;
    let base = path.parent().unwrap_or(Path::new("."));
    let scene_path = base.join(&config.scene);
    let scene = Scene::parse(&read(&scene_path)?).map_err(|source| ConfigError::Scene {
        path: scene_path.clone(),
        source,
    })?;
    let map = match &config.reduction_map {
        Some(rel) => {
            let p = base.join(rel);
            Some(
                ReductionMap::from_text(&read(&p)?)
                    .map_err(|source| ConfigError::Map { path: p, source })?,
            )
        }
        None => None,
    };
    Ok(Scenario {
        config,
        scene,
        map,
        scene_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg =
            ScenarioConfig::parse("format = 1\nscene = \"a.toml\"\n", Path::new("x")).unwrap();
        assert_eq!(cfg.episode(), EpisodeConfig::default());
        assert_eq!(cfg.sweep.kappas.len(), 9);
        assert_eq!(cfg.sweep.kappas[8], 2.0);
    }

    #[test]
    fn sections_override_and_unknown_keys_fail() {
        let text = "format = 1\nscene = \"a.toml\"\nseed = 9\nmode = \"high-fidelity\"\n\
                    [planner]\ncandidates = 7\n[controller]\nk_cross = 0.9\n";
        let cfg = ScenarioConfig::parse(text, Path::new("x")).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.mode, SimMode::HighFidelity);
        assert_eq!(cfg.planner.candidates, 7);
        assert_eq!(cfg.planner.horizon, 0.5);
        assert_eq!(cfg.controller.k_cross, 0.9);
        let bad = "format = 1\nscene = \"a.toml\"\n[planner]\nwidth = 3\n";
        assert!(matches!(
            ScenarioConfig::parse(bad, Path::new("x")),
            Err(ConfigError::Parse { .. })
        ));
        let v2 = "format = 2\nscene = \"a.toml\"\n";
        assert!(matches!(
            ScenarioConfig::parse(v2, Path::new("x")),
            Err(ConfigError::Format { found: 2 })
        ));
    }

    #[test]
    fn invalid_values_rejected() {
        let text = "format = 1\nscene = \"a.toml\"\n[planner]\ncandidates = 4\n";
        let cfg = ScenarioConfig::parse(text, Path::new("x")).unwrap();
        assert!(cfg.validate().is_err());
    }
}
