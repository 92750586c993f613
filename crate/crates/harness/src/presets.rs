use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use embclust_core::cluster::{ClusterCount, ClustererSpec, Stop};
use embclust_core::embedspace::PipelineConfig;

use crate::error::{HarnessError, Result};

/// Clusterer keys in report order.
pub const CLUSTERERS: [&str; 6] = [
    "kmeans",
    "spectral",
    "ac_with_c",
    "ac_without_c",
    "ap",
    "hdbscan",
];

const PAPER: &str = include_str!("../presets/paper.json");

/// Per-encoder pipeline configs, keyed by encoder then clusterer.
///
/// `ac_with_c` may be omitted; it is derived from `ac_without_c` by
/// replacing the distance threshold with the class count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub encoders: BTreeMap<String, BTreeMap<String, PipelineConfig>>,
}

impl Preset {
    pub fn from_json(text: &str) -> Result<Self> {
        let preset: Preset =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("preset: {e}")))?;
        preset.validate()?;
        Ok(preset)
    }

    /// A shipped preset by name.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "paper" => Self::from_json(PAPER),
            other => Err(HarnessError::Config(format!(
                "unknown preset '{other}' (available: paper)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (enc, table) in &self.encoders {
            for (key, cfg) in table {
                if !CLUSTERERS.contains(&key.as_str()) {
                    return Err(HarnessError::Config(format!(
                        "preset '{}': encoder '{enc}' has unknown clusterer key '{key}'",
                        self.name
                    )));
                }
                cfg.validate()?;
                if cfg.clusterer.short_name() != key {
                    return Err(HarnessError::Config(format!(
                        "preset '{}': '{enc}/{key}' holds a {} config",
                        self.name,
                        cfg.clusterer.short_name()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn encoder_names(&self) -> impl Iterator<Item = &str> {
        self.encoders.keys().map(String::as_str)
    }

    /// Config for one (encoder, clusterer) pair.
    pub fn config(&self, encoder: &str, clusterer: &str) -> Result<PipelineConfig> {
        let table = self.encoders.get(encoder).ok_or_else(|| {
            HarnessError::Config(format!("preset '{}' has no encoder '{encoder}'", self.name))
        })?;
        if let Some(cfg) = table.get(clusterer) {
            return Ok(cfg.clone());
        }
        if clusterer == "ac_with_c" {
            if let Some(base) = table.get("ac_without_c") {
                return Ok(with_cluster_count(base));
            }
        }
        Err(HarnessError::Config(format!(
            "preset '{}' has no '{clusterer}' config for encoder '{encoder}'",
            self.name
        )))
    }

    /// All six configs of one encoder in [`CLUSTERERS`] order.
    pub fn configs(&self, encoder: &str) -> Result<Vec<(&'static str, PipelineConfig)>> {
        CLUSTERERS
            .iter()
            .map(|&c| self.config(encoder, c).map(|cfg| (c, cfg)))
            .collect()
    }
}

/// The agglomerative config cut at the class count instead of a threshold.
pub fn with_cluster_count(config: &PipelineConfig) -> PipelineConfig {
    let mut out = config.clone();
    if let ClustererSpec::Agglomerative(p) = &mut out.clusterer {
        p.stop = Stop::NClusters(ClusterCount::AUTO);
    }
    out
}
