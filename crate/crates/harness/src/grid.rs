use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use embclust_core::embedspace::{
    load_bundle, DatasetBundle, EmbeddingMatrix, NoisePolicy, PipelineConfig,
};

use crate::error::{HarnessError, Result};
use crate::pipeline::{run_pipeline_with, RunOptions};
use crate::presets::{Preset, CLUSTERERS};
use crate::seeds::{cell_seed, config_hash};
use crate::table::{Cell, FailedCell, ResultsTable};

/// One bundle to evaluate under one encoder's configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDataset {
    pub encoder: String,
    pub manifest: PathBuf,
    /// Dataset column in the results; the bundle's own name when absent.
    #[serde(default)]
    pub name: Option<String>,
    /// Label stream to score against; the first stream when absent.
    #[serde(default)]
    pub stream: Option<String>,
}

/// Grid manifest: datasets plus either a preset or explicit configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub datasets: Vec<GridDataset>,
    #[serde(default)]
    pub preset: Option<String>,
    /// Clusterer key to config, shared by every encoder.
    #[serde(default)]
    pub configs: Option<BTreeMap<String, PipelineConfig>>,
    /// Subset of clusterer keys to run; all available when absent.
    #[serde(default)]
    pub clusterers: Option<Vec<String>>,
}

impl GridSpec {
    /// Reads a grid file; relative manifest paths resolve against its folder.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut spec: GridSpec = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for d in &mut spec.datasets {
            if d.manifest.is_relative() {
                d.manifest = base.join(&d.manifest);
            }
        }
        Ok(spec)
    }
}

/// Run-wide settings of `evaluate`.
#[derive(Debug, Clone)]
pub struct GridOptions {
    pub seed: u64,
    /// Worker threads; rayon's default when `None`.
    pub workers: Option<usize>,
    /// Overrides every config's noise policy.
    pub noise_policy: Option<NoisePolicy>,
    pub silhouette_subsample: Option<usize>,
    /// Preset used when the grid names none.
    pub default_preset: Option<String>,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            seed: crate::seeds::FINAL_SEED,
            workers: None,
            noise_policy: None,
            silhouette_subsample: None,
            default_preset: None,
        }
    }
}

enum ConfigSource {
    Preset(Preset),
    Explicit(BTreeMap<String, PipelineConfig>),
}

impl ConfigSource {
    fn resolve(spec: &GridSpec, opts: &GridOptions) -> Result<Self> {
        match (&spec.configs, &spec.preset) {
            (Some(_), Some(_)) => Err(HarnessError::Config(
                "grid sets both 'preset' and 'configs'".into(),
            )),
            (Some(c), None) => Ok(ConfigSource::Explicit(c.clone())),
            (None, p) => match p.as_ref().or(opts.default_preset.as_ref()) {
                Some(name) => Ok(ConfigSource::Preset(Preset::builtin(name)?)),
                None => Err(HarnessError::Config(
                    "grid needs 'preset' or 'configs' (or --preset)".into(),
                )),
            },
        }
    }

    fn configs(&self, encoder: &str, keys: &[String]) -> Result<Vec<(String, PipelineConfig)>> {
        keys.iter()
            .map(|k| {
                let cfg = match self {
                    ConfigSource::Preset(p) => p.config(encoder, k)?,
                    ConfigSource::Explicit(m) => m.get(k).cloned().ok_or_else(|| {
                        HarnessError::Config(format!("grid has no config for clusterer '{k}'"))
                    })?,
                };
                Ok((k.clone(), cfg))
            })
            .collect()
    }

    fn default_keys(&self) -> Vec<String> {
        match self {
            ConfigSource::Preset(_) => CLUSTERERS.iter().map(|s| s.to_string()).collect(),
            ConfigSource::Explicit(m) => m.keys().cloned().collect(),
        }
    }
}

enum CellOutcome {
    Done(Cell),
    Failed(FailedCell),
}

/// Evaluates every (dataset, clusterer) cell of the grid.
///
/// Cells run in parallel; results come back in grid order. Each cell is
/// seeded from (global seed, encoder, dataset), so scheduling never changes
/// the output. Failures are recorded, never raised.
pub fn evaluate_grid(spec: &GridSpec, opts: &GridOptions) -> Result<ResultsTable> {
    let source = ConfigSource::resolve(spec, opts)?;
    let keys = spec
        .clusterers
        .clone()
        .unwrap_or_else(|| source.default_keys());
    let mut plans = Vec::with_capacity(spec.datasets.len());
    for d in &spec.datasets {
        let mut configs = source.configs(&d.encoder, &keys)?;
        for (_, c) in &mut configs {
            if let Some(p) = opts.noise_policy {
                c.noise_policy = p;
            }
            c.seed = opts.seed;
            c.validate()?;
        }
        plans.push((d, configs));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Vec<CellOutcome>> = pool.install(|| {
        plans
            .par_iter()
            .map(|(d, configs)| evaluate_dataset(d, configs, opts))
            .collect()
    });

    let mut table = ResultsTable::new();
    for o in outcomes.into_iter().flatten() {
        match o {
            CellOutcome::Done(c) => table.push(c)?,
            CellOutcome::Failed(f) => {
                log::warn!(
                    "{}/{}/{} failed: {}",
                    f.encoder,
                    f.dataset,
                    f.clusterer,
                    f.error
                );
                table.push_failure(f);
            }
        }
    }
    Ok(table)
}

fn evaluate_dataset(
    d: &GridDataset,
    configs: &[(String, PipelineConfig)],
    opts: &GridOptions,
) -> Vec<CellOutcome> {
    let fail = |dataset: &str, key: &str, cfg: &PipelineConfig, err: &dyn std::fmt::Display| {
        CellOutcome::Failed(FailedCell {
            encoder: d.encoder.clone(),
            dataset: dataset.to_string(),
            clusterer: key.to_string(),
            seed: opts.seed,
            config_hash: config_hash(cfg),
            error: err.to_string(),
        })
    };
    let bundle = match load_bundle(&d.manifest) {
        Ok(b) => b,
        Err(e) => {
            let name = d
                .name
                .clone()
                .unwrap_or_else(|| d.manifest.display().to_string());
            return configs.iter().map(|(k, c)| fail(&name, k, c, &e)).collect();
        }
    };
    let dataset = d.name.clone().unwrap_or_else(|| bundle.name.clone());
    let seed = cell_seed(opts.seed, &d.encoder, &dataset);
    let run_opts = RunOptions {
        stream: d.stream.clone(),
        silhouette_subsample: opts.silhouette_subsample,
        skip_silhouette: false,
    };

    // one reduction per distinct spec, shared by the clusterers using it
    let mut distinct = Vec::new();
    for (_, c) in configs {
        if !distinct.contains(&c.reduction) {
            distinct.push(c.reduction.clone());
        }
    }
    let reduced: Vec<_> = distinct
        .par_iter()
        .map(|r| reduce(&bundle, r, seed))
        .collect();

    configs
        .par_iter()
        .map(|(key, cfg)| {
            let idx = distinct
                .iter()
                .position(|r| *r == cfg.reduction)
                .expect("listed");
            let x = match &reduced[idx] {
                Ok(x) => x,
                Err(e) => return fail(&dataset, key, cfg, e),
            };
            let run_cfg = cfg.clone().with_seed(seed);
            match run_pipeline_with(&bundle, &run_cfg, &run_opts, Some(x)) {
                Ok(out) => CellOutcome::Done(Cell::from_result(
                    &d.encoder,
                    &dataset,
                    key,
                    &out.result,
                    opts.seed,
                    &config_hash(cfg),
                )),
                Err(e) => fail(&dataset, key, cfg, &e),
            }
        })
        .collect()
}

fn reduce(
    bundle: &DatasetBundle,
    r: &embclust_core::reduce::ReductionSpec,
    seed: u64,
) -> std::result::Result<EmbeddingMatrix, HarnessError> {
    Ok(r.apply(&bundle.embeddings, seed)?)
}
