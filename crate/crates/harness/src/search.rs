use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use embclust_core::embedspace::{load_bundle, DatasetBundle, PipelineConfig};

use crate::error::{HarnessError, Result};
use crate::pipeline::{run_pipeline, RunOptions};

/// One search dataset and its weight in the stage score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchDataset {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    pub weight: f64,
    #[serde(default)]
    pub stream: Option<String>,
}

/// One line search over a single parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchStage {
    /// Dotted path into the pipeline config, e.g. `clusterer.damping`.
    /// Empty for the whole config.
    pub parameter: String,
    pub candidates: Vec<Value>,
    /// Rescale each dataset's scores by their maximum before weighting.
    /// Defaults to true for distance-threshold stages: the parameter path or
    /// an object candidate names `distance_threshold`.
    #[serde(default)]
    pub relative_to_max: Option<bool>,
    /// Indices into the spec's datasets; all when absent.
    #[serde(default)]
    pub datasets: Option<Vec<usize>>,
}

impl SearchStage {
    pub fn rescales(&self) -> bool {
        self.relative_to_max.unwrap_or_else(|| {
            self.parameter.ends_with("distance_threshold")
                || self
                    .candidates
                    .iter()
                    .any(|c| c.get("distance_threshold").is_some())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    /// Seed used for every evaluation.
    #[serde(default = "search_seed")]
    pub seed: u64,
    pub base: PipelineConfig,
    pub datasets: Vec<SearchDataset>,
    pub stages: Vec<SearchStage>,
}

fn search_seed() -> u64 {
    crate::seeds::SEARCH_SEED
}

impl SearchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(HarnessError::Config(
                "search needs at least one dataset".into(),
            ));
        }
        for (i, d) in self.datasets.iter().enumerate() {
            if !(d.weight > 0.0 && d.weight.is_finite()) {
                return Err(HarnessError::Config(format!(
                    "dataset {i} weight must be positive, got {}",
                    d.weight
                )));
            }
        }
        for s in &self.stages {
            if s.candidates.is_empty() {
                return Err(HarnessError::Config(format!(
                    "stage '{}' has no candidates",
                    s.parameter
                )));
            }
            if let Some(ix) = &s.datasets {
                if ix.is_empty() || ix.iter().any(|&i| i >= self.datasets.len()) {
                    return Err(HarnessError::Config(format!(
                        "stage '{}' dataset indices {ix:?} out of range",
                        s.parameter
                    )));
                }
            }
        }
        self.base.validate()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut spec: SearchSpec = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for d in &mut spec.datasets {
            if let Some(m) = &mut d.manifest {
                if m.is_relative() {
                    *m = base.join(&*m);
                }
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateReport {
    pub value: Value,
    /// Raw score per stage dataset.
    pub scores: Vec<f64>,
    /// Weighted score after optional rescaling; `None` for failed candidates.
    pub weighted: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub parameter: String,
    pub datasets: Vec<usize>,
    pub rescaled: bool,
    pub candidates: Vec<CandidateReport>,
    pub chosen: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchOutcome {
    pub config: PipelineConfig,
    pub stages: Vec<StageReport>,
}

/// Sets `value` at a dotted path. An object whose keys all exist in the
/// target object merges into it; anything else replaces the target.
pub fn apply_candidate(
    config: &PipelineConfig,
    path: &str,
    value: &Value,
) -> Result<PipelineConfig> {
    let mut root = serde_json::to_value(config).expect("config serializes");
    let mut slot = &mut root;
    for part in path.split('.').filter(|p| !p.is_empty()) {
        let obj = slot.as_object_mut().ok_or_else(|| {
            HarnessError::Config(format!("'{path}': '{part}' is not inside an object"))
        })?;
        slot = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    merge(slot, value);
    let cfg: PipelineConfig = serde_json::from_value(root)
        .map_err(|e| HarnessError::Config(format!("'{path}' = {value}: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn merge(slot: &mut Value, value: &Value) {
    match (slot, value) {
        (Value::Object(dst), Value::Object(src)) if src.keys().all(|k| dst.contains_key(k)) => {
            for (k, v) in src {
                merge(dst.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (slot, value) => *slot = value.clone(),
    }
}

/// Divides every score by the maximum when that maximum is positive.
pub fn rescale_to_max(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > 0.0 {
        scores.iter().map(|s| s / max).collect()
    } else {
        scores.to_vec()
    }
}

/// Index of the largest score; ties go to the earliest.
fn argmax(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Line search, one parameter per stage. `evaluate(dataset, config)`
/// scores a config on one dataset; it is called exactly once per
/// (candidate, stage dataset) pair with `config.seed == spec.seed`.
/// The returned config keeps the base seed.
pub fn staged_search<F>(spec: &SearchSpec, evaluate: F) -> Result<SearchOutcome>
where
    F: Fn(usize, &PipelineConfig) -> Result<f64> + Sync,
{
    spec.validate()?;
    let mut frozen = spec.base.clone();
    let mut reports = Vec::with_capacity(spec.stages.len());
    for stage in &spec.stages {
        let ds: Vec<usize> = stage
            .datasets
            .clone()
            .unwrap_or_else(|| (0..spec.datasets.len()).collect());
        let rescaled = stage.rescales();
        let candidates: Vec<Result<PipelineConfig>> = stage
            .candidates
            .iter()
            .map(|v| apply_candidate(&frozen, &stage.parameter, v))
            .collect();

        let jobs: Vec<(usize, usize)> = (0..candidates.len())
            .filter(|&c| candidates[c].is_ok())
            .flat_map(|c| ds.iter().map(move |&d| (c, d)))
            .collect();
        let results: Vec<Result<f64>> = jobs
            .par_iter()
            .map(|&(c, d)| {
                let cfg = candidates[c]
                    .as_ref()
                    .expect("filtered")
                    .clone()
                    .with_seed(spec.seed);
                evaluate(d, &cfg)
            })
            .collect();

        let mut raw: Vec<std::result::Result<Vec<f64>, String>> = candidates
            .iter()
            .map(|c| match c {
                Ok(_) => Ok(Vec::with_capacity(ds.len())),
                Err(e) => Err(e.to_string()),
            })
            .collect();
        for (&(c, d), r) in jobs.iter().zip(results) {
            let failure = match (&mut raw[c], r) {
                (Ok(scores), Ok(s)) => {
                    scores.push(s);
                    None
                }
                (Ok(_), Err(e)) => Some(format!("dataset {d}: {e}")),
                (Err(_), _) => None,
            };
            if let Some(f) = failure {
                raw[c] = Err(f);
            }
        }

        // per-dataset columns over the surviving candidates
        let mut adjusted: Vec<Option<Vec<f64>>> =
            raw.iter().map(|r| r.as_ref().ok().cloned()).collect();
        if rescaled {
            for j in 0..ds.len() {
                let alive: Vec<usize> = (0..adjusted.len())
                    .filter(|&c| adjusted[c].is_some())
                    .collect();
                let column: Vec<f64> = alive
                    .iter()
                    .map(|&c| adjusted[c].as_ref().unwrap()[j])
                    .collect();
                for (&c, v) in alive.iter().zip(rescale_to_max(&column)) {
                    adjusted[c].as_mut().unwrap()[j] = v;
                }
            }
        }
        let wsum: f64 = ds.iter().map(|&d| spec.datasets[d].weight).sum();
        let weighted: Vec<Option<f64>> = adjusted
            .iter()
            .map(|a| {
                a.as_ref().map(|s| {
                    s.iter()
                        .zip(&ds)
                        .map(|(v, &d)| spec.datasets[d].weight * v)
                        .sum::<f64>()
                        / wsum
                })
            })
            .collect();

        let Some(chosen) = argmax(&weighted) else {
            let detail: Vec<String> = stage
                .candidates
                .iter()
                .zip(&raw)
                .map(|(v, r)| {
                    format!(
                        "{v}: {}",
                        r.as_ref().err().map_or("nan score", |e| e.as_str())
                    )
                })
                .collect();
            return Err(HarnessError::Search(format!(
                "every candidate of stage '{}' failed: {}",
                stage.parameter,
                detail.join("; ")
            )));
        };
        frozen = candidates[chosen]
            .as_ref()
            .expect("chosen is valid")
            .clone();
        log::info!(
            "stage '{}': chose {} (score {:.4})",
            stage.parameter,
            stage.candidates[chosen],
            weighted[chosen].unwrap_or(f64::NAN)
        );
        reports.push(StageReport {
            parameter: stage.parameter.clone(),
            datasets: ds,
            rescaled,
            candidates: stage
                .candidates
                .iter()
                .zip(raw)
                .zip(weighted)
                .map(|((v, r), w)| {
                    let (scores, error) = match r {
                        Ok(s) => (s, None),
                        Err(e) => (Vec::new(), Some(e)),
                    };
                    CandidateReport {
                        value: v.clone(),
                        scores,
                        weighted: w,
                        error,
                    }
                })
                .collect(),
            chosen,
        });
    }
    Ok(SearchOutcome {
        config: frozen,
        stages: reports,
    })
}

/// Loads every search bundle from its manifest.
pub fn load_search_bundles(spec: &SearchSpec) -> Result<Vec<DatasetBundle>> {
    spec.datasets
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let m = d.manifest.as_ref().ok_or_else(|| {
                HarnessError::Config(format!("search dataset {i} has no manifest"))
            })?;
            Ok(load_bundle(m)?)
        })
        .collect()
}

/// Evaluator scoring a config by AMI of the full pipeline.
pub fn pipeline_evaluator<'a>(
    spec: &'a SearchSpec,
    bundles: &'a [DatasetBundle],
) -> impl Fn(usize, &PipelineConfig) -> Result<f64> + Sync + 'a {
    move |d, cfg| {
        let opts = RunOptions {
            stream: spec.datasets[d].stream.clone(),
            silhouette_subsample: None,
            skip_silhouette: true,
        };
        Ok(run_pipeline(&bundles[d], cfg, &opts)?.result.ami)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use embclust_core::cluster::{ApParams, ClustererSpec, Stop};
    use embclust_core::reduce::ReductionSpec;
    use serde_json::json;

    fn base() -> PipelineConfig {
        PipelineConfig::new(
            ReductionSpec::None,
            ClustererSpec::AffinityPropagation(ApParams::default()),
        )
    }

    fn datasets(weights: &[f64]) -> Vec<SearchDataset> {
        weights
            .iter()
            .map(|&weight| SearchDataset {
                name: None,
                manifest: None,
                weight,
                stream: None,
            })
            .collect()
    }

    fn damping(cfg: &PipelineConfig) -> f64 {
        match &cfg.clusterer {
            ClustererSpec::AffinityPropagation(p) => p.damping,
            _ => unreachable!(),
        }
    }

    #[test]
    fn weighted_hand_example() {
        let spec = SearchSpec {
            seed: 100,
            base: base(),
            datasets: datasets(&[2.0, 1.0, 1.0]),
            stages: vec![SearchStage {
                parameter: "clusterer.damping".into(),
                candidates: vec![json!(0.6), json!(0.7)],
                relative_to_max: None,
                datasets: None,
            }],
        };
        let table = [[0.6, 0.5, 0.5], [0.5, 0.7, 0.7]];
        let out = staged_search(&spec, |d, cfg| {
            assert_eq!(cfg.seed, 100);
            Ok(if damping(cfg) == 0.6 {
                table[0][d]
            } else {
                table[1][d]
            })
        })
        .unwrap();
        let st = &out.stages[0];
        assert!((st.candidates[0].weighted.unwrap() - 0.55).abs() < 1e-12);
        assert!((st.candidates[1].weighted.unwrap() - 0.60).abs() < 1e-12);
        assert_eq!(st.chosen, 1);
        assert_eq!(damping(&out.config), 0.7);
        assert_eq!(out.config.seed, base().seed);
    }

    #[test]
    fn rescale_divides_by_max() {
        assert_eq!(rescale_to_max(&[0.2, 0.4, 0.1]), [0.5, 1.0, 0.25]);
        assert_eq!(rescale_to_max(&[-0.1, 0.0]), [-0.1, 0.0]);
    }

    #[test]
    fn single_candidate_frozen() {
        let spec = SearchSpec {
            seed: 100,
            base: base(),
            datasets: datasets(&[1.0]),
            stages: vec![SearchStage {
                parameter: "clusterer.damping".into(),
                candidates: vec![json!(0.55)],
                relative_to_max: None,
                datasets: None,
            }],
        };
        let out = staged_search(&spec, |_, _| Ok(0.0)).unwrap();
        assert_eq!(damping(&out.config), 0.55);
    }

    #[test]
    fn call_counts_and_freezing() {
        let spec = SearchSpec {
            seed: 100,
            base: base(),
            datasets: datasets(&[2.0, 1.0, 1.0]),
            stages: vec![
                SearchStage {
                    parameter: "clusterer.damping".into(),
                    candidates: vec![json!(0.5), json!(0.8), json!(0.9)],
                    relative_to_max: None,
                    datasets: None,
                },
                SearchStage {
                    parameter: "clusterer.convergence_iter".into(),
                    candidates: vec![json!(10), json!(20)],
                    relative_to_max: None,
                    datasets: Some(vec![0]),
                },
            ],
        };
        let calls = AtomicUsize::new(0);
        let stage2_dampings = std::sync::Mutex::new(Vec::new());
        let out = staged_search(&spec, |_, cfg| {
            calls.fetch_add(1, Ordering::SeqCst);
            let ClustererSpec::AffinityPropagation(p) = &cfg.clusterer else {
                unreachable!()
            };
            if p.convergence_iter != 15 {
                stage2_dampings.lock().unwrap().push(p.damping);
            }
            Ok(p.damping - (p.convergence_iter as f64 - 20.0).abs() / 100.0)
        })
        .unwrap();
        // 3 candidates x 3 datasets, then 2 candidates x 1 dataset
        assert_eq!(calls.load(Ordering::SeqCst), 11);
        assert!(stage2_dampings.lock().unwrap().iter().all(|&d| d == 0.9));
        let ClustererSpec::AffinityPropagation(p) = &out.config.clusterer else {
            unreachable!()
        };
        assert_eq!((p.damping, p.convergence_iter), (0.9, 20));
    }

    #[test]
    fn threshold_stage_rescales_per_dataset() {
        // unweighted, dataset 1 dominates the raw sum; rescaled, both count
        let base = PipelineConfig::new(
            ReductionSpec::None,
            serde_json::from_value(json!({
                "kind": "agglomerative", "linkage": "average",
                "stop": {"distance_threshold": 1.0}
            }))
            .unwrap(),
        );
        let spec = SearchSpec {
            seed: 100,
            base,
            datasets: datasets(&[1.0, 1.0]),
            stages: vec![SearchStage {
                parameter: "clusterer.stop.distance_threshold".into(),
                candidates: vec![json!(0.5), json!(1.0)],
                relative_to_max: None,
                datasets: None,
            }],
        };
        let scores = |t: f64| if t == 0.5 { [0.1, 0.9] } else { [0.2, 0.6] };
        let out = staged_search(&spec, |d, cfg| {
            let ClustererSpec::Agglomerative(p) = &cfg.clusterer else {
                unreachable!()
            };
            let Stop::DistanceThreshold(t) = p.stop else {
                unreachable!()
            };
            Ok(scores(t)[d])
        })
        .unwrap();
        let st = &out.stages[0];
        assert!(st.rescaled);
        // raw means 0.5 vs 0.4; rescaled (0.5+1)/2 = 0.75 vs (1+0.667)/2 = 0.833
        assert_eq!(st.chosen, 1);
    }

    #[test]
    fn invalid_and_failing_candidates() {
        let spec = SearchSpec {
            seed: 100,
            base: base(),
            datasets: datasets(&[1.0]),
            stages: vec![SearchStage {
                parameter: "clusterer.damping".into(),
                candidates: vec![json!(1.5), json!("x"), json!(0.8)],
                relative_to_max: None,
                datasets: None,
            }],
        };
        let out = staged_search(&spec, |_, _| Ok(0.3)).unwrap();
        let st = &out.stages[0];
        assert!(st.candidates[0].error.is_some());
        assert!(st.candidates[1].error.is_some());
        assert_eq!(st.chosen, 2);

        let err = staged_search(&spec, |_, _| Err(HarnessError::Data("no".into()))).unwrap_err();
        assert!(matches!(err, HarnessError::Search(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn ties_go_to_first() {
        let spec = SearchSpec {
            seed: 100,
            base: base(),
            datasets: datasets(&[1.0]),
            stages: vec![SearchStage {
                parameter: "clusterer.damping".into(),
                candidates: vec![json!(0.6), json!(0.7), json!(0.8)],
                relative_to_max: None,
                datasets: None,
            }],
        };
        let out = staged_search(&spec, |_, cfg| {
            Ok(if damping(cfg) == 0.6 { 0.1 } else { 0.5 })
        })
        .unwrap();
        assert_eq!(out.stages[0].chosen, 1);
    }

    #[test]
    fn merge_and_replace() {
        let cfg = PipelineConfig::new(
            ReductionSpec::None,
            serde_json::from_value(json!({
                "kind": "agglomerative", "linkage": "average",
                "stop": {"distance_threshold": 1.0}
            }))
            .unwrap(),
        );
        let out = apply_candidate(
            &cfg,
            "clusterer",
            &json!({"metric": "cosine", "linkage": "single"}),
        )
        .unwrap();
        let ClustererSpec::Agglomerative(p) = &out.clusterer else {
            unreachable!()
        };
        assert_eq!(p.stop, Stop::DistanceThreshold(1.0));
        assert_eq!(p.linkage.to_string(), "single");

        let out = apply_candidate(&cfg, "reduction", &json!({"kind": "pca", "dims": 8})).unwrap();
        assert_eq!(out.reduction, ReductionSpec::pca_dims(8));
        assert!(apply_candidate(&cfg, "clusterer.linkage", &json!("median")).is_err());

        let with_c = apply_candidate(&cfg, "clusterer.stop", &json!({"n_clusters": 4})).unwrap();
        let ClustererSpec::Agglomerative(p) = &with_c.clusterer else {
            unreachable!()
        };
        assert_eq!(p.stop, Stop::NClusters(4.into()));
        let stage = SearchStage {
            parameter: "clusterer.stop".into(),
            candidates: vec![json!({"distance_threshold": 0.5})],
            relative_to_max: None,
            datasets: None,
        };
        assert!(stage.rescales());
    }
}
