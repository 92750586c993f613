//! The clustering procedures and their configuration.

mod affinity;
mod agglomerative;
mod hdbscan;
mod kmeans;
mod spectral;

use serde::{Deserialize, Serialize};

pub use affinity::{affinity_propagation, ApResult};
pub use agglomerative::{agglomerative, dendrogram, AgglomerativeResult, Merge};
pub use hdbscan::{hdbscan, HdbscanResult};
pub use kmeans::{kmeans, KMeansResult};
pub use spectral::{spectral, SpectralResult};

use crate::distance::Metric;
use crate::embedspace::{ClusterAssignment, EmbeddingMatrix};
use crate::error::{Error, Result};

/// A cluster count, either fixed or taken from the number of ground-truth
/// classes at run time (`"auto"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClusterCount {
    Fixed(usize),
    Auto(AutoCount),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoCount {
    #[serde(rename = "auto")]
    Auto,
}

impl ClusterCount {
    pub const AUTO: ClusterCount = ClusterCount::Auto(AutoCount::Auto);

    pub fn fixed(self) -> Result<usize> {
        match self {
            ClusterCount::Fixed(k) => Ok(k),
            ClusterCount::Auto(_) => Err(Error::Config(
                "cluster count \"auto\" has not been resolved".into(),
            )),
        }
    }

    fn resolve(self, n_classes: usize) -> Self {
        match self {
            ClusterCount::Auto(_) => ClusterCount::Fixed(n_classes),
            fixed => fixed,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            ClusterCount::Fixed(0) => Err(Error::Config("cluster count must be >= 1".into())),
            _ => Ok(()),
        }
    }
}

impl From<usize> for ClusterCount {
    fn from(k: usize) -> Self {
        ClusterCount::Fixed(k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KMeansParams {
    pub k: ClusterCount,
    #[serde(default = "one")]
    pub n_init: usize,
    #[serde(default = "kmeans_tol")]
    pub tol: f64,
    #[serde(default = "thousand")]
    pub max_iter: usize,
}

impl KMeansParams {
    pub fn new(k: impl Into<ClusterCount>) -> Self {
        Self {
            k: k.into(),
            n_init: 1,
            tol: 1e-4,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelAssignment {
    #[default]
    ClusterQr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralParams {
    pub k: ClusterCount,
    #[serde(default = "ten")]
    pub n_neighbors: usize,
    #[serde(default)]
    pub assign: LabelAssignment,
}

impl SpectralParams {
    pub fn new(k: impl Into<ClusterCount>, n_neighbors: usize) -> Self {
        Self {
            k: k.into(),
            n_neighbors,
            assign: LabelAssignment::ClusterQr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Ward,
    Complete,
    Average,
    Single,
}

impl std::fmt::Display for Linkage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Linkage::Ward => "ward",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
            Linkage::Single => "single",
        };
        f.write_str(s)
    }
}

/// Where agglomeration stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stop {
    NClusters(ClusterCount),
    DistanceThreshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgglomerativeParams {
    #[serde(default)]
    pub metric: Metric,
    pub linkage: Linkage,
    pub stop: Stop,
}

impl AgglomerativeParams {
    pub fn new(metric: Metric, linkage: Linkage, stop: Stop) -> Self {
        Self {
            metric,
            linkage,
            stop,
        }
    }
}

/// Self-similarity on the diagonal of the similarity matrix: `"median"` or
/// a number.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum Preference {
    #[default]
    Median,
    Value(f64),
}

impl Serialize for Preference {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Preference::Median => s.serialize_str("median"),
            Preference::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Preference {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) if s == "median" => Ok(Preference::Median),
            serde_json::Value::Number(n) => n
                .as_f64()
                .map(Preference::Value)
                .ok_or_else(|| serde::de::Error::custom("preference out of range")),
            other => Err(serde::de::Error::custom(format!(
                "preference must be \"median\" or a number, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApParams {
    #[serde(default = "ap_damping")]
    pub damping: f64,
    #[serde(default = "thousand")]
    pub max_iter: usize,
    #[serde(default = "fifteen")]
    pub convergence_iter: usize,
    #[serde(default)]
    pub preference: Preference,
}

impl Default for ApParams {
    fn default() -> Self {
        Self {
            damping: 0.9,
            max_iter: 1000,
            convergence_iter: 15,
            preference: Preference::Median,
        }
    }
}

impl ApParams {
    pub fn with_damping(damping: f64) -> Self {
        Self {
            damping,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    Eom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HdbscanParams {
    #[serde(default = "five")]
    pub min_cluster_size: usize,
    /// Defaults to `min_cluster_size`.
    #[serde(default)]
    pub min_samples: Option<usize>,
    #[serde(default = "max_fraction")]
    pub max_cluster_size_fraction: f64,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default)]
    pub selection: Selection,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 5,
            min_samples: None,
            max_cluster_size_fraction: 0.2,
            metric: Metric::L2,
            selection: Selection::Eom,
        }
    }
}

impl HdbscanParams {
    pub fn with_metric(metric: Metric) -> Self {
        Self {
            metric,
            ..Default::default()
        }
    }

    pub fn min_samples(&self) -> usize {
        self.min_samples.unwrap_or(self.min_cluster_size)
    }

    /// Largest selectable cluster for `n` samples.
    pub fn max_cluster_size(&self, n: usize) -> usize {
        (self.max_cluster_size_fraction * n as f64 - 1e-9)
            .ceil()
            .max(1.0) as usize
    }
}

fn one() -> usize {
    1
}
fn five() -> usize {
    5
}
fn ten() -> usize {
    10
}
fn fifteen() -> usize {
    15
}
fn thousand() -> usize {
    1000
}
fn kmeans_tol() -> f64 {
    1e-4
}
fn ap_damping() -> f64 {
    0.9
}
fn max_fraction() -> f64 {
    0.2
}

/// Clusterer configuration, tagged by `"kind"` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClustererSpec {
    #[serde(alias = "k_means")]
    Kmeans(KMeansParams),
    Spectral(SpectralParams),
    #[serde(alias = "ac")]
    Agglomerative(AgglomerativeParams),
    #[serde(alias = "ap")]
    AffinityPropagation(ApParams),
    Hdbscan(HdbscanParams),
}

impl ClustererSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ClustererSpec::Kmeans(p) => {
                p.k.validate()?;
                if p.n_init == 0 || p.max_iter == 0 || p.tol.is_nan() || p.tol < 0.0 {
                    return Err(Error::Config(
                        "K-Means needs n_init >= 1, max_iter >= 1 and tol >= 0".into(),
                    ));
                }
            }
            ClustererSpec::Spectral(p) => {
                p.k.validate()?;
                if p.n_neighbors < 1 {
                    return Err(Error::Config("spectral n_neighbors must be >= 1".into()));
                }
            }
            ClustererSpec::Agglomerative(p) => {
                if p.linkage == Linkage::Ward && p.metric != Metric::L2 {
                    return Err(Error::Config(format!(
                        "ward linkage requires the L2 metric, got {}",
                        p.metric
                    )));
                }
                match p.stop {
                    Stop::NClusters(k) => k.validate()?,
                    Stop::DistanceThreshold(t) if !(t > 0.0 && t.is_finite()) => {
                        return Err(Error::Config(format!(
                            "distance threshold must be positive, got {t}"
                        )))
                    }
                    Stop::DistanceThreshold(_) => {}
                }
            }
            ClustererSpec::AffinityPropagation(p) => {
                if !(0.5..1.0).contains(&p.damping) {
                    return Err(Error::Config(format!(
                        "damping must lie in [0.5, 1), got {}",
                        p.damping
                    )));
                }
                if p.max_iter == 0 || p.convergence_iter == 0 {
                    return Err(Error::Config(
                        "affinity propagation needs max_iter and convergence_iter >= 1".into(),
                    ));
                }
                if let Preference::Value(v) = p.preference {
                    if !v.is_finite() {
                        return Err(Error::Config("preference must be finite".into()));
                    }
                }
            }
            ClustererSpec::Hdbscan(p) => {
                if p.min_cluster_size < 2 {
                    return Err(Error::Config(format!(
                        "min_cluster_size must be >= 2, got {}",
                        p.min_cluster_size
                    )));
                }
                if p.min_samples == Some(0) {
                    return Err(Error::Config("min_samples must be >= 1".into()));
                }
                if !(p.max_cluster_size_fraction > 0.0 && p.max_cluster_size_fraction <= 1.0) {
                    return Err(Error::Config(format!(
                        "max_cluster_size_fraction must lie in (0, 1], got {}",
                        p.max_cluster_size_fraction
                    )));
                }
            }
        }
        Ok(())
    }

    /// Replaces every `"auto"` cluster count with `n_classes`.
    pub fn resolve_auto(&self, n_classes: usize) -> ClustererSpec {
        let mut out = self.clone();
        match &mut out {
            ClustererSpec::Kmeans(p) => p.k = p.k.resolve(n_classes),
            ClustererSpec::Spectral(p) => p.k = p.k.resolve(n_classes),
            ClustererSpec::Agglomerative(p) => {
                if let Stop::NClusters(k) = p.stop {
                    p.stop = Stop::NClusters(k.resolve(n_classes));
                }
            }
            ClustererSpec::AffinityPropagation(_) | ClustererSpec::Hdbscan(_) => {}
        }
        out
    }

    /// Metric of an agglomerative clusterer cut by distance threshold.
    pub fn threshold_metric(&self) -> Option<Metric> {
        match self {
            ClustererSpec::Agglomerative(AgglomerativeParams {
                metric,
                stop: Stop::DistanceThreshold(_),
                ..
            }) => Some(*metric),
            _ => None,
        }
    }

    /// Short name: kmeans, spectral, ac_with_c, ac_without_c, ap, hdbscan.
    pub fn short_name(&self) -> &'static str {
        match self {
            ClustererSpec::Kmeans(_) => "kmeans",
            ClustererSpec::Spectral(_) => "spectral",
            ClustererSpec::Agglomerative(AgglomerativeParams {
                stop: Stop::NClusters(_),
                ..
            }) => "ac_with_c",
            ClustererSpec::Agglomerative(_) => "ac_without_c",
            ClustererSpec::AffinityPropagation(_) => "ap",
            ClustererSpec::Hdbscan(_) => "hdbscan",
        }
    }
}

/// Labels produced by any clusterer.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    pub assignment: ClusterAssignment,
    /// False only for affinity propagation that ran out of iterations.
    pub converged: bool,
}

/// Runs the configured clusterer.
pub fn run_clusterer(
    spec: &ClustererSpec,
    x: &EmbeddingMatrix,
    seed: u64,
) -> Result<ClusterOutcome> {
    spec.validate()?;
    let (assignment, converged) = match spec {
        ClustererSpec::Kmeans(p) => (kmeans(x, p, seed)?.assignment, true),
        ClustererSpec::Spectral(p) => (spectral(x, p, seed)?.assignment, true),
        ClustererSpec::Agglomerative(p) => (agglomerative(x, p)?.assignment, true),
        ClustererSpec::AffinityPropagation(p) => {
            let r = affinity_propagation(x, p, seed)?;
            (r.assignment, r.converged)
        }
        ClustererSpec::Hdbscan(p) => (hdbscan(x, p)?.assignment, true),
    };
    Ok(ClusterOutcome {
        assignment,
        converged,
    })
}
