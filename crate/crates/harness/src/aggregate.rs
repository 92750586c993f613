//! Aggregate analyses over a results table. AMI enters as a fraction and
//! leaves in percentage points.

use std::collections::BTreeSet;

use serde::Serialize;

use embclust_core::metrics::{average_ranks, spearman_rho};

use crate::error::{HarnessError, Result};
use crate::presets::CLUSTERERS;
use crate::table::ResultsTable;

/// Mean AMI of one (encoder, dataset) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellMean {
    pub encoder: String,
    pub dataset: String,
    /// Percentage points.
    pub mean_ami: f64,
    pub n_clusterers: usize,
}

/// Clusterers left out of the mean for one dataset, or for all datasets
/// when `dataset` is `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub dataset: Option<String>,
    pub clusterer: String,
}

impl Exclusion {
    /// Parses `clusterer` or `dataset:clusterer`.
    pub fn parse(s: &str) -> Self {
        match s.split_once(':') {
            Some((d, c)) => Exclusion {
                dataset: Some(d.into()),
                clusterer: c.into(),
            },
            None => Exclusion {
                dataset: None,
                clusterer: s.into(),
            },
        }
    }

    fn matches(&self, dataset: &str, clusterer: &str) -> bool {
        self.clusterer == clusterer && self.dataset.as_deref().is_none_or(|d| d == dataset)
    }
}

/// Mean AMI over the included clusterers of every (encoder, dataset) cell.
pub fn mean_over_clusterers(
    table: &ResultsTable,
    exclusions: &[Exclusion],
) -> Result<Vec<CellMean>> {
    let (encoders, datasets, _) = table.axes();
    let mut out = Vec::new();
    for enc in &encoders {
        for ds in &datasets {
            let mut present = false;
            let included: Vec<f64> = table
                .rows()
                .filter(|r| &r.encoder == enc && &r.dataset == ds)
                .inspect(|_| present = true)
                .filter(|r| !exclusions.iter().any(|x| x.matches(ds, &r.clusterer)))
                .map(|r| r.ami)
                .collect();
            if !present {
                continue;
            }
            if included.is_empty() {
                return Err(HarnessError::Config(format!(
                    "every clusterer of ({enc}, {ds}) is excluded"
                )));
            }
            out.push(CellMean {
                encoder: enc.clone(),
                dataset: ds.clone(),
                mean_ami: 100.0 * included.iter().sum::<f64>() / included.len() as f64,
                n_clusterers: included.len(),
            });
        }
    }
    Ok(out)
}

fn lookup<'a>(means: &'a [CellMean], encoder: &str, dataset: &str) -> Option<&'a CellMean> {
    means
        .iter()
        .find(|m| m.encoder == encoder && m.dataset == dataset)
}

/// Named set of datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub name: String,
    pub datasets: Vec<String>,
}

impl Group {
    /// Parses `name=ds1,ds2,...`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, list) = s
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("group '{s}' must read name=ds1,ds2")))?;
        let datasets: Vec<String> = list
            .split(',')
            .map(str::trim)
            .filter(|d| !d.is_empty())
            .map(String::from)
            .collect();
        if datasets.is_empty() {
            return Err(HarnessError::Config(format!(
                "group '{name}' lists no datasets"
            )));
        }
        Ok(Group {
            name: name.into(),
            datasets,
        })
    }
}

/// Per-group AMI difference from the baseline encoder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupDelta {
    pub encoder: String,
    pub group: String,
    /// Mean difference in percentage points.
    pub mean: f64,
    /// Standard error of the mean (sample std over sqrt(n)); 0 for n = 1.
    pub stderr: f64,
    pub n_datasets: usize,
}

/// Mean and standard error of a sample.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Difference of every encoder's cell means from `baseline`, summarized
/// per group. Encoders with no cell in a group are skipped.
pub fn delta_vs_baseline(
    means: &[CellMean],
    baseline: &str,
    groups: &[Group],
) -> Result<Vec<GroupDelta>> {
    let mut encoders: Vec<&str> = Vec::new();
    for m in means {
        if !encoders.contains(&m.encoder.as_str()) {
            encoders.push(&m.encoder);
        }
    }
    let mut out = Vec::new();
    for g in groups {
        for ds in &g.datasets {
            if lookup(means, baseline, ds).is_none() {
                return Err(HarnessError::Core(embclust_core::Error::Validation(
                    format!("baseline '{baseline}' has no cell for dataset '{ds}'"),
                )));
            }
        }
        for enc in &encoders {
            let deltas: Vec<f64> = g
                .datasets
                .iter()
                .filter_map(|ds| {
                    let base = lookup(means, baseline, ds)?.mean_ami;
                    lookup(means, enc, ds).map(|m| m.mean_ami - base)
                })
                .collect();
            if deltas.is_empty() {
                continue;
            }
            let (mean, stderr) = mean_stderr(&deltas);
            out.push(GroupDelta {
                encoder: enc.to_string(),
                group: g.name.clone(),
                mean,
                stderr,
                n_datasets: deltas.len(),
            });
        }
    }
    Ok(out)
}

/// Difference between the two background variants of one encoder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gap {
    pub encoder: String,
    pub ms: f64,
    pub mr: f64,
    pub gap: f64,
}

/// `AMI(ms) - AMI(mr)` per encoder, using cell means.
pub fn in9_gap(means: &[CellMean], ms: &str, mr: &str) -> Result<Vec<Gap>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for m in means {
        if !seen.insert(m.encoder.clone()) {
            continue;
        }
        let get = |ds: &str| {
            lookup(means, &m.encoder, ds)
                .map(|c| c.mean_ami)
                .ok_or_else(|| {
                    HarnessError::Core(embclust_core::Error::Validation(format!(
                        "encoder '{}' has no '{ds}' cell",
                        m.encoder
                    )))
                })
        };
        let (a, b) = (get(ms)?, get(mr)?);
        out.push(Gap {
            encoder: m.encoder.clone(),
            ms: a,
            mr: b,
            gap: a - b,
        });
    }
    Ok(out)
}

/// Average within-cell rank of one clusterer (lowest AMI ranks 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClustererRank {
    pub clusterer: String,
    pub mean_rank: f64,
    pub n_cells: usize,
}

/// Ranks the six clusterers inside every complete (encoder, dataset) cell
/// and averages. Incomplete cells are skipped with a warning.
pub fn rank_clusterers(table: &ResultsTable) -> Vec<ClustererRank> {
    let (encoders, datasets, _) = table.axes();
    let mut sums = [0.0f64; CLUSTERERS.len()];
    let mut n_cells = 0usize;
    for enc in &encoders {
        for ds in &datasets {
            let amis: Option<Vec<f64>> = CLUSTERERS
                .iter()
                .map(|c| table.get(enc, ds, c).map(|r| r.ami))
                .collect();
            match amis {
                Some(v) => {
                    for (s, r) in sums.iter_mut().zip(average_ranks(&v)) {
                        *s += r;
                    }
                    n_cells += 1;
                }
                None => {
                    if table.rows().any(|r| &r.encoder == enc && &r.dataset == ds) {
                        log::warn!("skipping ({enc}, {ds}) in ranking: not all clusterers present");
                    }
                }
            }
        }
    }
    CLUSTERERS
        .iter()
        .zip(sums)
        .map(|(c, s)| ClustererRank {
            clusterer: c.to_string(),
            mean_rank: if n_cells > 0 {
                s / n_cells as f64
            } else {
                f64::NAN
            },
            n_cells,
        })
        .collect()
}

/// Space the silhouette was measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SilhouetteSpace {
    Original,
    Reduced,
}

/// Spearman correlation between AMI and silhouette for one clusterer.
#[derive(Debug, Serialize)]
pub struct Correlation {
    pub clusterer: String,
    pub n_points: usize,
    /// `Err` holds the reason the correlation is undefined.
    pub rho: std::result::Result<f64, String>,
}

/// Per-clusterer Spearman rho over every row with a silhouette value.
pub fn ami_silhouette_correlation(
    table: &ResultsTable,
    space: SilhouetteSpace,
) -> Vec<Correlation> {
    let (_, _, clusterers) = table.axes();
    clusterers
        .into_iter()
        .map(|c| {
            let (ami, sil): (Vec<f64>, Vec<f64>) = table
                .rows()
                .filter(|r| r.clusterer == c)
                .filter_map(|r| {
                    let s = match space {
                        SilhouetteSpace::Original => r.sil_orig,
                        SilhouetteSpace::Reduced => r.sil_reduced,
                    };
                    s.map(|s| (r.ami, s))
                })
                .unzip();
            let rho = if ami.len() < 3 {
                Err(format!("{} points; need at least 3", ami.len()))
            } else {
                spearman_rho(&ami, &sil).map_err(|e| e.to_string())
            };
            Correlation {
                clusterer: c,
                n_points: ami.len(),
                rho,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::ResultRow;

    fn row(enc: &str, ds: &str, cl: &str, ami: f64) -> ResultRow {
        ResultRow {
            encoder: enc.into(),
            dataset: ds.into(),
            clusterer: cl.into(),
            ami,
            nmi: 0.0,
            ari: 0.0,
            sil_orig: None,
            sil_reduced: None,
            n_clusters: 1,
            clustered_fraction: 1.0,
            wall_time: 0.0,
            seed: 1,
            config_hash: String::new(),
        }
    }

    fn six(enc: &str, ds: &str, amis: [f64; 6]) -> Vec<ResultRow> {
        CLUSTERERS
            .iter()
            .zip(amis)
            .map(|(c, a)| row(enc, ds, c, a))
            .collect()
    }

    fn mean_only(enc: &str, ds: &str, v: f64) -> CellMean {
        CellMean {
            encoder: enc.into(),
            dataset: ds.into(),
            mean_ami: v,
            n_clusterers: 1,
        }
    }

    #[test]
    fn mean_of_six() {
        let t =
            ResultsTable::from_rows(six("x", "d", [0.73, 0.73, 0.73, 0.68, 0.67, 0.64])).unwrap();
        let m = mean_over_clusterers(&t, &[]).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m[0].mean_ami - 69.666_666_666_666_67).abs() < 1e-9);
    }

    #[test]
    fn single_and_excluded() {
        let t = ResultsTable::from_rows([row("x", "d", "ap", 0.42)]).unwrap();
        assert!((mean_over_clusterers(&t, &[]).unwrap()[0].mean_ami - 42.0).abs() < 1e-12);
        let t = ResultsTable::from_rows(six("x", "d", [0.1, 0.2, 0.3, 0.4, 0.5, 0.9])).unwrap();
        let ex = [Exclusion::parse("hdbscan")];
        let m = mean_over_clusterers(&t, &ex).unwrap();
        assert_eq!(m[0].n_clusterers, 5);
        assert!((m[0].mean_ami - 30.0).abs() < 1e-9);
        let ex = [Exclusion::parse("other:hdbscan")];
        assert_eq!(mean_over_clusterers(&t, &ex).unwrap()[0].n_clusterers, 6);
    }

    #[test]
    fn all_excluded_is_config_error() {
        let t = ResultsTable::from_rows([row("x", "d", "ap", 0.42)]).unwrap();
        let err = mean_over_clusterers(&t, &[Exclusion::parse("ap")]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn delta_hand_example() {
        let means = vec![
            mean_only("base", "a", 50.0),
            mean_only("base", "b", 50.0),
            mean_only("base", "c", 50.0),
            mean_only("ssl", "a", 52.0),
            mean_only("ssl", "b", 46.0),
            mean_only("ssl", "c", 55.0),
        ];
        let g = [Group::parse("fine=a,b,c").unwrap()];
        let d = delta_vs_baseline(&means, "base", &g).unwrap();
        let base = &d[0];
        assert_eq!((base.mean, base.stderr), (0.0, 0.0));
        let ssl = &d[1];
        assert!((ssl.mean - 1.0).abs() < 1e-12);
        // sample variance 21, stderr sqrt(7)
        assert!((ssl.stderr - 7f64.sqrt()).abs() < 1e-12);
        assert!((ssl.stderr - 2.65).abs() < 5e-3);
    }

    #[test]
    fn delta_single_dataset_and_missing_baseline() {
        let means = vec![mean_only("base", "a", 50.0), mean_only("ssl", "a", 40.0)];
        let d = delta_vs_baseline(&means, "base", &[Group::parse("g=a").unwrap()]).unwrap();
        assert_eq!((d[1].mean, d[1].stderr), (-10.0, 0.0));
        let err = delta_vs_baseline(&means, "base", &[Group::parse("g=a,b").unwrap()]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn gaps() {
        let means = vec![
            mean_only("xent", "ms", 71.0),
            mean_only("xent", "mr", 60.0),
            mean_only("same", "ms", 50.0),
            mean_only("same", "mr", 50.0),
        ];
        let g = in9_gap(&means, "ms", "mr").unwrap();
        assert_eq!(g[0].gap, 11.0);
        assert_eq!(g[1].gap, 0.0);
        assert!(in9_gap(&means[..3], "ms", "mr").is_err());
    }

    #[test]
    fn ranks() {
        let t = ResultsTable::from_rows(six("x", "d", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6])).unwrap();
        let r: Vec<f64> = rank_clusterers(&t).iter().map(|r| r.mean_rank).collect();
        assert_eq!(r, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);

        let t = ResultsTable::from_rows(six("x", "d", [0.1, 0.2, 0.3, 0.4, 0.6, 0.6])).unwrap();
        let r: Vec<f64> = rank_clusterers(&t).iter().map(|r| r.mean_rank).collect();
        assert_eq!(&r[4..], [5.5, 5.5]);

        let mut rows = six("x", "d", [0.5; 6]);
        rows.push(row("x", "incomplete", "ap", 0.9));
        let t = ResultsTable::from_rows(rows).unwrap();
        let ranks = rank_clusterers(&t);
        assert!(ranks.iter().all(|r| r.mean_rank == 3.5 && r.n_cells == 1));
    }

    #[test]
    fn correlation_cases() {
        let mut rows = Vec::new();
        for (i, a) in [0.1, 0.5, 0.3, 0.9].iter().enumerate() {
            let mut r = row("e", &format!("d{i}"), "kmeans", *a);
            r.sil_reduced = Some(*a);
            rows.push(r);
            let mut r = row("e", &format!("d{i}"), "ap", 0.5);
            r.sil_reduced = Some(*a);
            rows.push(r);
        }
        let t = ResultsTable::from_rows(rows).unwrap();
        let c = ami_silhouette_correlation(&t, SilhouetteSpace::Reduced);
        assert_eq!(c[0].clusterer, "kmeans");
        assert!((c[0].rho.as_ref().unwrap() - 1.0).abs() < 1e-12);
        assert!(c[1].rho.is_err());
        let c = ami_silhouette_correlation(&t, SilhouetteSpace::Original);
        assert!(c.iter().all(|c| c.rho.is_err() && c.n_points == 0));
    }
}
