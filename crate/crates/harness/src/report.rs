use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::aggregate::{
    ami_silhouette_correlation, delta_vs_baseline, in9_gap, mean_over_clusterers, rank_clusterers,
    Exclusion, Group, SilhouetteSpace,
};
use crate::error::{HarnessError, Result};
use crate::table::ResultsTable;

/// Which aggregate reports to emit.
#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    pub exclusions: Vec<Exclusion>,
    /// Baseline encoder for the delta report.
    pub baseline: Option<String>,
    pub groups: Vec<Group>,
    /// Dataset names of the mixed-same and mixed-random background variants.
    pub gap_datasets: Option<(String, String)>,
}

#[derive(Serialize)]
struct CorrelationRow<'a> {
    space: &'a str,
    clusterer: &'a str,
    n_points: usize,
    rho: Option<f64>,
    error: Option<&'a str>,
}

fn write_csv<T: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = T>,
    header: &[&str],
) -> Result<()> {
    let bad = |e: csv::Error| HarnessError::Data(format!("{}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(bad)?;
    w.write_record(header).map_err(bad)?;
    for r in rows {
        w.serialize(r).map_err(bad)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Writes the aggregate CSVs into `dir` and returns their paths.
///
/// Always: `means.csv`, `ranks.csv`, `correlations.csv`. With a baseline:
/// `deltas.csv`. With gap datasets: `gaps.csv`.
pub fn write_reports(
    table: &ResultsTable,
    opts: &ReportOptions,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut written = Vec::new();

    let means = mean_over_clusterers(table, &opts.exclusions)?;
    let p = dir.join("means.csv");
    write_csv(
        &p,
        &means,
        &["encoder", "dataset", "mean_ami", "n_clusterers"],
    )?;
    written.push(p);

    if let Some(base) = &opts.baseline {
        let groups = if opts.groups.is_empty() {
            let (_, datasets, _) = table.axes();
            vec![Group {
                name: "all".into(),
                datasets,
            }]
        } else {
            opts.groups.clone()
        };
        let deltas = delta_vs_baseline(&means, base, &groups)?;
        let p = dir.join("deltas.csv");
        write_csv(
            &p,
            &deltas,
            &["encoder", "group", "mean", "stderr", "n_datasets"],
        )?;
        written.push(p);
    }

    if let Some((ms, mr)) = &opts.gap_datasets {
        let gaps = in9_gap(&means, ms, mr)?;
        let p = dir.join("gaps.csv");
        write_csv(&p, &gaps, &["encoder", "ms", "mr", "gap"])?;
        written.push(p);
    }

    let ranks = rank_clusterers(table);
    let p = dir.join("ranks.csv");
    write_csv(&p, &ranks, &["clusterer", "mean_rank", "n_cells"])?;
    written.push(p);

    let mut corr = Vec::new();
    for (name, space) in [
        ("original", SilhouetteSpace::Original),
        ("reduced", SilhouetteSpace::Reduced),
    ] {
        for c in ami_silhouette_correlation(table, space) {
            if let Err(e) = &c.rho {
                log::warn!("{name}/{}: {e}", c.clusterer);
            }
            corr.push((name, c));
        }
    }
    let p = dir.join("correlations.csv");
    write_csv(
        &p,
        corr.iter().map(|(space, c)| CorrelationRow {
            space,
            clusterer: &c.clusterer,
            n_points: c.n_points,
            rho: c.rho.as_ref().ok().copied(),
            error: c.rho.as_ref().err().map(String::as_str),
        }),
        &["space", "clusterer", "n_points", "rho", "error"],
    )?;
    written.push(p);
    Ok(written)
}
