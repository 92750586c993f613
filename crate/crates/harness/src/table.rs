use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use embclust_core::embedspace::RunResult;

use crate::error::{HarnessError, Result};

/// Column order of `results.csv`.
pub const CSV_HEADER: [&str; 13] = [
    "encoder",
    "dataset",
    "clusterer",
    "ami",
    "nmi",
    "ari",
    "sil_orig",
    "sil_reduced",
    "n_clusters",
    "clustered_fraction",
    "wall_time",
    "seed",
    "config_hash",
];

/// One scored (encoder, dataset, clusterer) cell, as written to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub encoder: String,
    pub dataset: String,
    pub clusterer: String,
    pub ami: f64,
    pub nmi: f64,
    pub ari: f64,
    pub sil_orig: Option<f64>,
    pub sil_reduced: Option<f64>,
    pub n_clusters: usize,
    pub clustered_fraction: f64,
    pub wall_time: f64,
    pub seed: u64,
    pub config_hash: String,
}

impl ResultRow {
    pub fn key(&self) -> (&str, &str, &str) {
        (&self.encoder, &self.dataset, &self.clusterer)
    }
}

/// A row plus the fields that only the JSON report carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    #[serde(flatten)]
    pub row: ResultRow,
    /// AMI with noise samples dropped; set when the clusterer marked noise.
    #[serde(default)]
    pub ami_excluding_noise: Option<f64>,
    #[serde(default = "yes")]
    pub converged: bool,
}

fn yes() -> bool {
    true
}

impl Cell {
    pub fn from_result(
        encoder: &str,
        dataset: &str,
        clusterer: &str,
        r: &RunResult,
        seed: u64,
        config_hash: &str,
    ) -> Self {
        Cell {
            row: ResultRow {
                encoder: encoder.into(),
                dataset: dataset.into(),
                clusterer: clusterer.into(),
                ami: r.ami,
                nmi: r.nmi,
                ari: r.ari,
                sil_orig: r.silhouette_original,
                sil_reduced: r.silhouette_reduced,
                n_clusters: r.n_clusters_pred,
                clustered_fraction: r.clustered_fraction,
                wall_time: r.wall_time,
                seed,
                config_hash: config_hash.into(),
            },
            ami_excluding_noise: r.ami_excluding_noise,
            converged: r.converged,
        }
    }
}

/// A cell whose pipeline returned an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub encoder: String,
    pub dataset: String,
    pub clusterer: String,
    pub seed: u64,
    pub config_hash: String,
    pub error: String,
}

/// Scored cells in insertion order, with unique keys, plus failures.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    cells: Vec<Cell>,
    #[serde(default)]
    failures: Vec<FailedCell>,
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Data(format!("{}: {e}", path.display()))
}

impl ResultsTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rows(rows: impl IntoIterator<Item = ResultRow>) -> Result<Self> {
        let mut t = Self::new();
        for row in rows {
            t.push(Cell {
                row,
                ami_excluding_noise: None,
                converged: true,
            })?;
        }
        Ok(t)
    }

    /// Appends a cell; a repeated (encoder, dataset, clusterer) key is a
    /// data error.
    pub fn push(&mut self, cell: Cell) -> Result<()> {
        if self
            .get(&cell.row.encoder, &cell.row.dataset, &cell.row.clusterer)
            .is_some()
        {
            let (e, d, c) = cell.row.key();
            return Err(HarnessError::Data(format!(
                "duplicate cell ({e}, {d}, {c})"
            )));
        }
        self.cells.push(cell);
        Ok(())
    }

    pub fn push_failure(&mut self, failure: FailedCell) {
        self.failures.push(failure);
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.cells.iter().map(|c| &c.row)
    }

    pub fn failures(&self) -> &[FailedCell] {
        &self.failures
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, encoder: &str, dataset: &str, clusterer: &str) -> Option<&ResultRow> {
        self.rows()
            .find(|r| r.key() == (encoder, dataset, clusterer))
    }

    /// Distinct encoders, datasets and clusterers in first-seen order.
    pub fn axes(&self) -> (Vec<String>, Vec<String>, Vec<String>) {
        fn distinct<'a>(it: impl Iterator<Item = &'a str>) -> Vec<String> {
            let mut seen = HashSet::new();
            it.filter(|s| seen.insert(*s)).map(String::from).collect()
        }
        (
            distinct(self.rows().map(|r| r.encoder.as_str())),
            distinct(self.rows().map(|r| r.dataset.as_str())),
            distinct(self.rows().map(|r| r.clusterer.as_str())),
        )
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        let bad = |e: csv::Error| HarnessError::Data(format!("csv: {e}"));
        w.write_record(CSV_HEADER).map_err(bad)?;
        for r in self.rows() {
            w.serialize(r).map_err(bad)?;
        }
        w.flush()
            .map_err(|e| HarnessError::Data(format!("csv: {e}")))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header = rd
            .headers()
            .map_err(|e| HarnessError::Data(format!("csv: {e}")))?
            .clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(HarnessError::Data(format!(
                "csv header {:?} does not match {:?}",
                header.iter().collect::<Vec<_>>(),
                CSV_HEADER
            )));
        }
        let rows: std::result::Result<Vec<ResultRow>, _> = rd.deserialize().collect();
        Self::from_rows(rows.map_err(|e| HarnessError::Data(format!("csv: {e}")))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ResultsTable = serde_json::from_str(text)
            .map_err(|e| HarnessError::Data(format!("results json: {e}")))?;
        let mut t = Self::new();
        for c in raw.cells {
            t.push(c)?;
        }
        t.failures = raw.failures;
        Ok(t)
    }

    /// Loads a table from `.csv` or `.json` by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::read_csv(text.as_bytes()),
        }
    }

    /// Writes `results.csv`, `results.json` and `failures.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let csv_path = dir.join("results.csv");
        let f = File::create(&csv_path).map_err(|e| HarnessError::io(&csv_path, e))?;
        self.write_csv(f)?;

        let json_path = dir.join("results.json");
        std::fs::write(&json_path, self.to_json()).map_err(|e| HarnessError::io(&json_path, e))?;

        let fail_path = dir.join("failures.csv");
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(&fail_path)
            .map_err(|e| csv_err(&fail_path, e))?;
        w.write_record([
            "encoder",
            "dataset",
            "clusterer",
            "seed",
            "config_hash",
            "error",
        ])
        .map_err(|e| csv_err(&fail_path, e))?;
        for f in &self.failures {
            w.serialize(f).map_err(|e| csv_err(&fail_path, e))?;
        }
        w.flush().map_err(|e| HarnessError::io(&fail_path, e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn row(enc: &str, ds: &str, cl: &str, ami: f64) -> ResultRow {
        ResultRow {
            encoder: enc.into(),
            dataset: ds.into(),
            clusterer: cl.into(),
            ami,
            nmi: 0.5,
            ari: -0.125,
            sil_orig: Some(0.25),
            sil_reduced: None,
            n_clusters: 3,
            clustered_fraction: 1.0,
            wall_time: 0.0123,
            seed: 1,
            config_hash: "0123456789abcdef".into(),
        }
    }

    fn csv_text(t: &ResultsTable) -> String {
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(
            csv_text(&ResultsTable::new()),
            format!("{}\n", CSV_HEADER.join(","))
        );
    }

    #[test]
    fn one_cell_is_two_lines() {
        let t = ResultsTable::from_rows([row("rn50-xent", "in1k", "kmeans", 0.73)]).unwrap();
        let text = csv_text(&t);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(
            lines[1],
            "rn50-xent,in1k,kmeans,0.73,0.5,-0.125,0.25,,3,1.0,0.0123,1,0123456789abcdef"
        );
    }

    #[test]
    fn csv_round_trip() {
        let t = ResultsTable::from_rows([
            row("a", "d1", "kmeans", 0.1 + 0.2),
            row("a", "d1", "ap", -1e-17),
            row("b,c", "d\"2", "hdbscan", 1.0 / 3.0),
        ])
        .unwrap();
        let back = ResultsTable::read_csv(csv_text(&t).as_bytes()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn json_round_trip_keeps_details() {
        let mut t = ResultsTable::new();
        t.push(Cell {
            row: row("a", "d", "hdbscan", 0.4),
            ami_excluding_noise: Some(0.6),
            converged: true,
        })
        .unwrap();
        t.push(Cell {
            row: row("a", "d", "ap", 0.3),
            ami_excluding_noise: None,
            converged: false,
        })
        .unwrap();
        t.push_failure(FailedCell {
            encoder: "a".into(),
            dataset: "d".into(),
            clusterer: "spectral".into(),
            seed: 1,
            config_hash: "x".into(),
            error: "boom".into(),
        });
        assert_eq!(ResultsTable::from_json(&t.to_json()).unwrap(), t);
    }

    #[test]
    fn duplicate_key_rejected() {
        let r = ResultsTable::from_rows([row("a", "d", "ap", 0.1), row("a", "d", "ap", 0.2)]);
        assert_eq!(r.unwrap_err().exit_code(), 3);
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(ResultsTable::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn save_writes_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let t = ResultsTable::from_rows([row("a", "d", "ap", 0.1)]).unwrap();
        t.save(dir.path()).unwrap();
        for f in ["results.csv", "results.json", "failures.csv"] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let failures = std::fs::read_to_string(dir.path().join("failures.csv")).unwrap();
        assert_eq!(
            failures,
            "encoder,dataset,clusterer,seed,config_hash,error\n"
        );
        assert_eq!(
            ResultsTable::load(&dir.path().join("results.json")).unwrap(),
            t
        );
        assert_eq!(
            ResultsTable::load(&dir.path().join("results.csv")).unwrap(),
            t
        );
    }
}
