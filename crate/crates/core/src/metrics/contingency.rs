use crate::embedspace::NoisePolicy;
use crate::error::{Error, Result};

/// Dense `rows x cols` count table between a reference labeling (rows)
/// and a predicted one (columns).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    row_margins: Vec<u64>,
    col_margins: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn from_counts(rows: usize, cols: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != rows * cols {
            return Err(Error::Validation(format!(
                "{}x{} table needs {} counts, got {}",
                rows,
                cols,
                rows * cols,
                counts.len()
            )));
        }
        let mut row_margins = vec![0u64; rows];
        let mut col_margins = vec![0u64; cols];
        for i in 0..rows {
            for j in 0..cols {
                let c = counts[i * cols + j];
                row_margins[i] += c;
                col_margins[j] += c;
            }
        }
        let total = row_margins.iter().sum();
        Ok(Self {
            rows,
            cols,
            counts,
            row_margins,
            col_margins,
            total,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn row_margins(&self) -> &[u64] {
        &self.row_margins
    }

    pub fn col_margins(&self) -> &[u64] {
        &self.col_margins
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Same table with rows and columns swapped.
    pub fn transpose(&self) -> Self {
        let mut counts = vec![0u64; self.counts.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                counts[j * self.rows + i] = self.get(i, j);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            counts,
            row_margins: self.col_margins.clone(),
            col_margins: self.row_margins.clone(),
            total: self.total,
        }
    }
}

/// Cross-tabulates `truth` (non-negative ids) against `pred`, where any
/// negative predicted id is noise handled according to `policy`. Ids need
/// not be dense; rows and columns follow order of first appearance.
pub fn contingency(truth: &[i64], pred: &[i64], policy: NoisePolicy) -> Result<ContingencyTable> {
    if truth.len() != pred.len() {
        return Err(Error::Validation(format!(
            "label lengths differ: {} vs {}",
            truth.len(),
            pred.len()
        )));
    }
    if let Some(i) = truth.iter().position(|&l| l < 0) {
        return Err(Error::Validation(format!(
            "reference labeling contains noise/negative id at index {}",
            i
        )));
    }
    let mut row_ids = IdMap::default();
    let mut col_ids = IdMap::default();
    let mut pairs = Vec::with_capacity(truth.len());
    for (&t, &p) in truth.iter().zip(pred) {
        if p < 0 && policy == NoisePolicy::ExcludeNoise {
            continue;
        }
        // all noise samples share one id, distinct from every cluster id
        let key = if p < 0 { i64::MIN } else { p };
        pairs.push((row_ids.index(t), col_ids.index(key)));
    }
    if pairs.is_empty() {
        return Err(Error::Degenerate(
            "no samples left to compare after noise exclusion".into(),
        ));
    }
    let (rows, cols) = (row_ids.len(), col_ids.len());
    let mut counts = vec![0u64; rows * cols];
    for (r, c) in pairs {
        counts[r * cols + c] += 1;
    }
    ContingencyTable::from_counts(rows, cols, counts)
}

#[derive(Default)]
struct IdMap {
    map: std::collections::HashMap<i64, usize>,
}

impl IdMap {
    fn index(&mut self, id: i64) -> usize {
        let next = self.map.len();
        *self.map.entry(id).or_insert(next)
    }

    fn len(&self) -> usize {
        self.map.len()
    }
}
