//! Labeled measurement records grounding all posterior estimates.

use crate::scalar::Real;
use crate::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

/// One labeled measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalTestRecord<R> {
    pub measurement: Vec<R>,
    /// Index into the state space.
    pub label: usize,
}

/// Immutable collection of labeled measurements with per-state counts.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalTestSet<R> {
    records: Vec<InternalTestRecord<R>>,
    per_state_counts: Vec<usize>,
    dim: usize,
}

impl<R: Real> InternalTestSet<R> {
    /// Builds a set over `n_states` states, checking label range and uniform
    /// measurement dimension.
    pub fn new(records: Vec<InternalTestRecord<R>>, n_states: usize) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::validation("empty internal test set"));
        }
        let dim = records[0].measurement.len();
        let mut per_state_counts = vec![0usize; n_states];
        for (k, rec) in records.iter().enumerate() {
            if rec.measurement.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: rec.measurement.len(),
                    context: "internal test measurement",
                });
            }
            if rec.label >= n_states {
                return Err(Error::validation(format!(
                    "record {k}: label {} out of range (n_states = {n_states})",
                    rec.label
                )));
            }
            per_state_counts[rec.label] += 1;
        }
        Ok(InternalTestSet {
            records,
            per_state_counts,
            dim,
        })
    }

    pub fn records(&self) -> &[InternalTestRecord<R>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_states(&self) -> usize {
        self.per_state_counts.len()
    }

    /// Number of records labeled with each state.
    pub fn per_state_counts(&self) -> &[usize] {
        &self.per_state_counts
    }
}

/// Reads `y_0,…,y_{d-1},label` CSV rows into a test set over `n_states`
/// states.
pub fn load_internal_test_set<R: Real>(
    path: impl AsRef<Path>,
    n_states: usize,
) -> Result<InternalTestSet<R>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_internal_test_set(file, &path.display().to_string(), n_states)
}

fn parse_internal_test_set<R: Real>(
    reader: impl Read,
    path: &str,
    n_states: usize,
) -> Result<InternalTestSet<R>> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv.headers()?.clone();
    let cols = headers.len();
    if cols < 2 || headers.get(cols - 1) != Some("label") {
        return Err(Error::Parse {
            path: path.into(),
            row: 1,
            message: "expected header y_0,…,y_{d-1},label".into(),
        });
    }
    let mut records = Vec::new();
    for (idx, row) in csv.records().enumerate() {
        let row_no = idx + 2; // 1-based, after the header
        let row = row?;
        if row.len() != cols {
            return Err(Error::Parse {
                path: path.into(),
                row: row_no,
                message: format!("expected {cols} fields, got {}", row.len()),
            });
        }
        let mut measurement = Vec::with_capacity(cols - 1);
        for field in row.iter().take(cols - 1) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: path.into(),
                row: row_no,
                message: format!("bad measurement value {field:?}"),
            })?;
            measurement.push(R::of(v));
        }
        let label: usize = row[cols - 1].trim().parse().map_err(|_| Error::Parse {
            path: path.into(),
            row: row_no,
            message: format!("bad label {:?}", &row[cols - 1]),
        })?;
        records.push(InternalTestRecord { measurement, label });
    }
    InternalTestSet::new(records, n_states)
}

/// Writes the set back out in the same CSV format.
pub fn save_internal_test_set<R: Real>(
    set: &InternalTestSet<R>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    let header: Vec<String> = (0..set.dim())
        .map(|i| format!("y_{i}"))
        .chain(std::iter::once("label".to_string()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for rec in set.records() {
        for v in &rec.measurement {
            // Shortest round-trippable form keeps reload bit-exact.
            write!(out, "{:?},", v.to_f64().unwrap())?;
        }
        writeln!(out, "{}", rec.label)?;
    }
    Ok(())
}
