//! Dense row-major design matrix with named columns.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("row {row} has {got} values, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("column count mismatch: expected {expected}, got {got}")]
    ColumnMismatch { expected: usize, got: usize },
    #[error("row index {0} out of bounds")]
    RowOutOfBounds(usize),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("matrix file: {0}")]
    Csv(#[from] csv::Error),
    #[error("matrix file line {line}: cannot parse `{value}` as a number")]
    BadCell { line: u64, value: String },
}

/// Feature matrix aligned row-by-row with a target vector.
///
/// `standardized` records whether a [`Standardizer`](crate::preprocess::Standardizer)
/// has been applied; models that require scaled input check it, and the
/// standardizer refuses to apply twice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    data: Vec<f64>,
    n_rows: usize,
    standardized: bool,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, MatrixError> {
        let width = columns.len();
        let n_rows = rows.len();
        let mut data = Vec::with_capacity(n_rows * width);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(MatrixError::RaggedRow { row: i, got: row.len(), expected: width });
            }
            data.extend(row);
        }
        Ok(Self { columns, data, n_rows, standardized: false })
    }

    pub fn from_flat(columns: Vec<String>, data: Vec<f64>) -> Result<Self, MatrixError> {
        let width = columns.len();
        if width == 0 {
            if !data.is_empty() {
                return Err(MatrixError::ColumnMismatch { expected: 0, got: data.len() });
            }
            return Ok(Self { columns, data, n_rows: 0, standardized: false });
        }
        if !data.len().is_multiple_of(width) {
            return Err(MatrixError::RaggedRow { row: data.len() / width, got: data.len() % width, expected: width });
        }
        let n_rows = data.len() / width;
        Ok(Self { columns, data, n_rows, standardized: false })
    }

    /// Empty matrix with the given header.
    pub fn empty(columns: Vec<String>) -> Self {
        Self { columns, data: Vec::new(), n_rows: 0, standardized: false }
    }

    /// Build from rows that were already scaled outside the pipeline.
    pub fn from_standardized_rows(columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, MatrixError> {
        let mut m = Self::new(columns, rows)?;
        m.standardized = true;
        Ok(m)
    }

    pub(crate) fn with_standardized_flag(mut self, flag: bool) -> Self {
        self.standardized = flag;
        self
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Result<usize, MatrixError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| MatrixError::UnknownColumn(name.to_string()))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_cols();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols() + col]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        let w = self.n_cols().max(1);
        (0..self.n_rows).map(move |i| &self.data[i * w..(i + 1) * w])
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows().map(|r| r[col]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Copy of the selected rows, in the given order (duplicates allowed).
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self, MatrixError> {
        let w = self.n_cols();
        let mut data = Vec::with_capacity(idx.len() * w);
        for &i in idx {
            if i >= self.n_rows {
                return Err(MatrixError::RowOutOfBounds(i));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self { columns: self.columns.clone(), data, n_rows: idx.len(), standardized: self.standardized })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Write as comma-separated text with the column names as header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MatrixError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        let mut buf = Vec::with_capacity(self.n_cols());
        for row in self.rows() {
            buf.clear();
            buf.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&buf)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, MatrixError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let columns: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut data = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != columns.len() {
                return Err(MatrixError::RaggedRow { row: line as usize, got: rec.len(), expected: columns.len() });
            }
            for cell in rec.iter() {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| MatrixError::BadCell { line, value: cell.to_string() })?;
                data.push(v);
            }
        }
        Self::from_flat(columns, data)
    }
}
