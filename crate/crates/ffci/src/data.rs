//! Column-major sample tables with a plain CSV codec.
//!
//! Floats are written in Rust's shortest round-trip form, so a written file
//! re-reads bit-identically and identical runs produce identical bytes.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("row length {got} does not match column count {expected}")]
    RowLength { got: usize, expected: usize },
    #[error("csv parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("unknown column {0}")]
    UnknownColumn(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    names: Vec<String>,
    cols: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(names: Vec<String>) -> Self {
        let cols = names.iter().map(|_| Vec::new()).collect();
        Self { names, cols }
    }

    pub fn from_columns(names: Vec<String>, cols: Vec<Vec<f64>>) -> Self {
        assert_eq!(names.len(), cols.len());
        Self { names, cols }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.cols.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn col(&self, i: usize) -> &[f64] {
        &self.cols[i]
    }

    pub fn col_by_name(&self, name: &str) -> Result<&[f64], TableError> {
        let idx = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))?;
        Ok(&self.cols[idx])
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<(), TableError> {
        if row.len() != self.cols.len() {
            return Err(TableError::RowLength {
                got: row.len(),
                expected: self.cols.len(),
            });
        }
        for (col, &v) in self.cols.iter_mut().zip(row) {
            col.push(v);
        }
        Ok(())
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.cols.iter().map(|c| c[r]).collect()
    }

    /// Keeps only the first `n` rows.
    pub fn truncate(&mut self, n: usize) {
        for col in &mut self.cols {
            col.truncate(n);
        }
    }

    pub fn extend_from(&mut self, other: &Table) -> Result<(), TableError> {
        if other.names != self.names {
            return Err(TableError::RowLength {
                got: other.n_cols(),
                expected: self.n_cols(),
            });
        }
        for (dst, src) in self.cols.iter_mut().zip(&other.cols) {
            dst.extend_from_slice(src);
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for r in 0..self.n_rows() {
            let row: Vec<String> = self.cols.iter().map(|c| format!("{}", c[r])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(s: &str) -> Result<Self, TableError> {
        let mut lines = s.lines().enumerate();
        let (_, header) = lines.next().ok_or(TableError::Parse {
            line: 0,
            detail: "empty file".into(),
        })?;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut table = Table::new(names);
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<f64>, _> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect();
            let row = row.map_err(|e| TableError::Parse {
                line: i + 1,
                detail: e.to_string(),
            })?;
            table.push_row(&row).map_err(|_| TableError::Parse {
                line: i + 1,
                detail: "wrong field count".into(),
            })?;
        }
        Ok(table)
    }
}
