//! Compressed sparse row matrix, just enough for logistic regression.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists. Columns within a row
    /// must be strictly increasing and below `cols`.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, cols: usize) -> Result<Self> {
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for (r, row) in rows.into_iter().enumerate() {
            let mut prev = None;
            for (c, v) in row {
                if c >= cols || prev.is_some_and(|p| p >= c) {
                    return Err(Error::InvalidVector(format!(
                        "row {r}: column {c} out of order or out of range (cols = {cols})"
                    )));
                }
                prev = Some(c);
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        self.row(r).map(|(c, v)| v * x[c]).sum()
    }

    /// `acc += scale · row_r`
    pub fn add_row_scaled(&self, r: usize, scale: f64, acc: &mut [f64]) {
        for (c, v) in self.row(r) {
            acc[c] += scale * v;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows()).map(|r| self.row_dot(r, x)).collect()
    }

    pub fn transpose_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &s) in v.iter().enumerate() {
            self.add_row_scaled(r, s, &mut out);
        }
        out
    }

    /// Rows `range` as a new matrix with the same column count.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> CsrMatrix {
        let start = self.indptr[range.start];
        let end = self.indptr[range.end];
        CsrMatrix {
            cols: self.cols,
            indptr: self.indptr[range.start..=range.end].iter().map(|p| p - start).collect(),
            indices: self.indices[start..end].to_vec(),
            values: self.values[start..end].to_vec(),
        }
    }

    /// Dense row-major copy, for tests and small problems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|r| {
                let mut row = vec![0.0; self.cols];
                for (c, v) in self.row(r) {
                    row[c] = v;
                }
                row
            })
            .collect()
    }
}
