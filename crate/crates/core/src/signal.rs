//! Sample matrices and the instantaneous mixing matrix.

use crate::error::{Error, Result};

/// Relative tolerance below which two mixing columns count as parallel.
const PARALLEL_TOL: f64 = 1e-12;

/// T×K real samples, row-major: row `t` holds one time sample across all K channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SignalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "signal matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values cannot form a {rows}x{cols} signal matrix",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from per-channel columns of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch(
                "columns have different lengths".into(),
            ));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for t in 0..rows {
            data.extend(columns.iter().map(|c| c[t]));
        }
        Self::from_row_major(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.data[t * self.cols + k]
    }

    pub(crate) fn set(&mut self, t: usize, k: usize, value: f64) {
        self.data[t * self.cols + k] = value;
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub(crate) fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.rows).map(|t| self.get(t, k)).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute value in column `k`.
    pub fn column_peak(&self, k: usize) -> f64 {
        self.iter_rows().fold(0.0, |m, r| m.max(r[k].abs()))
    }

    /// Largest absolute value over all entries.
    pub fn peak(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// M×N instantaneous mixing matrix `A` with columns `a_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MixingMatrix {
    /// Validates shape, finiteness and pairwise non-parallel columns.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if m == 0 || n == 0 {
            return Err(Error::config("mixing matrix must be non-empty"));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::config("mixing matrix rows have different lengths"));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let a = Self {
            rows: m,
            cols: n,
            data,
        };
        for i in 0..n {
            for j in i + 1..n {
                if a.parallel(i, j) {
                    return Err(Error::config(format!(
                        "mixing columns {} and {} are parallel",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(a)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(
            (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
    }

    /// Checks what the ratio-based estimation model needs: two rows and a
    /// nonzero first entry in every column.
    pub fn check_estimable(&self) -> Result<()> {
        if self.rows != 2 {
            return Err(Error::config(format!(
                "estimation requires exactly 2 mixture channels, mixing matrix has {} rows",
                self.rows
            )));
        }
        if let Some(i) = (0..self.cols).find(|&i| self.get(0, i) == 0.0) {
            return Err(Error::config(format!(
                "mixing column {} has a zero first entry",
                i + 1
            )));
        }
        Ok(())
    }

    fn parallel(&self, i: usize, j: usize) -> bool {
        let ci = self.column(i);
        let cj = self.column(j);
        let scale: f64 = ci.iter().map(|v| v * v).sum::<f64>().sqrt()
            * cj.iter().map(|v| v * v).sum::<f64>().sqrt();
        (0..self.rows).all(|p| {
            (p + 1..self.rows).all(|q| (ci[p] * cj[q] - ci[q] * cj[p]).abs() <= PARALLEL_TOL * scale)
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks_exact(self.cols).map(<[f64]>::to_vec).collect()
    }

    /// Second-row to first-row ratio `a_{2,i} / a_{1,i}` of each column.
    pub fn column_ratios(&self) -> Result<Vec<f64>> {
        if self.rows < 2 {
            return Err(Error::DimensionMismatch(
                "column ratios need at least 2 mixing rows".into(),
            ));
        }
        Ok((0..self.cols).map(|i| self.get(1, i) / self.get(0, i)).collect())
    }
}
