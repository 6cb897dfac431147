//! Row-major dense matrix, the numeric carrier for features, batches, and
//! layer weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major matrix of `f64` with `rows * cols` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Dense2D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Dense2D {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Wrap an existing row-major buffer. Fails when the length does not
    /// match `rows * cols` or any entry is non-finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "buffer of length {} cannot be a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::shape("matrix entries must be finite"));
        }
        Ok(Dense2D { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::shape(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    d
                )));
            }
            data.extend_from_slice(row);
        }
        Dense2D::from_vec(n, d, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copy of the matrix restricted to the given columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Dense2D> {
        for &c in columns {
            if c >= self.cols {
                return Err(Error::shape(format!(
                    "column {} out of range for {} columns",
                    c, self.cols
                )));
            }
        }
        let mut data = Vec::with_capacity(self.rows * columns.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(columns.iter().map(|&c| row[c]));
        }
        Ok(Dense2D {
            rows: self.rows,
            cols: columns.len(),
            data,
        })
    }

    /// Copy of the matrix restricted to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dense2D> {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            if r >= self.rows {
                return Err(Error::shape(format!(
                    "row {} out of range for {} rows",
                    r, self.rows
                )));
            }
            data.extend_from_slice(self.row(r));
        }
        Ok(Dense2D {
            rows: rows.len(),
            cols: self.cols,
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Dense2D::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Dense2D::from_vec(2, 2, vec![1.0; 4]).is_ok());
    }

    #[test]
    fn from_vec_rejects_non_finite() {
        assert!(Dense2D::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Dense2D::from_vec(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Dense2D::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn select_columns_reorders() {
        let m = Dense2D::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let s = m.select_columns(&[2, 0]).unwrap();
        assert_eq!(s.row(0), &[3.0, 1.0]);
        assert_eq!(s.row(1), &[6.0, 4.0]);
        assert!(m.select_columns(&[3]).is_err());
    }

    #[test]
    fn select_rows_subsets() {
        let m = Dense2D::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let s = m.select_rows(&[2, 0]).unwrap();
        assert_eq!(s.row(0), &[5.0, 6.0]);
        assert_eq!(s.row(1), &[1.0, 2.0]);
    }
}
