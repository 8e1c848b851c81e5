//! Row-major dense matrix, just large enough for factor matrices, Gram
//! matrices, and per-axis evaluation caches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    /// Identity-checked constructor for small literals in tests and examples.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::shape("ragged rows".to_string()));
        }
        Ok(Mat {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// `out = self * x` for an `rows x cols` matrix and `cols` vector.
    pub fn vec_mul(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *o = acc;
        }
    }

    /// `out = self^T * x` for an `rows x cols` matrix and `rows` vector.
    /// Accumulates row-by-row so the inner loop stays contiguous.
    pub fn transpose_vec_mul(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        for (xi, row) in x.iter().zip(self.data.chunks_exact(self.cols)) {
            if *xi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(row) {
                *o += xi * a;
            }
        }
    }

    /// `self += scale * a b^T` where `a` spans rows and `b` spans columns.
    pub fn add_outer(&mut self, a: &[f64], b: &[f64], scale: f64) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (ai, row) in a.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            let f = scale * ai;
            if f == 0.0 {
                continue;
            }
            for (o, bi) in row.iter_mut().zip(b) {
                *o += f * bi;
            }
        }
    }

    /// `out = a^T * b` for `a: n x k`, `b: n x m`, producing `k x m`.
    pub fn matmul_at_b(a: &Mat, b: &Mat) -> Result<Mat> {
        if a.rows != b.rows {
            return Err(Error::shape(format!(
                "a^T b needs matching row counts, got {} and {}",
                a.rows, b.rows
            )));
        }
        let mut out = Mat::zeros(a.cols, b.cols);
        for n in 0..a.rows {
            let arow = a.row(n);
            let brow = b.row(n);
            for (k, &coef) in arow.iter().enumerate() {
                if coef == 0.0 {
                    continue;
                }
                let orow = out.row_mut(k);
                for (o, bv) in orow.iter_mut().zip(brow) {
                    *o += coef * bv;
                }
            }
        }
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Mat) {
        debug_assert_eq!(self.rows, other.rows);
        debug_assert_eq!(self.cols, other.cols);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }
}
