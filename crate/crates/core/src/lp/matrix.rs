/// Dense row-major matrix. Sizes in this crate stay in the tens to low hundreds.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    /// Empty matrix with a fixed column count, to be filled with [`Matrix::push_row`].
    pub fn with_cols(ncols: usize) -> Self {
        Self {
            nrows: 0,
            ncols,
            data: Vec::new(),
        }
    }

    pub fn from_rows(ncols: usize, rows: &[Vec<f64>]) -> Self {
        let mut m = Self::with_cols(ncols);
        for r in rows {
            m.push_row(r);
        }
        m
    }

    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), nrows * ncols, "row-major data has wrong length");
        Self { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.ncols, "row length does not match column count");
        self.data.extend_from_slice(row);
        self.nrows += 1;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.nrows).map(move |i| self.row(i))
    }

    /// `self * x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        self.rows().map(|r| dot(r, x)).collect()
    }

    /// `selfᵀ * y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for (r, &yi) in self.rows().zip(y) {
            if yi != 0.0 {
                for (o, &a) in out.iter_mut().zip(r) {
                    *o += a * yi;
                }
            }
        }
        out
    }

    /// Appends `extra` zero columns on the right.
    pub fn widen(&self, extra: usize) -> Matrix {
        let mut out = Matrix::with_cols(self.ncols + extra);
        let mut buf = vec![0.0; self.ncols + extra];
        for r in self.rows() {
            buf[..self.ncols].copy_from_slice(r);
            buf[self.ncols..].iter_mut().for_each(|v| *v = 0.0);
            out.push_row(&buf);
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}
