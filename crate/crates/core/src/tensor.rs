//! Dense 64-bit float matrices, the value type of the compute graph.
//!
//! Everything is `f64`: the alignment-loss oracle equivalence is checked at
//! 1e-10 and the default loss weights span nine orders of magnitude, which
//! single precision cannot survive.

use ndarray::Array2;

use crate::error::{Error, Result};

/// A dense row-major matrix of `f64`. Scalars are 1x1.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    data: Array2<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: Array2::zeros((rows, cols)),
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            data: Array2::from_elem((1, 1), value),
        }
    }

    /// Build from a flat row-major buffer.
    pub fn from_flat(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows * cols != values.len() {
            return Err(Error::ShapeMismatch {
                op: "from_flat",
                details: format!("{rows}x{cols} != {} values", values.len()),
            });
        }
        let data = Array2::from_shape_vec((rows, cols), values)
            .expect("shape already checked against buffer length");
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::ShapeMismatch {
                    op: "from_rows",
                    details: format!("ragged rows: {} vs {}", row.len(), c),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::from_flat(r, c, flat)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        Self {
            data: Array2::from_shape_fn((rows, cols), |(i, j)| f(i, j)),
        }
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn is_scalar(&self) -> bool {
        self.shape() == (1, 1)
    }

    /// The sole entry of a 1x1 matrix.
    pub fn scalar_value(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[[0, 0]]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[[r, c]]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[[r, c]] = v;
    }

    /// Flat row-major view of the values.
    pub fn values(&self) -> &[f64] {
        self.data
            .as_slice()
            .expect("DenseMatrix storage is always standard layout")
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.data
            .as_slice_mut()
            .expect("DenseMatrix storage is always standard layout")
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.data.row(r).to_vec()
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols() != other.rows() {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                details: format!("{:?} x {:?}", self.shape(), other.shape()),
            });
        }
        Ok(Self {
            data: self.data.dot(&other.data),
        })
    }

    pub fn transpose(&self) -> Self {
        let (r, c) = self.shape();
        Self::from_fn(c, r, |i, j| self.data[[j, i]])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.mapv(&f),
        }
    }

    /// Elementwise combination; shapes must already agree.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op: "zip_map",
                details: format!("{:?} vs {:?}", self.shape(), other.shape()),
            });
        }
        let mut out = self.clone();
        out.data.zip_mut_with(&other.data, |a, &b| *a = f(*a, b));
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    /// `self += other * factor`, the accumulation primitive of backprop.
    pub fn add_scaled_assign(&mut self, other: &Self, factor: f64) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op: "add_scaled_assign",
                details: format!("{:?} vs {:?}", self.shape(), other.shape()),
            });
        }
        self.data.zip_mut_with(&other.data, |a, &b| *a += b * factor);
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.values().iter().sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.values().iter().map(|v| v * v).sum()
    }

    /// Embed into the top-left corner of an `s x s` zero matrix.
    pub fn pad_to(&self, s: usize) -> Self {
        debug_assert!(s >= self.rows() && s >= self.cols());
        let mut out = Self::zeros(s, s);
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }
}
