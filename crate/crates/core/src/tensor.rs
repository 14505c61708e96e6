// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense `f32` vectors and matrices, plus the in-memory tensor bundle used to
//! move weights and activations between pipeline stages.
//!
//! Dot products accumulate in `f64` in ascending index order and round to
//! `f32` once, so results are reproducible bit-for-bit and stay stable for
//! latent widths around `10^5`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure_dim, Error, Result};

fn check_finite(what: &'static str, data: &[f32]) -> Result<()> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

/// A finite `f32` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    data: Vec<f32>,
}

impl DenseVector {
    pub fn new(data: Vec<f32>) -> Result<Self> {
        check_finite("vector", &data)?;
        Ok(Self { data })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            data: vec![0.0; dim],
        }
    }

    /// `value` at `index`, zero elsewhere.
    pub fn one_hot(dim: usize, index: usize, value: f32) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange {
                what: "one-hot",
                index,
                bound: dim,
            });
        }
        let mut v = Self::zeros(dim);
        v.data[index] = value;
        check_finite("vector", &v.data)?;
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn dot(&self, other: &DenseVector) -> Result<f32> {
        ensure_dim("dot", self.dim(), other.dim())?;
        Ok(dot_f64(&self.data, &other.data) as f32)
    }

    pub fn norm(&self) -> f32 {
        libm::sqrt(dot_f64(&self.data, &self.data)) as f32
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &DenseVector) -> Result<DenseVector> {
        ensure_dim("vector add", self.dim(), other.dim())?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        DenseVector::new(data)
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &DenseVector) -> Result<DenseVector> {
        ensure_dim("vector sub", self.dim(), other.dim())?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        DenseVector::new(data)
    }

    pub fn scale(&self, factor: f32) -> Result<DenseVector> {
        DenseVector::new(self.data.iter().map(|x| x * factor).collect())
    }
}

/// Row-major finite `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        ensure_dim("matrix data length", rows * cols, data.len())?;
        check_finite("matrix", &data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }

    /// Borrow row `index` without copying.
    pub fn row(&self, index: usize) -> Result<&[f32]> {
        if index >= self.rows {
            return Err(Error::IndexOutOfRange {
                what: "matrix row",
                index,
                bound: self.rows,
            });
        }
        Ok(&self.data[index * self.cols..(index + 1) * self.cols])
    }

    /// Copy row `index` out as a vector.
    pub fn row_extract(&self, index: usize) -> Result<DenseVector> {
        Ok(DenseVector {
            data: self.row(index)?.to_vec(),
        })
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }
}

pub(crate) fn dot_f64(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (&x, &y)| acc + x as f64 * y as f64)
}

/// Column-vector product `m · v`.
pub fn matvec(m: &DenseMatrix, v: &DenseVector) -> Result<DenseVector> {
    ensure_dim("matvec", m.cols, v.dim())?;
    let data = m
        .data
        .chunks_exact(m.cols.max(1))
        .take(m.rows)
        .map(|row| if m.cols == 0 { 0.0 } else { dot_f64(row, &v.data) as f32 })
        .collect();
    DenseVector::new(data)
}

/// Row-vector product `v · m`, accumulated in `f64` (before rounding, `bias` is
/// added in the same accumulator when given).
pub fn vecmat(v: &DenseVector, m: &DenseMatrix, bias: Option<&DenseVector>) -> Result<DenseVector> {
    ensure_dim("vecmat", m.rows, v.dim())?;
    if let Some(b) = bias {
        ensure_dim("vecmat bias", m.cols, b.dim())?;
    }
    let mut acc = vec![0.0f64; m.cols];
    for (i, &x) in v.data.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let row = &m.data[i * m.cols..(i + 1) * m.cols];
        for (a, &w) in acc.iter_mut().zip(row) {
            *a += x as f64 * w as f64;
        }
    }
    if let Some(b) = bias {
        for (a, &bj) in acc.iter_mut().zip(&b.data) {
            *a += bj as f64;
        }
    }
    DenseVector::new(acc.into_iter().map(|a| a as f32).collect())
}

/// An n-dimensional `f32` tensor as stored in a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let numel = shape.iter().product::<usize>();
        ensure_dim("tensor element count", numel, data.len())?;
        check_finite("tensor", &data)?;
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Interpret a rank-1 tensor as a vector.
    pub fn to_vector(&self) -> Result<DenseVector> {
        if self.shape.len() != 1 {
            return Err(Error::DimMismatch {
                what: "tensor rank (vector)",
                expected: 1,
                got: self.shape.len(),
            });
        }
        Ok(DenseVector {
            data: self.data.clone(),
        })
    }

    /// Interpret a rank-2 tensor as a row-major matrix.
    pub fn to_matrix(&self) -> Result<DenseMatrix> {
        if self.shape.len() != 2 {
            return Err(Error::DimMismatch {
                what: "tensor rank (matrix)",
                expected: 2,
                got: self.shape.len(),
            });
        }
        Ok(DenseMatrix {
            rows: self.shape[0],
            cols: self.shape[1],
            data: self.data.clone(),
        })
    }
}

impl From<DenseVector> for Tensor {
    fn from(v: DenseVector) -> Self {
        Tensor {
            shape: vec![v.dim()],
            data: v.data,
        }
    }
}

impl From<DenseMatrix> for Tensor {
    fn from(m: DenseMatrix) -> Self {
        Tensor {
            shape: vec![m.rows, m.cols],
            data: m.data,
        }
    }
}

/// Named tensors, kept sorted by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorBundle {
    entries: BTreeMap<String, Tensor>,
}

impl TensorBundle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert or replace `name`, returning the previous tensor.
    pub fn insert(&mut self, name: impl Into<String>, tensor: impl Into<Tensor>) -> Option<Tensor> {
        self.entries.insert(name.into(), tensor.into())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    /// Like [`get`](Self::get) but a missing name is an error.
    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::MissingTensor(name.into()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in lexicographic name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }
}
