//! Minimal dense tensors: row-major `f64` with an explicit shape.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::invalid(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        if shape.contains(&0) {
            return Err(Error::invalid(format!(
                "shape {shape:?} has a zero dimension"
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    /// A `rows x cols` matrix from row-major data.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Self {
            shape: vec![rows, cols],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Width of a 2-D tensor (last dimension).
    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap_or(&1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.shape, other.shape, "add shape mismatch");
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Reverses the row order of a 2-D tensor.
    pub fn reverse_rows(&self) -> Tensor {
        let mut out = Vec::with_capacity(self.data.len());
        for i in (0..self.rows()).rev() {
            out.extend_from_slice(self.row(i));
        }
        Tensor::matrix(self.rows(), self.cols(), out)
    }

    /// Row-wise concatenation `[a | b]` of two matrices with equal row counts.
    pub fn hcat(parts: &[&Tensor]) -> Tensor {
        let rows = parts[0].rows();
        let cols: usize = parts.iter().map(|p| p.cols()).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for p in parts {
                out.extend_from_slice(p.row(i));
            }
        }
        Tensor::matrix(rows, cols, out)
    }

    /// Column-wise maximum of a matrix (max-pool over rows).
    pub fn max_rows(&self) -> Vec<f64> {
        let mut m = self.row(0).to_vec();
        for i in 1..self.rows() {
            for (a, &b) in m.iter_mut().zip(self.row(i)) {
                if b > *a {
                    *a = b;
                }
            }
        }
        m
    }
}

/// `x W^T + b` for `x: rows x in`, `W: out x in`, `b: out`.
///
/// Rows are computed in parallel; each output entry is a plain left-to-right
/// dot product, so the result is independent of the thread count.
pub fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let (out_dim, in_dim) = (w.shape()[0], w.shape()[1]);
    assert_eq!(x.cols(), in_dim, "linear input width");
    let rows = x.rows();
    let mut out = vec![0.0; rows * out_dim];
    out.par_chunks_mut(out_dim).enumerate().for_each(|(i, o)| {
        let xi = x.row(i);
        for (k, v) in o.iter_mut().enumerate() {
            let wk = &w.data()[k * in_dim..(k + 1) * in_dim];
            let mut acc = 0.0;
            for (a, c) in xi.iter().zip(wk) {
                acc += a * c;
            }
            *v = acc + b.data()[k];
        }
    });
    Tensor::matrix(rows, out_dim, out)
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub const LN_EPS: f64 = 1e-5;

/// Row-wise layer norm with affine `gamma`, `beta`.
pub fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Tensor {
    let d = x.cols();
    let mut out = x.clone();
    for i in 0..x.rows() {
        let r = out.row_mut(i);
        let mean = r.iter().sum::<f64>() / d as f64;
        let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        for (k, v) in r.iter_mut().enumerate() {
            *v = (*v - mean) * inv * gamma.data()[k] + beta.data()[k];
        }
    }
    out
}

/// Row-wise softmax, max-subtracted.
pub fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in row.iter_mut() {
        *v /= s;
    }
}
