//! Dense `f64` tensors and the layers, losses and optimizer built on them.

mod checkpoint;
mod conv;
mod layers;
mod loss;
mod network;
mod optim;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use checkpoint::Checkpoint;
pub use conv::{conv_output_size, ConvLayer};
pub use layers::{DenseLayer, Layer, LayerSpec, PoolLayer};
pub use loss::{cross_entropy, log_softmax_t, softmax, softmax_t, LOG_CLAMP};
pub use network::{Gradients, Network, ParamId};
pub use optim::{sgd_momentum_step, MomentumState, Optimizer};

/// Row-major dense array of 64-bit reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.contains(&0) {
            return Err(Error::Shape(format!("zero-sized dimension in {shape:?}")));
        }
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let len: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..len).map(&mut f).collect(),
        }
    }

    /// Stacks equally-shaped tensors along a new leading axis.
    pub fn stack(items: &[Tensor]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::Shape("cannot stack an empty list".into()))?;
        let mut data = Vec::with_capacity(first.len() * items.len());
        for t in items {
            if t.shape != first.shape {
                return Err(Error::Shape(format!(
                    "cannot stack {:?} with {:?}",
                    first.shape, t.shape
                )));
            }
            data.extend_from_slice(&t.data);
        }
        let mut shape = vec![items.len()];
        shape.extend_from_slice(&first.shape);
        Ok(Self { shape, data })
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

    /// Size of the leading axis.
    pub fn outer(&self) -> usize {
        self.shape[0]
    }

    /// Shape with the leading axis removed; `[1]` for a rank-1 tensor.
    pub fn inner_shape(&self) -> Vec<usize> {
        if self.shape.len() > 1 {
            self.shape[1..].to_vec()
        } else {
            vec![1]
        }
    }

    /// Copy of the `i`-th slice along the leading axis.
    pub fn slice_outer(&self, i: usize) -> Tensor {
        let inner = self.inner_shape();
        let stride: usize = inner.iter().product();
        Tensor {
            shape: inner,
            data: self.data[i * stride..(i + 1) * stride].to_vec(),
        }
    }

    /// Gathers rows `indices` of the leading axis into a new tensor.
    pub fn gather_outer(&self, indices: &[usize]) -> Tensor {
        let inner = self.inner_shape();
        let stride: usize = inner.iter().product();
        let mut data = Vec::with_capacity(stride * indices.len());
        for &i in indices {
            data.extend_from_slice(&self.data[i * stride..(i + 1) * stride]);
        }
        let mut shape = vec![indices.len()];
        if self.shape.len() > 1 {
            shape.extend_from_slice(&inner);
        }
        Tensor { shape, data }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// In-place `self += other`.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.expect_shape(other.shape())?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn expect_shape(&self, shape: &[usize]) -> Result<()> {
        if self.shape == shape {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "expected {shape:?}, got {:?}",
                self.shape
            )))
        }
    }

    /// Index of the largest element; the first one wins on ties.
    pub fn argmax(values: &[f64]) -> usize {
        let mut best = 0;
        for (i, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = i;
            }
        }
        best
    }
}
