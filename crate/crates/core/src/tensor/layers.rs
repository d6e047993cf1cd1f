use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::{conv_output_size, ConvLayer};
use super::Tensor;
use crate::{Error, Result};

/// Max pooling over `[C, H, W]` with a square window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolLayer {
    pub size: usize,
    pub stride: usize,
}

impl PoolLayer {
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != 3 {
            return Err(Error::Shape(format!(
                "pool expects [C, H, W], got {input:?}"
            )));
        }
        let (h, w) = conv_output_size(input[1], input[2], self.size, self.stride)?;
        Ok(vec![input[0], h, w])
    }

    /// Flat input index of the maximum of every output window. The first
    /// maximum in row-major window order wins.
    fn argmax_indices(&self, input: &Tensor) -> Result<(Vec<usize>, Vec<usize>)> {
        let out_shape = self.output_shape(input.shape())?;
        let (h, w) = (input.shape()[1], input.shape()[2]);
        let (oh, ow) = (out_shape[1], out_shape[2]);
        let x = input.data();
        let mut idx = Vec::with_capacity(out_shape.iter().product());
        for c in 0..out_shape[0] {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = c * h * w + (oy * self.stride) * w + ox * self.stride;
                    for ky in 0..self.size {
                        for kx in 0..self.size {
                            let i = c * h * w + (oy * self.stride + ky) * w + ox * self.stride + kx;
                            if x[i] > x[best] {
                                best = i;
                            }
                        }
                    }
                    idx.push(best);
                }
            }
        }
        Ok((out_shape, idx))
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (shape, idx) = self.argmax_indices(input)?;
        let x = input.data();
        Tensor::new(shape, idx.iter().map(|&i| x[i]).collect())
    }

    pub fn backward(&self, input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let (shape, idx) = self.argmax_indices(input)?;
        grad_out.expect_shape(&shape)?;
        let mut dx = Tensor::zeros(input.shape());
        let d = dx.data_mut();
        for (&i, &g) in idx.iter().zip(grad_out.data()) {
            d[i] += g;
        }
        Ok(dx)
    }
}

/// Fully-connected layer `y = W x + b`; the input is flattened first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `[out, in]`
    pub weights: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let n: usize = input.iter().product();
        if n != self.inputs() {
            return Err(Error::Shape(format!(
                "dense layer with weights {:?} cannot take input {input:?}",
                self.weights.shape()
            )));
        }
        Ok(vec![self.outputs()])
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.output_shape(input.shape())?;
        let (rows, cols) = (self.outputs(), self.inputs());
        let x = input.data();
        let w = self.weights.data();
        let out = (0..rows)
            .map(|r| {
                let mut acc = 0.0;
                for (wi, xi) in w[r * cols..(r + 1) * cols].iter().zip(x) {
                    acc += wi * xi;
                }
                acc + self.bias.data()[r]
            })
            .collect();
        Tensor::new(vec![rows], out)
    }

    /// Returns `(d input, d weights, d bias)`; `d weights` is the outer
    /// product of `grad_out` and the flattened input.
    pub fn backward(&self, input: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        self.output_shape(input.shape())?;
        let (rows, cols) = (self.outputs(), self.inputs());
        grad_out.expect_shape(&[rows])?;
        let x = input.data();
        let w = self.weights.data();
        let g = grad_out.data();
        let mut dx = vec![0.0; cols];
        let mut dw = vec![0.0; rows * cols];
        for r in 0..rows {
            let gr = g[r];
            for c in 0..cols {
                dw[r * cols + c] = gr * x[c];
                dx[c] += gr * w[r * cols + c];
            }
        }
        Ok((
            Tensor::new(input.shape().to_vec(), dx)?,
            Tensor::new(vec![rows, cols], dw)?,
            grad_out.clone(),
        ))
    }
}

/// One stage of a [`super::Network`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Conv(ConvLayer),
    MaxPool(PoolLayer),
    Dense(DenseLayer),
    Relu,
}

impl Layer {
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Conv(l) => l.output_shape(input),
            Layer::MaxPool(l) => l.output_shape(input),
            Layer::Dense(l) => l.output_shape(input),
            Layer::Relu => Ok(input.to_vec()),
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Conv(l) => l.forward(input),
            Layer::MaxPool(l) => l.forward(input),
            Layer::Dense(l) => l.forward(input),
            Layer::Relu => Ok(input.map(|x| x.max(0.0))),
        }
    }

    /// Input gradient plus parameter gradients in [`Layer::params`] order.
    pub fn backward(&self, input: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        match self {
            Layer::Conv(l) => {
                let (dx, dw, db) = l.backward(input, grad_out)?;
                Ok((dx, vec![dw, db]))
            }
            Layer::Dense(l) => {
                let (dx, dw, db) = l.backward(input, grad_out)?;
                Ok((dx, vec![dw, db]))
            }
            Layer::MaxPool(l) => Ok((l.backward(input, grad_out)?, Vec::new())),
            Layer::Relu => {
                grad_out.expect_shape(input.shape())?;
                let data = input
                    .data()
                    .iter()
                    .zip(grad_out.data())
                    .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                    .collect();
                Ok((Tensor::new(input.shape().to_vec(), data)?, Vec::new()))
            }
        }
    }

    /// Trainable parameters as `(name, tensor)`.
    pub fn params(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            Layer::Conv(l) => vec![("weight", &l.weights), ("bias", &l.bias)],
            Layer::Dense(l) => vec![("weight", &l.weights), ("bias", &l.bias)],
            Layer::MaxPool(_) | Layer::Relu => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        match self {
            Layer::Conv(l) => vec![("weight", &mut l.weights), ("bias", &mut l.bias)],
            Layer::Dense(l) => vec![("weight", &mut l.weights), ("bias", &mut l.bias)],
            Layer::MaxPool(_) | Layer::Relu => Vec::new(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::MaxPool(_) => "max_pool",
            Layer::Dense(_) => "dense",
            Layer::Relu => "relu",
        }
    }
}

/// Architecture description used to build a freshly initialised layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
    },
    MaxPool {
        size: usize,
        #[serde(default)]
        stride: Option<usize>,
    },
    Dense {
        outputs: usize,
    },
    Relu,
}

fn one() -> usize {
    1
}

impl LayerSpec {
    /// Builds the layer for an input of shape `input`, drawing weights from
    /// `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`. Biases start at 0.
    pub fn build(&self, input: &[usize], rng: &mut impl Rng) -> Result<Layer> {
        let layer = match *self {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
            } => {
                if input.len() != 3 {
                    return Err(Error::Config(format!(
                        "conv layer needs a [C, H, W] input, got {input:?}"
                    )));
                }
                if out_channels == 0 {
                    return Err(Error::Config("conv layer needs out_channels >= 1".into()));
                }
                let mut l = ConvLayer::zeros(input[0], out_channels, kernel, stride);
                let fan_in = input[0] * kernel * kernel;
                let fan_out = out_channels * kernel * kernel;
                glorot_fill(&mut l.weights, fan_in, fan_out, rng);
                Layer::Conv(l)
            }
            LayerSpec::MaxPool { size, stride } => Layer::MaxPool(PoolLayer {
                size,
                stride: stride.unwrap_or(size),
            }),
            LayerSpec::Dense { outputs } => {
                if outputs == 0 {
                    return Err(Error::Config("dense layer needs outputs >= 1".into()));
                }
                let inputs: usize = input.iter().product();
                let mut l = DenseLayer::zeros(inputs, outputs);
                glorot_fill(&mut l.weights, inputs, outputs, rng);
                Layer::Dense(l)
            }
            LayerSpec::Relu => Layer::Relu,
        };
        layer.output_shape(input).map_err(|e| match e {
            Error::Shape(m) => Error::Config(m),
            other => other,
        })?;
        Ok(layer)
    }
}

fn glorot_fill(t: &mut Tensor, fan_in: usize, fan_out: usize, rng: &mut impl Rng) {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for w in t.data_mut() {
        *w = rng.random_range(-a..a);
    }
}
