use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

/// Output extent of a valid (unpadded) sliding window.
///
/// Returns `(floor((m - k) / s) + 1, floor((n - k) / s) + 1)`. The division is
/// floored when the stride does not divide the remaining extent, so every
/// counted placement lies fully inside the input.
pub fn conv_output_size(m: usize, n: usize, k: usize, s: usize) -> Result<(usize, usize)> {
    if k == 0 || s == 0 {
        return Err(Error::Config(format!(
            "kernel size and stride must be positive (k={k}, s={s})"
        )));
    }
    if k > m || k > n {
        return Err(Error::Shape(format!(
            "kernel {k}x{k} larger than input {m}x{n}"
        )));
    }
    Ok(((m - k) / s + 1, (n - k) / s + 1))
}

/// 2-D convolution over `[in, H, W]` inputs, no padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    /// `[out, in, k, k]`
    pub weights: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

impl ConvLayer {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            weights: Tensor::zeros(&[out_channels, in_channels, kernel, kernel]),
            bias: Tensor::zeros(&[out_channels]),
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != 3 || input[0] != self.in_channels {
            return Err(Error::Shape(format!(
                "conv expects [{}, H, W], got {input:?} (weights {:?})",
                self.in_channels,
                self.weights.shape()
            )));
        }
        let (h, w) = conv_output_size(input[1], input[2], self.kernel, self.stride)?;
        Ok(vec![self.out_channels, h, w])
    }

    /// Each output element is the window sum of `weight * pixel`, accumulated
    /// channel-major then row-major over the window, plus the bias.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let out_shape = self.output_shape(input.shape())?;
        let (h, w) = (input.shape()[1], input.shape()[2]);
        let (oh, ow) = (out_shape[1], out_shape[2]);
        let k = self.kernel;
        let x = input.data();
        let wt = self.weights.data();
        let mut out = vec![0.0; self.out_channels * oh * ow];
        for o in 0..self.out_channels {
            let b = self.bias.data()[o];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for c in 0..self.in_channels {
                        let wbase = (o * self.in_channels + c) * k * k;
                        let xbase = c * h * w;
                        for ky in 0..k {
                            let row = xbase + (oy * self.stride + ky) * w + ox * self.stride;
                            let wrow = wbase + ky * k;
                            for kx in 0..k {
                                acc += wt[wrow + kx] * x[row + kx];
                            }
                        }
                    }
                    out[(o * oh + oy) * ow + ox] = acc + b;
                }
            }
        }
        Tensor::new(out_shape, out)
    }

    /// Returns `(d input, d weights, d bias)` for upstream gradient `grad_out`.
    pub fn backward(&self, input: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        let out_shape = self.output_shape(input.shape())?;
        grad_out.expect_shape(&out_shape)?;
        let (h, w) = (input.shape()[1], input.shape()[2]);
        let (oh, ow) = (out_shape[1], out_shape[2]);
        let k = self.kernel;
        let x = input.data();
        let wt = self.weights.data();
        let g = grad_out.data();
        let mut dx = vec![0.0; x.len()];
        let mut dw = vec![0.0; wt.len()];
        let mut db = vec![0.0; self.out_channels];
        for o in 0..self.out_channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let go = g[(o * oh + oy) * ow + ox];
                    if go == 0.0 {
                        continue;
                    }
                    db[o] += go;
                    for c in 0..self.in_channels {
                        let wbase = (o * self.in_channels + c) * k * k;
                        let xbase = c * h * w;
                        for ky in 0..k {
                            let row = xbase + (oy * self.stride + ky) * w + ox * self.stride;
                            let wrow = wbase + ky * k;
                            for kx in 0..k {
                                dw[wrow + kx] += go * x[row + kx];
                                dx[row + kx] += go * wt[wrow + kx];
                            }
                        }
                    }
                }
            }
        }
        Ok((
            Tensor::new(input.shape().to_vec(), dx)?,
            Tensor::new(self.weights.shape().to_vec(), dw)?,
            Tensor::new(vec![self.out_channels], db)?,
        ))
    }
}
