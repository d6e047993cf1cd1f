use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Layer, LayerSpec, Tensor};
use crate::{Error, Result};

/// Stable name of a trainable parameter: `"<layer index>.<weight|bias>"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(String);

impl ParamId {
    pub fn new(layer: usize, name: &str) -> Self {
        Self(format!("{layer}.{name}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ParamId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Parameter gradients keyed by [`ParamId`].
pub type Gradients = BTreeMap<ParamId, Tensor>;

/// Per-sample activations recorded by [`Network::forward`]: entry `i` is the
/// input of layer `i`, the last entry is the network output.
#[derive(Debug, Clone)]
struct ForwardCache {
    traces: Vec<Vec<Tensor>>,
}

/// Ordered stack of layers applied to one sample of shape `input_shape`.
/// Batches carry an extra leading axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    #[serde(skip)]
    cache: Option<ForwardCache>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.input_shape == other.input_shape && self.layers == other.layers
    }
}

impl Network {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::Config(format!(
                "invalid input shape {input_shape:?}"
            )));
        }
        let mut shape = input_shape.clone();
        for (i, layer) in layers.iter().enumerate() {
            shape = layer.output_shape(&shape).map_err(|e| e.at_layer(i))?;
        }
        Ok(Self {
            input_shape,
            layers,
            cache: None,
        })
    }

    /// Builds and initialises a network from `specs` with a seeded generator.
    pub fn build(input_shape: &[usize], specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let layer = spec.build(&shape, &mut rng).map_err(|e| e.at_layer(i))?;
            shape = layer.output_shape(&shape)?;
            layers.push(layer);
        }
        Self::new(input_shape.to_vec(), layers)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> Vec<usize> {
        let mut shape = self.input_shape.clone();
        for layer in &self.layers {
            shape = layer
                .output_shape(&shape)
                .expect("validated at construction");
        }
        shape
    }

    /// Number of output units (classes for a classifier).
    pub fn num_outputs(&self) -> usize {
        self.output_shape().iter().product()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn params(&self) -> Vec<(ParamId, &Tensor)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                l.params()
                    .into_iter()
                    .map(move |(name, t)| (ParamId::new(i, name), t))
            })
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<(ParamId, &mut Tensor)> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| {
                l.params_mut()
                    .into_iter()
                    .map(move |(name, t)| (ParamId::new(i, name), t))
            })
            .collect()
    }

    pub fn param_mut(&mut self, id: &ParamId) -> Option<&mut Tensor> {
        self.params_mut()
            .into_iter()
            .find(|(pid, _)| pid == id)
            .map(|(_, t)| t)
    }

    /// Re-draws the weights of the last dense layer and zeroes its bias.
    pub fn reinit_head(&mut self, seed: u64) -> Result<()> {
        let mut shape = self.input_shape.clone();
        let mut head = None;
        for (i, layer) in self.layers.iter().enumerate() {
            if matches!(layer, Layer::Dense(_)) {
                head = Some((i, shape.clone()));
            }
            shape = layer.output_shape(&shape)?;
        }
        let (i, in_shape) =
            head.ok_or_else(|| Error::Config("network has no dense layer to reinitialise".into()))?;
        let Layer::Dense(d) = &self.layers[i] else {
            unreachable!()
        };
        let spec = LayerSpec::Dense {
            outputs: d.outputs(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.layers[i] = spec.build(&in_shape, &mut rng)?;
        Ok(())
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        if batch.shape().len() != self.input_shape.len() + 1
            || batch.shape()[1..] != self.input_shape[..]
        {
            let err = Error::Shape(format!(
                "batch {:?} does not match input shape {:?}",
                batch.shape(),
                self.input_shape
            ));
            return Err(err.at_layer(0));
        }
        Ok(())
    }

    fn trace_sample(&self, x: Tensor) -> Result<Vec<Tensor>> {
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(x);
        for (i, layer) in self.layers.iter().enumerate() {
            let y = layer
                .forward(trace.last().expect("non-empty"))
                .map_err(|e| e.at_layer(i))?;
            trace.push(y);
        }
        Ok(trace)
    }

    fn run(&self, batch: &Tensor) -> Result<Vec<Vec<Tensor>>> {
        self.check_batch(batch)?;
        (0..batch.outer())
            .into_par_iter()
            .map(|i| self.trace_sample(batch.slice_outer(i)))
            .collect()
    }

    fn stack_outputs(&self, traces: &[Vec<Tensor>]) -> Result<Tensor> {
        let outs: Vec<Tensor> = traces
            .iter()
            .map(|t| t.last().expect("non-empty").clone())
            .collect();
        Tensor::stack(&outs)
    }

    /// Forward pass over a batch, keeping the intermediates for
    /// [`Network::backward`]. Returns pre-softmax outputs `[batch, ...]`.
    pub fn forward(&mut self, batch: &Tensor) -> Result<Tensor> {
        let traces = self.run(batch)?;
        let out = self.stack_outputs(&traces)?;
        self.cache = Some(ForwardCache { traces });
        Ok(out)
    }

    /// Forward pass without caching; only the outputs are kept.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_batch(batch)?;
        let outs: Vec<Tensor> = (0..batch.outer())
            .into_par_iter()
            .map(|i| {
                let mut x = batch.slice_outer(i);
                for (l, layer) in self.layers.iter().enumerate() {
                    x = layer.forward(&x).map_err(|e| e.at_layer(l))?;
                }
                Ok(x)
            })
            .collect::<Result<_>>()?;
        Tensor::stack(&outs)
    }

    /// Parameter gradients for upstream gradient `loss_grad` (shape of the
    /// last forward output), summed over the batch in sample order.
    pub fn backward(&mut self, loss_grad: &Tensor) -> Result<Gradients> {
        self.backward_with_input(loss_grad).map(|(g, _)| g)
    }

    /// Like [`Network::backward`] but also returns the gradient with respect
    /// to the batch input.
    pub fn backward_with_input(&mut self, loss_grad: &Tensor) -> Result<(Gradients, Tensor)> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called without a cached forward pass".into()))?;
        let result = self.backward_cached(&cache, loss_grad);
        self.cache = Some(cache);
        result
    }

    fn backward_cached(
        &self,
        cache: &ForwardCache,
        loss_grad: &Tensor,
    ) -> Result<(Gradients, Tensor)> {
        let batch = cache.traces.len();
        let mut expected = vec![batch];
        expected.extend(self.output_shape());
        loss_grad.expect_shape(&expected)?;

        let per_sample: Vec<(Vec<Vec<Tensor>>, Tensor)> = (0..batch)
            .into_par_iter()
            .map(|s| {
                let trace = &cache.traces[s];
                let mut grad = loss_grad
                    .slice_outer(s)
                    .reshape(trace.last().unwrap().shape())?;
                let mut layer_grads = vec![Vec::new(); self.layers.len()];
                for (i, layer) in self.layers.iter().enumerate().rev() {
                    let (dx, dp) = layer
                        .backward(&trace[i], &grad)
                        .map_err(|e| e.at_layer(i))?;
                    layer_grads[i] = dp;
                    grad = dx;
                }
                Ok((layer_grads, grad))
            })
            .collect::<Result<_>>()?;

        let mut grads = Gradients::new();
        for (i, layer) in self.layers.iter().enumerate() {
            for (p, (name, param)) in layer.params().into_iter().enumerate() {
                let mut acc = Tensor::zeros(param.shape());
                for (sample, _) in &per_sample {
                    acc.add_assign(&sample[i][p])?;
                }
                grads.insert(ParamId::new(i, name), acc);
            }
        }
        let inputs: Vec<Tensor> = per_sample.into_iter().map(|(_, dx)| dx).collect();
        let input_grad = if inputs.is_empty() {
            Tensor::zeros(&expected)
        } else {
            Tensor::stack(&inputs)?
        };
        Ok((grads, input_grad))
    }

    /// Drops any cached forward intermediates.
    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}
