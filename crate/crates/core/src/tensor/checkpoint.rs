//! JSON checkpoint files. Tensors are stored as base64 of their little-endian
//! `f64` bytes so that a save/load round trip is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{
    ConvLayer, DenseLayer, Layer, MomentumState, Network, Optimizer, ParamId, PoolLayer, Tensor,
};
use crate::{Error, Result};

const FORMAT: &str = "distillkit-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EncodedTensor {
    shape: Vec<usize>,
    /// base64 of little-endian f64 values
    data: String,
}

impl EncodedTensor {
    fn encode(t: &Tensor) -> Self {
        let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
        Self {
            shape: t.shape().to_vec(),
            data: STANDARD.encode(bytes),
        }
    }

    fn decode(&self) -> Result<Tensor> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| Error::Data(format!("bad tensor encoding: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Data("tensor byte length not a multiple of 8".into()));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Tensor::new(self.shape.clone(), data).map_err(|e| Error::Data(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum LayerRecord {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        weight: EncodedTensor,
        bias: EncodedTensor,
    },
    MaxPool {
        size: usize,
        stride: usize,
    },
    Dense {
        weight: EncodedTensor,
        bias: EncodedTensor,
    },
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerRecord {
    momentum: f64,
    lr: f64,
    velocity: BTreeMap<String, EncodedTensor>,
}

/// A network plus (optionally) its optimizer state and the seed it was
/// created from.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub optimizer: Option<Optimizer>,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    seed: u64,
    input_shape: Vec<usize>,
    layers: Vec<LayerRecord>,
    optimizer: Option<OptimizerRecord>,
}

impl Checkpoint {
    pub fn new(network: Network, optimizer: Option<Optimizer>, seed: u64) -> Self {
        Self {
            network,
            optimizer,
            seed,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let layers = self
            .network
            .layers()
            .iter()
            .map(|l| match l {
                Layer::Conv(c) => LayerRecord::Conv {
                    in_channels: c.in_channels,
                    out_channels: c.out_channels,
                    kernel: c.kernel,
                    stride: c.stride,
                    weight: EncodedTensor::encode(&c.weights),
                    bias: EncodedTensor::encode(&c.bias),
                },
                Layer::MaxPool(p) => LayerRecord::MaxPool {
                    size: p.size,
                    stride: p.stride,
                },
                Layer::Dense(d) => LayerRecord::Dense {
                    weight: EncodedTensor::encode(&d.weights),
                    bias: EncodedTensor::encode(&d.bias),
                },
                Layer::Relu => LayerRecord::Relu,
            })
            .collect();
        let optimizer = self.optimizer.as_ref().map(|o| OptimizerRecord {
            momentum: o.momentum(),
            lr: o.lr(),
            velocity: o
                .states()
                .iter()
                .map(|(id, s)| (id.to_string(), EncodedTensor::encode(&s.velocity)))
                .collect(),
        });
        let doc = Document {
            format: FORMAT.into(),
            seed: self.seed,
            input_shape: self.network.input_shape().to_vec(),
            layers,
            optimizer,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text)?;
        if doc.format != FORMAT {
            return Err(Error::Data(format!(
                "unsupported checkpoint format {:?}",
                doc.format
            )));
        }
        let layers = doc
            .layers
            .iter()
            .map(|r| {
                Ok(match r {
                    LayerRecord::Conv {
                        in_channels,
                        out_channels,
                        kernel,
                        stride,
                        weight,
                        bias,
                    } => {
                        let layer = ConvLayer {
                            in_channels: *in_channels,
                            out_channels: *out_channels,
                            kernel: *kernel,
                            stride: *stride,
                            weights: weight.decode()?,
                            bias: bias.decode()?,
                        };
                        layer.weights.expect_shape(&[
                            *out_channels,
                            *in_channels,
                            *kernel,
                            *kernel,
                        ])?;
                        layer.bias.expect_shape(&[*out_channels])?;
                        Layer::Conv(layer)
                    }
                    LayerRecord::MaxPool { size, stride } => Layer::MaxPool(PoolLayer {
                        size: *size,
                        stride: *stride,
                    }),
                    LayerRecord::Dense { weight, bias } => {
                        let layer = DenseLayer {
                            weights: weight.decode()?,
                            bias: bias.decode()?,
                        };
                        if layer.weights.shape().len() != 2 {
                            return Err(Error::Data("dense weights must be 2-D".into()));
                        }
                        layer.bias.expect_shape(&[layer.outputs()])?;
                        Layer::Dense(layer)
                    }
                    LayerRecord::Relu => Layer::Relu,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let network = Network::new(doc.input_shape, layers)?;
        let optimizer = match doc.optimizer {
            None => None,
            Some(rec) => {
                let mut states = BTreeMap::new();
                for (id, param) in network.params() {
                    let v = rec
                        .velocity
                        .get(id.as_str())
                        .ok_or_else(|| Error::Data(format!("missing velocity for {id}")))?
                        .decode()?;
                    v.expect_shape(param.shape())?;
                    states.insert(
                        ParamId::from(id.as_str()),
                        MomentumState {
                            velocity: v,
                            momentum: rec.momentum,
                            lr: rec.lr,
                        },
                    );
                }
                Some(Optimizer::from_states(rec.momentum, rec.lr, states)?)
            }
        };
        Ok(Self {
            network,
            optimizer,
            seed: doc.seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Format {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }
}
