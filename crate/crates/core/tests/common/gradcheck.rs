//! Central finite-difference checks shared by the gradient tests and the
//! acceptance suite. Each `check_*` function builds one random instance from
//! `seed` and returns the relative error between the analytic gradient and the
//! numerical one over every input and parameter coordinate.

#![allow(dead_code)]

use distillkit::distill::{distill_loss, soften, DistillConfig};
use distillkit::residual::{separation_loss, LearnConfig, ResidualMap};
use distillkit::tensor::{Layer, LayerSpec, Network, Tensor};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-6;

pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute norm when both are tiny.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()));
    if scale < 1e-10 {
        diff
    } else {
        diff / scale
    }
}

fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn tensor(shape: &[usize], data: Vec<f64>) -> Tensor {
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Scalar probe `Σ g ⊙ layer(x)`.
fn probe(layer: &Layer, x: &Tensor, g: &[f64]) -> f64 {
    let y = layer.forward(x).unwrap();
    y.data().iter().zip(g).map(|(a, b)| a * b).sum()
}

fn layer_error(layer: &Layer, x: &Tensor, rng: &mut impl Rng) -> f64 {
    let out_shape = layer.output_shape(x.shape()).unwrap();
    let g = uniform(rng, out_shape.iter().product(), -1.0, 1.0);
    let (dx, dparams) = layer.backward(x, &tensor(&out_shape, g.clone())).unwrap();

    let mut analytic = dx.data().to_vec();
    let mut numeric = central_diff(x.data(), STEP, |v| {
        probe(layer, &tensor(x.shape(), v.to_vec()), &g)
    });
    for (p, (_, param)) in layer.params().into_iter().enumerate() {
        analytic.extend_from_slice(dparams[p].data());
        numeric.extend(central_diff(param.data(), STEP, |v| {
            let mut l = layer.clone();
            l.params_mut()[p].1.data_mut().copy_from_slice(v);
            probe(&l, x, &g)
        }));
    }
    rel_err(&analytic, &numeric)
}

/// Layer kinds covered by [`check_layer`].
pub const LAYER_KINDS: [&str; 4] = ["conv", "max_pool", "dense", "relu"];

pub fn check_layer(kind: &str, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = rng.random_range(1..=3);
    let (h, w) = (rng.random_range(5..=9), rng.random_range(5..=9));
    let shape = [channels, h, w];
    let n = channels * h * w;
    let (spec, x) = match kind {
        "conv" => (
            LayerSpec::Conv {
                out_channels: rng.random_range(1..=3),
                kernel: rng.random_range(1..=3),
                stride: rng.random_range(1..=2),
            },
            uniform(&mut rng, n, -1.0, 1.0),
        ),
        "dense" => (
            LayerSpec::Dense {
                outputs: rng.random_range(1..=4),
            },
            uniform(&mut rng, n, -1.0, 1.0),
        ),
        "max_pool" => {
            // Distinct values at least 0.01 apart keep every window's maximum
            // unique under a ±1e−6 probe.
            let mut ranks: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
            ranks.shuffle(&mut rng);
            (
                LayerSpec::MaxPool {
                    size: rng.random_range(2..=3),
                    stride: Some(rng.random_range(1..=3)),
                },
                ranks,
            )
        }
        "relu" => {
            // Stay clear of the kink at zero.
            let x = (0..n)
                .map(|_| {
                    let v: f64 = rng.random_range(0.01..1.0);
                    if rng.random_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            (LayerSpec::Relu, x)
        }
        other => panic!("unknown layer kind {other}"),
    };
    let mut layer = spec.build(&shape, &mut rng).unwrap();
    for (_, p) in layer.params_mut() {
        for v in p.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    layer_error(&layer, &tensor(&shape, x), &mut rng)
}

/// Whole-network check: conv → relu → pool → dense, input and all parameters.
pub fn check_network(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs = [
        LayerSpec::Conv {
            out_channels: 2,
            kernel: 3,
            stride: 1,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool {
            size: 2,
            stride: None,
        },
        LayerSpec::Dense { outputs: 3 },
    ];
    let mut net = Network::build(&[1, 8, 8], &specs, seed).unwrap();
    let batch = 2;
    let x = tensor(&[batch, 1, 8, 8], uniform(&mut rng, batch * 64, -1.0, 1.0));
    let g = uniform(&mut rng, batch * 3, -1.0, 1.0);
    let value = |net: &Network, x: &Tensor| -> f64 {
        let y = net.predict(x).unwrap();
        y.data().iter().zip(&g).map(|(a, b)| a * b).sum()
    };
    net.forward(&x).unwrap();
    let (grads, dx) = net
        .backward_with_input(&tensor(&[batch, 3], g.clone()))
        .unwrap();

    let mut analytic = dx.data().to_vec();
    let mut numeric = central_diff(x.data(), STEP, |v| {
        value(&net, &tensor(x.shape(), v.to_vec()))
    });
    let ids: Vec<_> = net.params().into_iter().map(|(id, _)| id).collect();
    for id in ids {
        analytic.extend_from_slice(grads[&id].data());
        let base = net
            .params()
            .into_iter()
            .find(|(i, _)| *i == id)
            .unwrap()
            .1
            .data()
            .to_vec();
        numeric.extend(central_diff(&base, STEP, |v| {
            let mut n = net.clone();
            n.param_mut(&id).unwrap().data_mut().copy_from_slice(v);
            value(&n, &x)
        }));
    }
    rel_err(&analytic, &numeric)
}

pub fn check_distill_loss(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = rng.random_range(1..=5);
    let classes = rng.random_range(2..=5);
    let cfg = DistillConfig {
        temperature: *[1, 10, 20, 30, 40, 50].choose(&mut rng).unwrap(),
        soft_weight: rng.random_range(0.0..1.0),
        ..DistillConfig::default()
    };
    let shape = [batch, classes];
    let teacher = tensor(&shape, uniform(&mut rng, batch * classes, -3.0, 3.0));
    let soft = soften(&teacher, cfg.temperature as f64).unwrap();
    let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..classes)).collect();
    let logits = uniform(&mut rng, batch * classes, -3.0, 3.0);

    let (_, grad) = distill_loss(&tensor(&shape, logits.clone()), &soft, &labels, &cfg).unwrap();
    let numeric = central_diff(&logits, STEP, |v| {
        distill_loss(&tensor(&shape, v.to_vec()), &soft, &labels, &cfg)
            .unwrap()
            .0
    });
    rel_err(grad.data(), &numeric)
}

/// Separation objective through the straight-through quantizer surrogate,
/// with respect to the filter weights, classifier weights and bias.
pub fn check_separation_loss(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = LearnConfig::default();
    let bins = (2 * cfg.t_trunc as usize + 1).pow(cfg.order as u32);
    let offsets = [(0isize, 1isize), (0, -1), (1, 0), (-1, 0)];
    let images: Vec<ResidualMap> = (0..4)
        .map(|_| ResidualMap::from_fn(7, 7, |_, _| rng.random_range(0.0..3.0)).unwrap())
        .collect();
    let labels = [0u8, 1, 0, 1];
    let weights = uniform(&mut rng, offsets.len(), 0.0, 1.0);
    let classifier = uniform(&mut rng, bins, -0.5, 0.5);
    let bias = rng.random_range(-0.5..0.5);

    let loss = |w: &[f64], c: &[f64], b: f64| {
        separation_loss(&images, &labels, &offsets, w, c, b, &cfg)
            .unwrap()
            .0
    };
    let (_, grad) = separation_loss(
        &images,
        &labels,
        &offsets,
        &weights,
        &classifier,
        bias,
        &cfg,
    )
    .unwrap();
    let mut analytic = grad.weights.clone();
    analytic.extend(&grad.classifier);
    analytic.push(grad.bias);
    let mut numeric = central_diff(&weights, STEP, |w| loss(w, &classifier, bias));
    numeric.extend(central_diff(&classifier, STEP, |c| loss(&weights, c, bias)));
    numeric.extend(central_diff(&[bias], STEP, |b| {
        loss(&weights, &classifier, b[0])
    }));
    rel_err(&analytic, &numeric)
}
