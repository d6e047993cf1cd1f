use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cooc::soft_cooccurrence_backward;
use super::{
    cooccurrence_features, directional_residual, quantize_truncate, soft_cooccurrence, Direction,
    FilterSpec, QuantizerParams, ResidualMap,
};
use crate::data::GrayImage;
use crate::tensor::{sgd_momentum_step, MomentumState, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnConfig {
    pub t_trunc: u32,
    pub c: f64,
    pub order: usize,
    pub direction: Direction,
    pub epochs: usize,
    pub filter_lr: f64,
    pub classifier_lr: f64,
    pub momentum: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            t_trunc: 2,
            c: 1.0,
            order: 2,
            direction: Direction::Horizontal,
            epochs: 60,
            filter_lr: 3e-3,
            classifier_lr: 2e-2,
            momentum: 0.9,
        }
    }
}

impl LearnConfig {
    fn quantizer(&self) -> QuantizerParams {
        QuantizerParams {
            c: self.c,
            t_trunc: self.t_trunc,
        }
    }

    fn bins(&self) -> usize {
        (2 * self.t_trunc as usize + 1).pow(self.order as u32)
    }
}

/// Gradients of [`separation_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationGrad {
    pub weights: Vec<f64>,
    pub classifier: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedFilter {
    /// Directional filter with the learned weights.
    pub filter: FilterSpec,
    pub classifier: Vec<f64>,
    pub bias: f64,
    /// Training loss before each epoch's update, then after the last one.
    pub loss_trace: Vec<f64>,
    /// Training accuracy of the learned classifier on hard-quantized features.
    pub train_accuracy: f64,
}

fn softplus(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Training objective for filter learning.
///
/// For each image: the directional residual with `weights`, scaled by `1/c`
/// and clamped to `[−T, T]` (the straight-through stand-in for rounding),
/// summarized by [`soft_cooccurrence`] and multiplied by the bin count so
/// that features average one; then a linear score `classifier·φ + bias` and
/// the logistic loss against `labels` (1 = stego), averaged over images.
pub fn separation_loss(
    images: &[ResidualMap],
    labels: &[u8],
    offsets: &[(isize, isize)],
    weights: &[f64],
    classifier: &[f64],
    bias: f64,
    cfg: &LearnConfig,
) -> Result<(f64, SeparationGrad)> {
    if images.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} images for {} labels",
            images.len(),
            labels.len()
        )));
    }
    if images.is_empty() {
        return Err(Error::Data("no training images".into()));
    }
    let bins = cfg.bins();
    if classifier.len() != bins {
        return Err(Error::Shape(format!(
            "{} classifier weights for {bins} bins",
            classifier.len()
        )));
    }
    cfg.quantizer().validate()?;
    let n = images.len() as f64;
    let t = cfg.t_trunc as f64;
    let scale = bins as f64;

    let per_image: Vec<(f64, SeparationGrad)> = images
        .par_iter()
        .zip(labels)
        .map(|(img, &label)| {
            let r = directional_residual(img, offsets, weights)?;
            let u = r.map(|v| v / cfg.c);
            let s = u.map(|v| v.clamp(-t, t));
            let h = soft_cooccurrence(&s, cfg.t_trunc, cfg.order, cfg.direction)?;
            let phi: Vec<f64> = h.iter().map(|v| v * scale).collect();
            let score = bias + phi.iter().zip(classifier).map(|(a, b)| a * b).sum::<f64>();
            let y = label as f64;
            let loss = softplus(score) - y * score;
            let d_score = (sigmoid(score) - y) / n;

            let d_h: Vec<f64> = classifier.iter().map(|c| d_score * c * scale).collect();
            let d_s = soft_cooccurrence_backward(&s, cfg.t_trunc, cfg.order, cfg.direction, &d_h)?;
            let mut d_w = vec![0.0; weights.len()];
            let (rows, cols) = (r.rows(), r.cols());
            let top = offsets.iter().map(|o| o.0).min().unwrap_or(0).min(0);
            let left = offsets.iter().map(|o| o.1).min().unwrap_or(0).min(0);
            for oi in 0..rows {
                for oj in 0..cols {
                    let k = oi * cols + oj;
                    if u.data()[k].abs() >= t {
                        continue;
                    }
                    let d_r = d_s[k] / cfg.c;
                    if d_r == 0.0 {
                        continue;
                    }
                    let (i, j) = ((oi as isize - top) as usize, (oj as isize - left) as usize);
                    let centre = img.get(i, j);
                    for (g, &(di, dj)) in d_w.iter_mut().zip(offsets) {
                        let nb = img.get((i as isize + di) as usize, (j as isize + dj) as usize);
                        *g += d_r * (nb - centre);
                    }
                }
            }
            let grad = SeparationGrad {
                weights: d_w,
                classifier: phi.iter().map(|p| d_score * p).collect(),
                bias: d_score,
            };
            Ok((loss / n, grad))
        })
        .collect::<Result<_>>()?;

    let mut loss = 0.0;
    let mut total = SeparationGrad {
        weights: vec![0.0; weights.len()],
        classifier: vec![0.0; bins],
        bias: 0.0,
    };
    for (l, g) in per_image {
        loss += l;
        add_into(&mut total.weights, &g.weights);
        add_into(&mut total.classifier, &g.classifier);
        total.bias += g.bias;
    }
    Ok((loss, total))
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

fn hard_features(
    img: &ResidualMap,
    offsets: &[(isize, isize)],
    weights: &[f64],
    cfg: &LearnConfig,
) -> Result<Vec<f64>> {
    let r = directional_residual(img, offsets, weights)?;
    let rq = quantize_truncate(&r, &cfg.quantizer())?;
    let scale = cfg.bins() as f64;
    Ok(
        cooccurrence_features(&rq, cfg.t_trunc, cfg.order, cfg.direction)?
            .into_iter()
            .map(|v| v * scale)
            .collect(),
    )
}

/// Learns directional filter weights, jointly with a linear classifier, by
/// full-batch momentum SGD on [`separation_loss`] over cover (label 0) and
/// stego (label 1) images.
pub fn learn_filter_weights(
    pairs: &[(GrayImage, GrayImage)],
    init: &FilterSpec,
    cfg: &LearnConfig,
) -> Result<LearnedFilter> {
    if pairs.is_empty() {
        return Err(Error::Data(
            "filter learning needs at least one cover/stego pair".into(),
        ));
    }
    if init.lambda.is_some() {
        return Err(Error::Config(
            "learned filters use the directional form; omit lambda".into(),
        ));
    }
    init.predictor()?;
    let offsets = init.offsets();
    let mut images = Vec::with_capacity(2 * pairs.len());
    let mut labels = Vec::with_capacity(2 * pairs.len());
    for (cover, stego) in pairs {
        images.push(ResidualMap::from_image(cover));
        labels.push(0u8);
        images.push(ResidualMap::from_image(stego));
        labels.push(1u8);
    }
    let bins = cfg.bins();
    let p = offsets.len();
    let mut w = Tensor::new(vec![p], init.weights.clone())?;
    let mut theta = Tensor::zeros(&[bins]);
    let mut b = Tensor::zeros(&[1]);
    let mut w_state = MomentumState::new(&[p], cfg.momentum, cfg.filter_lr)?;
    let mut theta_state = MomentumState::new(&[bins], cfg.momentum, cfg.classifier_lr)?;
    let mut b_state = MomentumState::new(&[1], cfg.momentum, cfg.classifier_lr)?;

    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..=cfg.epochs {
        let (loss, g) = separation_loss(
            &images,
            &labels,
            &offsets,
            w.data(),
            theta.data(),
            b.data()[0],
            cfg,
        )?;
        trace.push(loss);
        if epoch == cfg.epochs {
            break;
        }
        sgd_momentum_step(&mut w, &Tensor::new(vec![p], g.weights)?, &mut w_state)?;
        sgd_momentum_step(
            &mut theta,
            &Tensor::new(vec![bins], g.classifier)?,
            &mut theta_state,
        )?;
        sgd_momentum_step(&mut b, &Tensor::new(vec![1], vec![g.bias])?, &mut b_state)?;
    }

    let bias = b.data()[0];
    let correct = images
        .par_iter()
        .zip(&labels)
        .map(|(img, &y)| {
            let phi = hard_features(img, &offsets, w.data(), cfg)?;
            let s = bias
                + phi
                    .iter()
                    .zip(theta.data())
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            Ok(usize::from(u8::from(s > 0.0) == y))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(LearnedFilter {
        filter: FilterSpec {
            offsets: init.offsets.clone(),
            weights: w.into_data(),
            lambda: None,
        },
        classifier: theta.into_data(),
        bias,
        loss_trace: trace,
        train_accuracy: correct as f64 / images.len() as f64,
    })
}
