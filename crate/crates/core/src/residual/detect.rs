use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    /// L2 penalty on the weights (not the bias).
    pub l2: f64,
    pub iterations: usize,
    pub lr: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            l2: 1e-2,
            iterations: 300,
            lr: 0.5,
        }
    }
}

/// L2-regularized logistic regression on z-scored features, fitted by
/// full-batch gradient descent. Label 1 means stego.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticDetector {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

impl LogisticDetector {
    pub fn fit(cover: &[Vec<f64>], stego: &[Vec<f64>], cfg: &DetectorConfig) -> Result<Self> {
        if cover.len() < 2 || stego.len() < 2 {
            return Err(Error::Data(format!(
                "detector needs at least 2 examples per class, got {} cover and {} stego",
                cover.len(),
                stego.len()
            )));
        }
        if !(cfg.lr > 0.0 && cfg.lr.is_finite() && cfg.l2 >= 0.0) {
            return Err(Error::Config(
                "detector lr must be positive and l2 non-negative".into(),
            ));
        }
        let dim = cover[0].len();
        let rows: Vec<(&[f64], f64)> = cover
            .iter()
            .map(|x| (x.as_slice(), 0.0))
            .chain(stego.iter().map(|x| (x.as_slice(), 1.0)))
            .collect();
        if let Some((x, _)) = rows.iter().find(|(x, _)| x.len() != dim) {
            return Err(Error::Shape(format!(
                "feature length {} differs from {dim}",
                x.len()
            )));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for (x, _) in &rows {
            for (m, v) in mean.iter_mut().zip(*x) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; dim];
        for (x, _) in &rows {
            for ((s, v), m) in scale.iter_mut().zip(*x).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        // constant features get scale 0 and drop out
        for s in &mut scale {
            *s = if *s > 1e-24 { 1.0 / s.sqrt() } else { 0.0 };
        }
        let z: Vec<(Vec<f64>, f64)> = rows
            .iter()
            .map(|(x, y)| {
                let zx = x
                    .iter()
                    .zip(&mean)
                    .zip(&scale)
                    .map(|((v, m), s)| (v - m) * s)
                    .collect();
                (zx, *y)
            })
            .collect();

        let mut det = Self {
            mean,
            scale,
            weights: vec![0.0; dim],
            bias: 0.0,
        };
        let mut gw = vec![0.0; dim];
        for _ in 0..cfg.iterations {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for (x, y) in &z {
                let r = sigmoid(dot(&det.weights, x) + det.bias) - y;
                for (g, v) in gw.iter_mut().zip(x) {
                    *g += r * v / n;
                }
                gb += r / n;
            }
            for (w, g) in det.weights.iter_mut().zip(&gw) {
                *w -= cfg.lr * (g + cfg.l2 * *w);
            }
            det.bias -= cfg.lr * gb;
        }
        Ok(det)
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let mut s = self.bias;
        for (((w, v), m), k) in self.weights.iter().zip(x).zip(&self.mean).zip(&self.scale) {
            s += w * (v - m) * k;
        }
        s
    }

    /// 1 (stego) when the stego probability exceeds one half.
    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) > 0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub labels: Vec<u8>,
    /// Fraction of correct labels when ground truth was supplied.
    pub accuracy: Option<f64>,
    pub detector: LogisticDetector,
}

/// Fits a detector on cover/stego training features and labels `test`.
pub fn detect(
    cover: &[Vec<f64>],
    stego: &[Vec<f64>],
    test: &[Vec<f64>],
    truth: Option<&[u8]>,
    cfg: &DetectorConfig,
) -> Result<Detection> {
    let detector = LogisticDetector::fit(cover, stego, cfg)?;
    if let Some(x) = test.iter().find(|x| x.len() != detector.weights.len()) {
        return Err(Error::Shape(format!(
            "test feature length {} differs from {}",
            x.len(),
            detector.weights.len()
        )));
    }
    let labels: Vec<u8> = test.iter().map(|x| detector.predict(x)).collect();
    let accuracy = match truth {
        Some(t) if t.len() != labels.len() => {
            return Err(Error::Shape(format!(
                "{} truth labels for {} examples",
                t.len(),
                labels.len()
            )))
        }
        Some(_) if labels.is_empty() => None,
        Some(t) => {
            let hits = labels.iter().zip(t).filter(|(a, b)| a == b).count();
            Some(hits as f64 / labels.len() as f64)
        }
        None => None,
    };
    Ok(Detection {
        labels,
        accuracy,
        detector,
    })
}
