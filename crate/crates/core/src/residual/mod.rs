//! Spatial-domain steganalysis: the ±1 embedding simulator, linear and
//! hand-crafted residual filters, quantize/truncate, co-occurrence features,
//! a logistic detector and learnable directional-difference filters.
//!
//! Maps are indexed `(i, j)` = `(row, column)`. Every filter is evaluated on
//! the valid region only; no padding is applied.

mod cooc;
mod detect;
mod embed;
mod features;
mod learn;

use serde::{Deserialize, Serialize};

use crate::data::GrayImage;
use crate::tensor::conv_output_size;
use crate::{Error, Result};

pub use cooc::{cooccurrence_features, soft_cooccurrence, Direction};
pub use detect::{detect, Detection, DetectorConfig, LogisticDetector};
pub use embed::{embed, EmbedMode, StegoSignal};
pub use features::{
    extract_features, features_from_csv, features_to_csv, FeatureComponent, FeatureSpec,
    ResidualKind,
};
pub use learn::{
    learn_filter_weights, separation_loss, LearnConfig, LearnedFilter, SeparationGrad,
};

/// A real-valued 2-D map stored row-major. Used both for images promoted to
/// `f64` and for residuals before and after quantization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ResidualMap {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("empty map {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} map needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn from_image(img: &GrayImage) -> Self {
        Self {
            rows: img.height(),
            cols: img.width(),
            data: img.pixels().iter().map(|&p| p as f64).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Value at `(i + di, j + dj)`; the caller guarantees it is in range.
    fn at(&self, i: usize, j: usize, di: isize, dj: isize) -> f64 {
        let r = (i as isize + di) as usize;
        let c = (j as isize + dj) as usize;
        self.data[r * self.cols + c]
    }
}

/// Linear predictor `f(M) = Σ w_p Z(i + di_p, j + dj_p)` of order `lambda`;
/// the residual is `f(M) − λ·Z(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    offsets: Vec<(isize, isize)>,
    weights: Vec<f64>,
    lambda: f64,
}

impl Predictor {
    pub fn new(offsets: Vec<(isize, isize)>, weights: Vec<f64>, lambda: f64) -> Result<Self> {
        check_offsets(&offsets, &weights)?;
        if !lambda.is_finite() {
            return Err(Error::Config(format!(
                "predictor order {lambda} is not finite"
            )));
        }
        Ok(Self {
            offsets,
            weights,
            lambda,
        })
    }

    /// The directional form: `λ = Σ w_p`.
    pub fn directional(offsets: Vec<(isize, isize)>, weights: Vec<f64>) -> Result<Self> {
        let lambda = weights.iter().sum();
        Self::new(offsets, weights, lambda)
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Output dimensions on an `rows x cols` input.
    pub fn output_dims(&self, rows: usize, cols: usize) -> Result<(usize, usize)> {
        let w = Window::of(&self.offsets);
        w.output_dims(rows, cols)
    }
}

fn check_offsets(offsets: &[(isize, isize)], weights: &[f64]) -> Result<()> {
    if offsets.is_empty() {
        return Err(Error::Config("filter has no taps".into()));
    }
    if offsets.len() != weights.len() {
        return Err(Error::Config(format!(
            "{} offsets but {} weights",
            offsets.len(),
            weights.len()
        )));
    }
    if offsets.contains(&(0, 0)) {
        return Err(Error::Config(
            "offset (0, 0) is the centre pixel and cannot be a tap".into(),
        ));
    }
    for (k, o) in offsets.iter().enumerate() {
        if offsets[..k].contains(o) {
            return Err(Error::Config(format!("duplicate offset {o:?}")));
        }
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::Config(format!("filter weight {w} is not finite")));
    }
    Ok(())
}

/// Bounding box of the taps together with the centre pixel.
#[derive(Debug, Clone, Copy)]
struct Window {
    top: isize,
    bottom: isize,
    left: isize,
    right: isize,
}

impl Window {
    fn of(offsets: &[(isize, isize)]) -> Self {
        let mut w = Window {
            top: 0,
            bottom: 0,
            left: 0,
            right: 0,
        };
        for &(di, dj) in offsets {
            w.top = w.top.min(di);
            w.bottom = w.bottom.max(di);
            w.left = w.left.min(dj);
            w.right = w.right.max(dj);
        }
        w
    }

    fn output_dims(&self, rows: usize, cols: usize) -> Result<(usize, usize)> {
        let h = (self.bottom - self.top) as usize + 1;
        let w = (self.right - self.left) as usize + 1;
        if h > rows || w > cols {
            return Err(Error::Shape(format!(
                "{h}x{w} filter window does not fit a {rows}x{cols} image"
            )));
        }
        Ok((rows - h + 1, cols - w + 1))
    }

    /// Output `(oi, oj)` sits on input centre `(oi - top, oj - left)`.
    fn apply(
        &self,
        img: &ResidualMap,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<ResidualMap> {
        let (oh, ow) = self.output_dims(img.rows, img.cols)?;
        let (i0, j0) = ((-self.top) as usize, (-self.left) as usize);
        ResidualMap::from_fn(oh, ow, |oi, oj| f(oi + i0, oj + j0))
    }
}

/// `R(i, j) = f(M(i, j)) − λ·Z(i, j)` over the valid region.
pub fn residual_predict(img: &ResidualMap, predictor: &Predictor) -> Result<ResidualMap> {
    Window::of(&predictor.offsets).apply(img, |i, j| {
        let mut f = 0.0;
        for (&(di, dj), &w) in predictor.offsets.iter().zip(&predictor.weights) {
            f += w * img.at(i, j, di, dj);
        }
        f - predictor.lambda * img.get(i, j)
    })
}

/// `R(i, j) = Σ_p w_p (Z(i + di_p, j + dj_p) − Z(i, j))`.
pub fn directional_residual(
    img: &ResidualMap,
    offsets: &[(isize, isize)],
    weights: &[f64],
) -> Result<ResidualMap> {
    check_offsets(offsets, weights)?;
    Window::of(offsets).apply(img, |i, j| {
        let centre = img.get(i, j);
        let mut r = 0.0;
        for (&(di, dj), &w) in offsets.iter().zip(weights) {
            r += w * (img.at(i, j, di, dj) - centre);
        }
        r
    })
}

/// Horizontal first difference `Z(i, j+1) − Z(i, j)`; width shrinks by one.
pub fn residual_first_order(img: &ResidualMap) -> Result<ResidualMap> {
    if img.cols < 2 {
        return Err(Error::Shape(format!(
            "first-order residual needs at least 2 columns, got {}",
            img.cols
        )));
    }
    ResidualMap::from_fn(img.rows, img.cols - 1, |i, j| {
        img.get(i, j + 1) - img.get(i, j)
    })
}

fn require_3x3(img: &ResidualMap, what: &str) -> Result<()> {
    if img.rows < 3 || img.cols < 3 {
        return Err(Error::Shape(format!(
            "{what} needs at least a 3x3 image, got {}x{}",
            img.rows, img.cols
        )));
    }
    Ok(())
}

/// `2Z(i,j−1) − Z(i−1,j−1) − Z(i+1,j−1) + 2Z(i+1,j) − 4Z(i,j)` on interior
/// pixels, coefficient for coefficient.
pub fn residual_second_order(img: &ResidualMap) -> Result<ResidualMap> {
    require_3x3(img, "second-order residual")?;
    ResidualMap::from_fn(img.rows - 2, img.cols - 2, |oi, oj| {
        let (i, j) = (oi + 1, oj + 1);
        2.0 * img.get(i, j - 1) - img.get(i - 1, j - 1) - img.get(i + 1, j - 1)
            + 2.0 * img.get(i + 1, j)
            - 4.0 * img.get(i, j)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinMax {
    Min,
    Max,
}

/// Minimum (or maximum) of the horizontal and vertical second differences.
pub fn residual_minmax(img: &ResidualMap, mode: MinMax) -> Result<ResidualMap> {
    require_3x3(img, "min/max residual")?;
    ResidualMap::from_fn(img.rows - 2, img.cols - 2, |oi, oj| {
        let (i, j) = (oi + 1, oj + 1);
        let c = 2.0 * img.get(i, j);
        let h = img.get(i, j - 1) + img.get(i, j + 1) - c;
        let v = img.get(i - 1, j) + img.get(i + 1, j) - c;
        match mode {
            MinMax::Min => h.min(v),
            MinMax::Max => h.max(v),
        }
    })
}

/// Quantization step `c` and truncation bound `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizerParams {
    pub c: f64,
    pub t_trunc: u32,
}

impl Default for QuantizerParams {
    fn default() -> Self {
        Self { c: 1.0, t_trunc: 2 }
    }
}

impl QuantizerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!(
                "quantization step {} must be positive",
                self.c
            )));
        }
        if self.t_trunc == 0 {
            return Err(Error::Config("truncation bound must be >= 1".into()));
        }
        Ok(())
    }

    /// Additionally ties `c` to the predictor order: `c ∈ {λ, 1.5λ, 2λ}` for
    /// `λ > 1` and `c ∈ {1, 2}` otherwise.
    pub fn validate_strict(&self, lambda: f64) -> Result<()> {
        self.validate()?;
        let allowed: Vec<f64> = if lambda > 1.0 {
            vec![lambda, 1.5 * lambda, 2.0 * lambda]
        } else {
            vec![1.0, 2.0]
        };
        if allowed.iter().any(|&a| (a - self.c).abs() <= 1e-12 * a) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "step {} not allowed for order {lambda}; expected one of {allowed:?}",
                self.c
            )))
        }
    }
}

/// `clamp(round(r / c), −T, T)` with halves rounded away from zero.
pub fn quantize_value(r: f64, q: &QuantizerParams) -> f64 {
    let t = q.t_trunc as f64;
    (r / q.c).round().clamp(-t, t)
}

pub fn quantize_truncate(r: &ResidualMap, q: &QuantizerParams) -> Result<ResidualMap> {
    q.validate()?;
    if let Some(v) = r.data.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("residual value {v}")));
    }
    Ok(r.map(|v| quantize_value(v, q)))
}

/// Sliding `k x k` weighted sum with stride `s`, scanned left to right then
/// top to bottom.
pub fn residual_map_scan(
    img: &ResidualMap,
    filter: &ResidualMap,
    stride: usize,
) -> Result<ResidualMap> {
    if filter.rows != filter.cols {
        return Err(Error::Config(format!(
            "scan filter must be square, got {}x{}",
            filter.rows, filter.cols
        )));
    }
    let k = filter.rows;
    let (oh, ow) = conv_output_size(img.rows, img.cols, k, stride)?;
    ResidualMap::from_fn(oh, ow, |oi, oj| {
        let mut acc = 0.0;
        for a in 0..k {
            for b in 0..k {
                acc += filter.get(a, b) * img.get(oi * stride + a, oj * stride + b);
            }
        }
        acc
    })
}

/// JSON description of a user-defined filter. Without `lambda` the filter is
/// read in directional form (`λ = Σ w_p`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub offsets: Vec<[isize; 2]>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl FilterSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.predictor()?;
        Ok(spec)
    }

    pub fn offsets(&self) -> Vec<(isize, isize)> {
        self.offsets.iter().map(|o| (o[0], o[1])).collect()
    }

    pub fn predictor(&self) -> Result<Predictor> {
        match self.lambda {
            Some(l) => Predictor::new(self.offsets(), self.weights.clone(), l),
            None => Predictor::directional(self.offsets(), self.weights.clone()),
        }
    }

    /// The four nearest neighbours with weight 1 on the right neighbour only.
    pub fn four_neighbour() -> Self {
        Self {
            offsets: vec![[0, 1], [0, -1], [1, 0], [-1, 0]],
            weights: vec![1.0, 0.0, 0.0, 0.0],
            lambda: None,
        }
    }
}
