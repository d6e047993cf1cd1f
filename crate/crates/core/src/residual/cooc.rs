use serde::{Deserialize, Serialize};

use super::ResidualMap;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Horizontal,
    Vertical,
}

/// Start coordinates of every `d`-tuple along `dir`, and the step between
/// consecutive tuple members in the flat buffer.
fn tuples(map: &ResidualMap, order: usize, dir: Direction) -> Result<(Vec<usize>, usize)> {
    if order < 2 {
        return Err(Error::Config(format!(
            "co-occurrence order must be >= 2, got {order}"
        )));
    }
    let (rows, cols) = (map.rows(), map.cols());
    let extent = match dir {
        Direction::Horizontal => cols,
        Direction::Vertical => rows,
    };
    if extent < order {
        return Err(Error::Shape(format!(
            "{rows}x{cols} map has no {order}-tuples along {dir:?}"
        )));
    }
    let (r_end, c_end, step) = match dir {
        Direction::Horizontal => (rows, cols - order + 1, 1),
        Direction::Vertical => (rows - order + 1, cols, cols),
    };
    let starts = (0..r_end)
        .flat_map(|i| (0..c_end).map(move |j| i * cols + j))
        .collect();
    Ok((starts, step))
}

fn bins(t_trunc: u32, order: usize) -> Result<(usize, usize)> {
    if t_trunc == 0 {
        return Err(Error::Config("truncation bound must be >= 1".into()));
    }
    let base = 2 * t_trunc as usize + 1;
    let total = base
        .checked_pow(order as u32)
        .filter(|&n| n <= 1 << 24)
        .ok_or_else(|| Error::Config(format!("{base}^{order} co-occurrence bins is too many")))?;
    Ok((base, total))
}

/// Normalized histogram of consecutive `order`-tuples of a quantized map.
///
/// A tuple `(v_0, …, v_{d−1})` falls in bin `Σ_k (v_k + T)·(2T+1)^(d−1−k)`,
/// so the first member is the most significant digit.
pub fn cooccurrence_features(
    rq: &ResidualMap,
    t_trunc: u32,
    order: usize,
    dir: Direction,
) -> Result<Vec<f64>> {
    let (base, total) = bins(t_trunc, order)?;
    let t = t_trunc as f64;
    if let Some(v) = rq
        .data()
        .iter()
        .find(|v| v.fract() != 0.0 || v.abs() > t || !v.is_finite())
    {
        return Err(Error::Data(format!(
            "co-occurrence input {v} is not an integer in [-{t_trunc}, {t_trunc}]"
        )));
    }
    let (starts, step) = tuples(rq, order, dir)?;
    let data = rq.data();
    let mut hist = vec![0.0; total];
    for &s in &starts {
        let mut idx = 0;
        for k in 0..order {
            idx = idx * base + (data[s + k * step] + t) as usize;
        }
        hist[idx] += 1.0;
    }
    let n = starts.len() as f64;
    hist.iter_mut().for_each(|h| *h /= n);
    Ok(hist)
}

/// Splits a real value in `[−T, T]` between its two neighbouring bins with
/// linear (triangular-kernel) weights. Returns `(lower bin digit, weight of
/// the upper bin)`; the lower bin gets `1 − weight`.
fn split_value(x: f64, t: f64) -> (usize, f64) {
    let lower = x.floor().clamp(-t, t - 1.0);
    ((lower + t) as usize, x - lower)
}

/// Co-occurrence histogram of a real-valued map whose entries lie in
/// `[−T, T]`, with each value spread over its two nearest bins by a
/// triangular kernel. On integer input it equals [`cooccurrence_features`];
/// in between it is piecewise multilinear and therefore differentiable almost
/// everywhere.
pub fn soft_cooccurrence(
    x: &ResidualMap,
    t_trunc: u32,
    order: usize,
    dir: Direction,
) -> Result<Vec<f64>> {
    let (base, total) = bins(t_trunc, order)?;
    let (starts, step) = tuples(x, order, dir)?;
    let t = t_trunc as f64;
    let data = x.data();
    let mut hist = vec![0.0; total];
    let mut parts = vec![(0usize, 0.0f64); order];
    for &s in &starts {
        for (k, p) in parts.iter_mut().enumerate() {
            *p = split_value(data[s + k * step], t);
        }
        for corner in 0..1usize << order {
            let mut idx = 0;
            let mut w = 1.0;
            for (k, &(lo, up)) in parts.iter().enumerate() {
                let hi = corner >> (order - 1 - k) & 1 == 1;
                idx = idx * base + lo + usize::from(hi);
                w *= if hi { up } else { 1.0 - up };
            }
            hist[idx] += w;
        }
    }
    let n = starts.len() as f64;
    hist.iter_mut().for_each(|h| *h /= n);
    Ok(hist)
}

/// Gradient of `Σ_b grad_hist[b] · soft_cooccurrence(x)[b]` with respect to
/// every entry of `x`.
pub(crate) fn soft_cooccurrence_backward(
    x: &ResidualMap,
    t_trunc: u32,
    order: usize,
    dir: Direction,
    grad_hist: &[f64],
) -> Result<Vec<f64>> {
    let (base, total) = bins(t_trunc, order)?;
    if grad_hist.len() != total {
        return Err(Error::Shape(format!(
            "{} histogram gradients for {total} bins",
            grad_hist.len()
        )));
    }
    let (starts, step) = tuples(x, order, dir)?;
    let t = t_trunc as f64;
    let data = x.data();
    let n = starts.len() as f64;
    let mut grad = vec![0.0; data.len()];
    let mut parts = vec![(0usize, 0.0f64); order];
    for &s in &starts {
        for (k, p) in parts.iter_mut().enumerate() {
            *p = split_value(data[s + k * step], t);
        }
        for corner in 0..1usize << order {
            let mut idx = 0;
            for (k, &(lo, _)) in parts.iter().enumerate() {
                let hi = corner >> (order - 1 - k) & 1 == 1;
                idx = idx * base + lo + usize::from(hi);
            }
            let g = grad_hist[idx] / n;
            if g == 0.0 {
                continue;
            }
            for k in 0..order {
                let mut d = 1.0;
                for (l, &(_, up)) in parts.iter().enumerate() {
                    let hi = corner >> (order - 1 - l) & 1 == 1;
                    d *= match (l == k, hi) {
                        (true, true) => 1.0,
                        (true, false) => -1.0,
                        (false, true) => up,
                        (false, false) => 1.0 - up,
                    };
                }
                grad[s + k * step] += g * d;
            }
        }
    }
    Ok(grad)
}
