use crate::{Error, Result};

/// Lower clamp applied to probabilities before taking their logarithm.
pub const LOG_CLAMP: f64 = 1e-12;

/// Temperature-scaled softmax `exp(z_i / T) / sum_j exp(z_j / T)`, evaluated
/// after subtracting the maximum logit.
pub fn softmax_t(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    if logits.is_empty() {
        return Err(Error::Domain("softmax of an empty vector".into()));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("softmax logits".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .iter()
        .map(|z| ((z - max) / temperature).exp())
        .collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    softmax_t(logits, 1.0)
}

/// `ln softmax_t(z, T)` computed by log-sum-exp.
pub fn log_softmax_t(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    if logits.is_empty() {
        return Err(Error::Domain("log-softmax of an empty vector".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits
        .iter()
        .map(|z| ((z - max) / temperature).exp())
        .sum::<f64>()
        .ln();
    Ok(logits
        .iter()
        .map(|z| (z - max) / temperature - lse)
        .collect())
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "temperature must be positive, got {t}"
        )))
    }
}

/// `-sum_i target_i * ln(max(probs_i, LOG_CLAMP))`.
pub fn cross_entropy(probs: &[f64], target: &[f64]) -> Result<f64> {
    if probs.len() != target.len() {
        return Err(Error::Shape(format!(
            "cross-entropy of {} probabilities against {} targets",
            probs.len(),
            target.len()
        )));
    }
    Ok(-probs
        .iter()
        .zip(target)
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| t * p.max(LOG_CLAMP).ln())
        .sum::<f64>())
}
