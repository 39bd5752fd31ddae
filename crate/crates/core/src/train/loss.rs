use crate::error::{Error, Result};
use crate::model::{ProbMap, Real};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-7;

/// `-mean(w * y * ln p + (1 - y) * ln(1 - p))` over every pixel.
pub fn weighted_bce<R: Real>(probs: &ProbMap<R>, labels: &[u8], pos_weight: f64) -> Result<f64> {
    if probs.values.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} probabilities vs {} labels",
            probs.values.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (&p, &y) in probs.values.iter().zip(labels) {
        let p = p.to_f64().unwrap().clamp(EPS, 1.0 - EPS);
        total -= if y != 0 { pos_weight * p.ln() } else { (1.0 - p).ln() };
    }
    Ok(total / labels.len() as f64)
}
