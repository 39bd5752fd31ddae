use crate::error::{Error, Result};

use super::sample::{Dims, FeatureStats, PatchDataset, PatchSample};

/// Per-feature min and max over every value of `samples`.
pub fn fit_normalization(samples: &[PatchSample], dims: Dims) -> Result<Vec<FeatureStats>> {
    if samples.is_empty() {
        return Err(Error::Data("cannot fit normalization on zero samples".into()));
    }
    let hw = dims.hw();
    let mut stats = vec![
        FeatureStats {
            min: f32::INFINITY,
            max: f32::NEG_INFINITY,
        };
        dims.c
    ];
    for s in samples {
        for t in 0..dims.t {
            for (c, st) in stats.iter_mut().enumerate() {
                for &v in &s.x[(t * dims.c + c) * hw..(t * dims.c + c + 1) * hw] {
                    st.min = st.min.min(v);
                    st.max = st.max.max(v);
                }
            }
        }
    }
    if stats.iter().any(|s| !s.min.is_finite() || !s.max.is_finite()) {
        return Err(Error::Data("non-finite normalization statistics".into()));
    }
    Ok(stats)
}

/// `(v - min) / (max - min)` clipped to `[0, 1]`; a degenerate range maps to 0.
pub fn normalize_value(v: f32, s: FeatureStats) -> f32 {
    let range = s.max - s.min;
    if range <= 0.0 {
        return 0.0;
    }
    ((v - s.min) / range).clamp(0.0, 1.0)
}

pub fn denormalize_value(v: f32, s: FeatureStats) -> f32 {
    s.min + v * (s.max - s.min)
}

/// Normalizes a `[T, C, H, W]` stack in place.
pub fn normalize(x: &mut [f32], dims: Dims, stats: &[FeatureStats]) -> Result<()> {
    if stats.len() != dims.c {
        return Err(Error::Data(format!("{} stats for {} features", stats.len(), dims.c)));
    }
    if let Some(s) = stats.iter().find(|s| !s.min.is_finite() || !s.max.is_finite()) {
        return Err(Error::Data(format!("non-finite normalization statistics {s:?}")));
    }
    let hw = dims.hw();
    for t in 0..dims.t {
        for (c, &s) in stats.iter().enumerate() {
            for v in &mut x[(t * dims.c + c) * hw..(t * dims.c + c + 1) * hw] {
                *v = normalize_value(*v, s);
            }
        }
    }
    Ok(())
}

impl PatchDataset {
    /// Copy normalized with `stats` (typically fitted on a training split).
    pub fn normalized_with(&self, stats: &[FeatureStats]) -> Result<Self> {
        let mut out = self.clone();
        for s in &mut out.samples {
            normalize(&mut s.x, self.dims, stats)?;
        }
        out.norm_stats = stats.to_vec();
        out.normalized = true;
        Ok(out)
    }
}
