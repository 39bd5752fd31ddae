use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BatchTensor;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub patch_id: String,
    pub region: String,
    pub year: u32,
    pub crop: String,
    /// 0-based composite windows that were gap-filled from their neighbours.
    #[serde(default)]
    pub filled_windows: Vec<usize>,
}

/// One spatial tile: time-series stack `x` `[T, C, H, W]` and binary label `y` `[H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSample {
    pub x: Vec<f32>,
    pub y: Vec<u8>,
    pub meta: SampleMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub t: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims {
    pub fn x_len(&self) -> usize {
        self.t * self.c * self.h * self.w
    }

    pub fn hw(&self) -> usize {
        self.h * self.w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub min: f32,
    pub max: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Test,
    #[default]
    Unsplit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchDataset {
    pub dims: Dims,
    pub feature_names: Vec<String>,
    pub region: String,
    pub year: u32,
    pub crop: String,
    pub samples: Vec<PatchSample>,
    /// Per-feature range: the statistics applied when `normalized`, else the observed raw range.
    pub norm_stats: Vec<FeatureStats>,
    pub normalized: bool,
    pub split_tag: SplitTag,
}

impl PatchDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_names.len() != self.dims.c {
            return Err(Error::Data(format!(
                "{} feature names for C = {}",
                self.feature_names.len(),
                self.dims.c
            )));
        }
        if self.norm_stats.len() != self.dims.c {
            return Err(Error::Data("norm_stats length differs from C".into()));
        }
        for s in &self.norm_stats {
            if !s.min.is_finite() || !s.max.is_finite() || s.min > s.max {
                return Err(Error::Data(format!("invalid norm stats {s:?}")));
            }
        }
        for s in &self.samples {
            if s.x.len() != self.dims.x_len() || s.y.len() != self.dims.hw() {
                return Err(Error::Data(format!("patch {} has wrong size", s.meta.patch_id)));
            }
            if s.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("patch {} has non-finite values", s.meta.patch_id)));
            }
            if s.y.iter().any(|&v| v > 1) {
                return Err(Error::Data(format!("patch {} has non-binary labels", s.meta.patch_id)));
            }
        }
        Ok(())
    }

    /// Same metadata, chosen samples.
    pub fn subset(&self, indices: &[usize], tag: SplitTag) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            split_tag: tag,
            ..self.header()
        }
    }

    /// Copy without samples.
    pub fn header(&self) -> Self {
        Self {
            dims: self.dims,
            feature_names: self.feature_names.clone(),
            region: self.region.clone(),
            year: self.year,
            crop: self.crop.clone(),
            samples: Vec::new(),
            norm_stats: self.norm_stats.clone(),
            normalized: self.normalized,
            split_tag: self.split_tag,
        }
    }

    /// Stacks samples into a model batch with steps past `t_avail` zeroed.
    pub fn batch(&self, indices: &[usize], t_avail: usize) -> Result<(BatchTensor<f32>, Vec<u8>)> {
        let d = self.dims;
        let mut values = Vec::with_capacity(indices.len() * d.x_len());
        let mut labels = Vec::with_capacity(indices.len() * d.hw());
        for &i in indices {
            let s = self
                .samples
                .get(i)
                .ok_or_else(|| Error::Argument(format!("sample index {i} out of range")))?;
            values.extend_from_slice(&s.x);
            labels.extend_from_slice(&s.y);
        }
        let batch = BatchTensor::new(
            values,
            [indices.len(), d.t, d.c, d.h, d.w],
            vec![t_avail.min(d.t); indices.len()],
        )?;
        Ok((batch, labels))
    }

    /// Keeps only the listed features, in the given order.
    pub fn select_features(&self, names: &[String]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| Error::Config(format!("dataset has no feature `{n}`")))
            })
            .collect::<Result<_>>()?;
        let d = self.dims;
        let hw = d.hw();
        let mut out = self.header();
        out.dims.c = idx.len();
        out.feature_names = names.to_vec();
        out.norm_stats = idx.iter().map(|&i| self.norm_stats[i]).collect();
        out.samples = self
            .samples
            .iter()
            .map(|s| {
                let mut x = Vec::with_capacity(d.t * idx.len() * hw);
                for t in 0..d.t {
                    for &c in &idx {
                        x.extend_from_slice(&s.x[(t * d.c + c) * hw..(t * d.c + c + 1) * hw]);
                    }
                }
                PatchSample {
                    x,
                    y: s.y.clone(),
                    meta: s.meta.clone(),
                }
            })
            .collect();
        Ok(out)
    }

    pub fn positive_fraction(&self) -> f64 {
        let pos: usize = self
            .samples
            .iter()
            .map(|s| s.y.iter().filter(|&&v| v == 1).count())
            .sum();
        pos as f64 / (self.samples.len() * self.dims.hw()).max(1) as f64
    }
}
