use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::batch::ProbMap;
use super::kernels::Real;

/// Non-overlapping max-pooling along `time_axis` of a row-major array.
///
/// Returns the pooled values and the pooled shape.
pub fn temporal_maxpool<R: Real>(
    values: &[R],
    shape: &[usize],
    time_axis: usize,
    window: usize,
) -> Result<(Vec<R>, Vec<usize>)> {
    if time_axis >= shape.len() {
        return Err(Error::Dimension(format!(
            "time axis {time_axis} out of range for rank {}",
            shape.len()
        )));
    }
    let t = shape[time_axis];
    if window == 0 || !t.is_multiple_of(window) {
        return Err(Error::Dimension(format!(
            "time length {t} not divisible by window {window}"
        )));
    }
    if values.len() != shape.iter().product::<usize>() {
        return Err(Error::Dimension("value count does not match shape".into()));
    }
    let outer: usize = shape[..time_axis].iter().product();
    let inner: usize = shape[time_axis + 1..].iter().product();
    let pooled_t = t / window;
    let mut out = Vec::with_capacity(outer * pooled_t * inner);
    for o in 0..outer {
        for p in 0..pooled_t {
            for i in 0..inner {
                let mut m = R::neg_infinity();
                for s in p * window..(p + 1) * window {
                    m = m.max(values[(o * t + s) * inner + i]);
                }
                out.push(m);
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[time_axis] = pooled_t;
    Ok((out, new_shape))
}

/// Binary segmentation masks `[batch, H, W]` with values in {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMask {
    pub shape: [usize; 3],
    pub values: Vec<u8>,
}

impl BinaryMask {
    pub fn sample(&self, i: usize) -> &[u8] {
        let n = self.shape[1] * self.shape[2];
        &self.values[i * n..(i + 1) * n]
    }

    pub fn positives(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }
}

/// `1` where `prob >= threshold`.
pub fn binarize<R: Real>(probs: &ProbMap<R>, threshold: f64) -> BinaryMask {
    let th = R::c(threshold);
    BinaryMask {
        shape: probs.shape,
        values: probs.values.iter().map(|&p| u8::from(p >= th)).collect(),
    }
}
