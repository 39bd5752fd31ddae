use serde::{Deserialize, Serialize};

use crate::data::{Dims, PatchDataset};
use crate::error::{Error, Result};
use crate::model::BinaryMask;

/// Mean time series of one feature over the true-positive and
/// false-negative pixels. A curve is `None` when its pixel set is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpFnSeries {
    pub feature: usize,
    pub tp: Option<Vec<f64>>,
    #[serde(rename = "fn")]
    pub fn_: Option<Vec<f64>>,
    pub tp_pixels: u64,
    pub fn_pixels: u64,
}

/// Computes the curves over patches laid out as `pred`/`label` `[n, H, W]` and
/// `x` `[n, T, C, H, W]`.
pub fn tp_fn_mean_series(pred: &[u8], label: &[u8], x: &[f32], dims: Dims, feature: usize) -> Result<TpFnSeries> {
    let hw = dims.hw();
    if pred.len() != label.len() || hw == 0 || !pred.len().is_multiple_of(hw) {
        return Err(Error::Dimension(format!(
            "prediction {} / label {} pixels incompatible with {}x{} patches",
            pred.len(),
            label.len(),
            dims.h,
            dims.w
        )));
    }
    let n = pred.len() / hw;
    if x.len() != n * dims.x_len() {
        return Err(Error::Dimension(format!(
            "series has {} values, expected {}",
            x.len(),
            n * dims.x_len()
        )));
    }
    if feature >= dims.c {
        return Err(Error::Argument(format!("feature {feature} outside 0..{}", dims.c)));
    }
    let mut tp_sum = vec![0f64; dims.t];
    let mut fn_sum = vec![0f64; dims.t];
    let (mut n_tp, mut n_fn) = (0u64, 0u64);
    for s in 0..n {
        let xs = &x[s * dims.x_len()..(s + 1) * dims.x_len()];
        for px in 0..hw {
            let i = s * hw + px;
            if label[i] == 0 {
                continue;
            }
            let sums = if pred[i] != 0 {
                n_tp += 1;
                &mut tp_sum
            } else {
                n_fn += 1;
                &mut fn_sum
            };
            for (t, acc) in sums.iter_mut().enumerate() {
                *acc += xs[(t * dims.c + feature) * hw + px] as f64;
            }
        }
    }
    let finish = |sum: Vec<f64>, count: u64| (count > 0).then(|| sum.into_iter().map(|v| v / count as f64).collect());
    Ok(TpFnSeries {
        feature,
        tp: finish(tp_sum, n_tp),
        fn_: finish(fn_sum, n_fn),
        tp_pixels: n_tp,
        fn_pixels: n_fn,
    })
}

/// [`tp_fn_mean_series`] for a dataset and its predicted masks.
pub fn dataset_tp_fn_series(pred: &BinaryMask, dataset: &PatchDataset, feature: usize) -> Result<TpFnSeries> {
    let labels: Vec<u8> = dataset.samples.iter().flat_map(|s| s.y.iter().copied()).collect();
    let x: Vec<f32> = dataset.samples.iter().flat_map(|s| s.x.iter().copied()).collect();
    tp_fn_mean_series(&pred.values, &labels, &x, dataset.dims, feature)
}

/// Euclidean distance between two curves of equal length.
pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(t: usize, h: usize, w: usize) -> Dims {
        Dims { t, c: 1, h, w }
    }

    #[test]
    fn two_pixel_toy() {
        // pixel series: px0 = [1, 2, 3], px1 = [4, 5, 6]
        let x = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        let s = tp_fn_mean_series(&[1, 0], &[1, 1], &x, dims(3, 1, 2), 0).unwrap();
        assert_eq!(s.tp.as_deref(), Some(&[1.0, 2.0, 3.0][..]));
        assert_eq!(s.fn_.as_deref(), Some(&[4.0, 5.0, 6.0][..]));
        assert_eq!((s.tp_pixels, s.fn_pixels), (1, 1));
    }

    #[test]
    fn perfect_prediction_has_no_fn_curve() {
        let x = [0.2f32; 8];
        let s = tp_fn_mean_series(&[1, 0, 1, 1], &[1, 0, 1, 1], &x, dims(2, 2, 2), 0).unwrap();
        assert!(s.fn_.is_none());
        assert!(s.tp.is_some());
    }

    #[test]
    fn constant_input_gives_constant_curves() {
        let x = vec![0.7f32; 4 * 3];
        let s = tp_fn_mean_series(&[1, 0, 0, 1], &[1, 1, 0, 1], &x, dims(3, 2, 2), 0).unwrap();
        for v in s.tp.unwrap().into_iter().chain(s.fn_.unwrap()) {
            assert!((v - 0.7).abs() < 1e-6);
        }
    }

    #[test]
    fn picks_requested_feature() {
        // T=1, C=2, one pixel
        let d = Dims { t: 1, c: 2, h: 1, w: 1 };
        let s = tp_fn_mean_series(&[1], &[1], &[0.1, 0.9], d, 1).unwrap();
        assert!((s.tp.unwrap()[0] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn shape_errors() {
        assert!(tp_fn_mean_series(&[1], &[1, 0], &[0.0; 2], dims(1, 1, 2), 0).is_err());
        assert!(tp_fn_mean_series(&[1, 0], &[1, 0], &[0.0; 3], dims(1, 1, 2), 0).is_err());
    }
}
