use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel confusion counts of the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

pub fn confusion_counts(pred: &[u8], label: &[u8]) -> Result<ConfusionCounts> {
    if pred.len() != label.len() {
        return Err(Error::Dimension(format!(
            "prediction has {} pixels, label {}",
            pred.len(),
            label.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &y) in pred.iter().zip(label) {
        match (p != 0, y != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub iou: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// IoU, recall, precision and F1 of the positive class; any `0/0` is 0.
pub fn compute_metrics(c: &ConfusionCounts) -> Metrics {
    let iou = ratio(c.tp, c.tp + c.fp + c.fn_);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let precision = ratio(c.tp, c.tp + c.fp);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Metrics {
        iou,
        recall,
        precision,
        f1,
    }
}

impl Metrics {
    /// Component-wise mean.
    pub fn mean(items: &[Metrics]) -> Metrics {
        let n = items.len().max(1) as f64;
        Metrics {
            iou: items.iter().map(|m| m.iou).sum::<f64>() / n,
            recall: items.iter().map(|m| m.recall).sum::<f64>() / n,
            precision: items.iter().map(|m| m.precision).sum::<f64>() / n,
            f1: items.iter().map(|m| m.f1).sum::<f64>() / n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(pred: &[u8], label: &[u8]) -> (f64, f64, f64, f64) {
        let (mut inter, mut union, mut p, mut l) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..pred.len() {
            let (a, b) = (pred[i] == 1, label[i] == 1);
            inter += u64::from(a && b);
            union += u64::from(a || b);
            p += u64::from(a);
            l += u64::from(b);
        }
        let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (rec, prec) = (div(inter, l), div(inter, p));
        let f1 = if rec + prec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        (div(inter, union), rec, prec, f1)
    }

    fn pair() -> impl Strategy<Value = (Vec<u8>, Vec<u8>)> {
        (1usize..64).prop_flat_map(|n| (prop::collection::vec(0u8..2, n), prop::collection::vec(0u8..2, n)))
    }

    proptest! {
        #[test]
        fn matches_pixel_loop((pred, label) in pair()) {
            let m = compute_metrics(&confusion_counts(&pred, &label).unwrap());
            prop_assert_eq!((m.iou, m.recall, m.precision, m.f1), brute(&pred, &label));
        }

        #[test]
        fn iou_is_symmetric((pred, label) in pair()) {
            let a = compute_metrics(&confusion_counts(&pred, &label).unwrap()).iou;
            let b = compute_metrics(&confusion_counts(&label, &pred).unwrap()).iou;
            prop_assert_eq!(a, b);
        }

        #[test]
        fn concatenation_equals_summed_counts((p1, l1) in pair(), (p2, l2) in pair()) {
            let joined = confusion_counts(&[p1.clone(), p2.clone()].concat(), &[l1.clone(), l2.clone()].concat()).unwrap();
            let summed = confusion_counts(&p1, &l1).unwrap() + confusion_counts(&p2, &l2).unwrap();
            prop_assert_eq!(joined, summed);
            prop_assert_eq!(joined.total() as usize, p1.len() + p2.len());
        }
    }

    #[test]
    fn two_by_two_example() {
        let c = confusion_counts(&[1, 1, 0, 0], &[1, 0, 0, 0]).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 1, fn_: 0, tn: 2 });
        let m = compute_metrics(&c);
        assert_eq!(m.iou, 0.5);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.precision, 0.5);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_complement() {
        let c = confusion_counts(&[1; 5], &[1; 5]).unwrap();
        assert_eq!(c.tp, 5);
        assert_eq!(compute_metrics(&c), Metrics { iou: 1.0, recall: 1.0, precision: 1.0, f1: 1.0 });
        let c = confusion_counts(&[1, 0, 1], &[0, 1, 0]).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert_eq!(compute_metrics(&c), Metrics::default());
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(confusion_counts(&[1], &[1, 0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn summed_counts_example() {
        let a = ConfusionCounts { tp: 1, fp: 1, fn_: 0, tn: 2 };
        let b = ConfusionCounts { tp: 1, fp: 0, fn_: 1, tn: 2 };
        assert_eq!(compute_metrics(&(a + b)).iou, 0.5);
    }

    #[test]
    fn counts_serialize_fn_field() {
        let s = serde_json::to_string(&ConfusionCounts { tp: 1, fp: 2, fn_: 3, tn: 4 }).unwrap();
        assert_eq!(s, r#"{"tp":1,"fp":2,"fn":3,"tn":4}"#);
    }
}
