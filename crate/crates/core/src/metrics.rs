//! Pixel-level segmentation metrics: Dice, IoU and pixel accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dice: f64,
    pub iou: f64,
    pub pixel_accuracy: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl MetricReport {
    /// Derives the ratios from confusion counts. Empty prediction against
    /// empty truth scores 1 on every metric.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let total = tp + fp + fn_ + tn;
        let errors = fp + fn_;
        let (dice, iou) = if tp + errors == 0 {
            (1.0, 1.0)
        } else {
            (
                2.0 * tp as f64 / (2 * tp + errors) as f64,
                tp as f64 / (tp + errors) as f64,
            )
        };
        let pixel_accuracy = if total == 0 { 1.0 } else { (tp + tn) as f64 / total as f64 };
        Self {
            dice,
            iou,
            pixel_accuracy,
            tp,
            fp,
            fn_,
            tn,
        }
    }
}

pub fn evaluate(pred: &BinaryMask, truth: &BinaryMask) -> Result<MetricReport> {
    if pred.dims() != truth.dims() {
        return Err(Error::Dimension {
            left: (pred.width(), pred.height(), 1),
            right: (truth.width(), truth.height(), 1),
        });
    }
    let mut counts = [0u64; 4];
    for (&p, &t) in pred.data().iter().zip(truth.data()) {
        // index: 0 tn, 1 fn, 2 fp, 3 tp
        counts[usize::from(p) * 2 + usize::from(t)] += 1;
    }
    let [tn, fn_, fp, tp] = counts;
    Ok(MetricReport::from_counts(tp, fp, fn_, tn))
}

/// Mean of per-image metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub dice: f64,
    pub iou: f64,
    pub pixel_accuracy: f64,
}

pub fn aggregate<'a>(reports: impl IntoIterator<Item = &'a MetricReport>) -> MetricSummary {
    let mut s = MetricSummary {
        count: 0,
        dice: 0.0,
        iou: 0.0,
        pixel_accuracy: 0.0,
    };
    for r in reports {
        s.count += 1;
        s.dice += r.dice;
        s.iou += r.iou;
        s.pixel_accuracy += r.pixel_accuracy;
    }
    if s.count > 0 {
        let n = s.count as f64;
        s.dice /= n;
        s.iou /= n;
        s.pixel_accuracy /= n;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_masks_score_one() {
        let m = BinaryMask::from_fn(6, 6, |x, y| x < y);
        let r = evaluate(&m, &m).unwrap();
        assert_eq!((r.dice, r.iou, r.pixel_accuracy), (1.0, 1.0, 1.0));
    }

    #[test]
    fn disjoint_masks_score_zero() {
        let a = BinaryMask::from_fn(6, 6, |x, _| x < 2);
        let b = BinaryMask::from_fn(6, 6, |x, _| x > 3);
        let r = evaluate(&a, &b).unwrap();
        assert_eq!((r.dice, r.iou), (0.0, 0.0));
        assert_eq!(r.pixel_accuracy, 12.0 / 36.0);
    }

    #[test]
    fn half_coverage() {
        let truth = BinaryMask::from_fn(8, 8, |x, _| x < 4);
        let pred = BinaryMask::from_fn(8, 8, |x, _| x < 2);
        let r = evaluate(&pred, &truth).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (16, 0, 16));
        assert!((r.dice - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.iou, 0.5);
    }

    #[test]
    fn empty_vs_empty_is_perfect() {
        let z = BinaryMask::zeros(3, 3);
        let r = evaluate(&z, &z).unwrap();
        assert_eq!((r.dice, r.iou, r.pixel_accuracy), (1.0, 1.0, 1.0));
    }

    #[test]
    fn mismatch_rejected() {
        assert!(evaluate(&BinaryMask::zeros(2, 3), &BinaryMask::zeros(3, 2)).is_err());
    }

    #[test]
    fn aggregate_is_per_image_mean() {
        let a = MetricReport::from_counts(1, 0, 0, 0);
        let b = MetricReport::from_counts(0, 1, 0, 0);
        let s = aggregate([&a, &b]);
        assert_eq!((s.count, s.dice, s.iou, s.pixel_accuracy), (2, 0.5, 0.5, 0.5));
    }

    proptest! {
        #[test]
        fn identities_hold(
            pred in proptest::collection::vec(0u8..=1, 49),
            truth in proptest::collection::vec(0u8..=1, 49),
        ) {
            let p = BinaryMask::new(7, 7, pred).unwrap();
            let t = BinaryMask::new(7, 7, truth).unwrap();
            let r = evaluate(&p, &t).unwrap();
            let swapped = evaluate(&t, &p).unwrap();
            prop_assert_eq!(r.dice, swapped.dice);
            prop_assert_eq!(r.iou, swapped.iou);
            prop_assert!(0.0 <= r.iou && r.iou <= r.dice && r.dice <= 1.0);
            if r.tp + r.fp + r.fn_ > 0 {
                prop_assert!((r.dice - 2.0 * r.iou / (1.0 + r.iou)).abs() < 1e-12);
            }
        }
    }
}
