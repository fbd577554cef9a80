//! Electrically significant difference (ESD) counts and pixel accuracy metrics.
//!
//! ESD compares the connected components of a predicted mask with those of
//! the ground truth. A predicted component touching `k >= 2` ground-truth
//! lines contributes `k - 1` shorts; a ground-truth line split across
//! `k >= 2` predicted components contributes `k - 1` opens; predicted
//! components touching nothing are false positives and untouched lines are
//! false negatives.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::{label_components, same_dims, BinaryMask, Connectivity};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EsdReport {
    pub opens: u64,
    pub shorts: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub total: u64,
    pub gt_line_count: u64,
    /// `None` when the ground truth has no lines.
    pub rate_percent: Option<f64>,
}

impl EsdReport {
    pub fn from_counts(
        opens: u64,
        shorts: u64,
        false_positives: u64,
        false_negatives: u64,
        gt_line_count: u64,
    ) -> Self {
        let total = opens + shorts + false_positives + false_negatives;
        Self {
            opens,
            shorts,
            false_positives,
            false_negatives,
            total,
            gt_line_count,
            rate_percent: error_rate_percent(total, gt_line_count),
        }
    }

    /// Sums counts and recomputes the rate from the summed integers.
    pub fn combine(&self, other: &EsdReport) -> EsdReport {
        Self::from_counts(
            self.opens + other.opens,
            self.shorts + other.shorts,
            self.false_positives + other.false_positives,
            self.false_negatives + other.false_negatives,
            self.gt_line_count + other.gt_line_count,
        )
    }

    /// The "no ground-truth lines" condition.
    pub fn has_no_gt_lines(&self) -> bool {
        self.gt_line_count == 0
    }

    /// Rate with two decimals, e.g. `"0.72"`; `"n/a"` without ground-truth lines.
    pub fn rate_display(&self) -> String {
        match self.rate_percent {
            Some(r) => format!("{r:.2}"),
            None => "n/a".to_owned(),
        }
    }
}

pub fn error_rate_percent(total: u64, gt_line_count: u64) -> Option<f64> {
    (gt_line_count > 0).then(|| 100.0 * total as f64 / gt_line_count as f64)
}

/// ESD counts of `pred` against `gt` with 8-connected components.
///
/// A predicted and a ground-truth component overlap when they share at least
/// `min_overlap` pixels.
pub fn esd_errors(pred: &BinaryMask, gt: &BinaryMask, min_overlap: usize) -> Result<EsdReport> {
    esd_errors_with(pred, gt, min_overlap, Connectivity::Eight)
}

pub fn esd_errors_with(
    pred: &BinaryMask,
    gt: &BinaryMask,
    min_overlap: usize,
    connectivity: Connectivity,
) -> Result<EsdReport> {
    same_dims(gt.dims(), pred.dims())?;
    if min_overlap == 0 {
        return Err(crate::Error::param("min_overlap", "must be at least 1"));
    }
    let p = label_components(pred, connectivity);
    let g = label_components(gt, connectivity);

    let mut shared: HashMap<(u32, u32), usize> = HashMap::new();
    for (&pl, &gl) in p.labels.iter().zip(&g.labels) {
        if pl != 0 && gl != 0 {
            *shared.entry((pl, gl)).or_default() += 1;
        }
    }

    let mut pred_degree = vec![0u64; p.component_count];
    let mut gt_degree = vec![0u64; g.component_count];
    for (&(pl, gl), &n) in &shared {
        if n >= min_overlap {
            pred_degree[pl as usize - 1] += 1;
            gt_degree[gl as usize - 1] += 1;
        }
    }

    let split = |degrees: &[u64]| -> (u64, u64) {
        degrees.iter().fold((0, 0), |(excess, zero), &d| match d {
            0 => (excess, zero + 1),
            d => (excess + d - 1, zero),
        })
    };
    let (shorts, false_positives) = split(&pred_degree);
    let (opens, false_negatives) = split(&gt_degree);

    Ok(EsdReport::from_counts(
        opens,
        shorts,
        false_positives,
        false_negatives,
        g.component_count as u64,
    ))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn of(pred: &BinaryMask, gt: &BinaryMask) -> Result<Self> {
        same_dims(gt.dims(), pred.dims())?;
        let mut c = ConfusionCounts::default();
        for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn add(&self, o: &ConfusionCounts) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }

    pub fn metrics(&self) -> PixelMetrics {
        let n = self.tp + self.fp + self.fn_ + self.tn;
        let union = self.tp + self.fp + self.fn_;
        let (dice, iou) = if union == 0 {
            (1.0, 1.0)
        } else {
            (
                2.0 * self.tp as f64 / (2 * self.tp + self.fp + self.fn_) as f64,
                self.tp as f64 / union as f64,
            )
        };
        PixelMetrics {
            pixel_accuracy: if n == 0 {
                1.0
            } else {
                (self.tp + self.tn) as f64 / n as f64
            },
            dice,
            iou,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelMetrics {
    pub pixel_accuracy: f64,
    pub dice: f64,
    pub iou: f64,
}

/// Pixel accuracy, Dice and IoU; two empty masks score Dice = IoU = 1.
pub fn pixel_metrics(pred: &BinaryMask, gt: &BinaryMask) -> Result<PixelMetrics> {
    Ok(ConfusionCounts::of(pred, gt)?.metrics())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_rows(rows: &[&str]) -> BinaryMask {
        BinaryMask::from_fn(rows[0].len(), rows.len(), |x, y| rows[y].as_bytes()[x] == b'#')
    }

    #[test]
    fn identity_has_no_errors() {
        let m = from_rows(&["##..#", ".....", "#.###"]);
        let r = esd_errors(&m, &m, 1).unwrap();
        assert_eq!(r.total, 0);
        assert_eq!(r.gt_line_count, 4);
        assert_eq!(r.rate_percent, Some(0.0));
    }

    #[test]
    fn bridge_between_bars_is_one_short() {
        let gt = from_rows(&["#####", ".....", "#####"]);
        let pred = from_rows(&["#####", "..#..", "#####"]);
        let r = esd_errors(&pred, &gt, 1).unwrap();
        assert_eq!((r.opens, r.shorts, r.false_positives, r.false_negatives), (0, 1, 0, 0));
    }

    #[test]
    fn gap_fp_fn() {
        let gt = from_rows(&["#####....", ".........", "......###"]);
        let pred = from_rows(&["##.##....", "....#....", "........."]);
        // Left bar split in two, right bar missing, no extra components:
        // the second fragment continues diagonally into row 1.
        let r = esd_errors(&pred, &gt, 1).unwrap();
        assert_eq!((r.opens, r.shorts, r.false_positives, r.false_negatives), (1, 0, 0, 1));
    }

    #[test]
    fn min_overlap_gates_contacts() {
        let gt = from_rows(&["####", "....", "...."]);
        let pred = from_rows(&["...#", "...#", "...#"]);
        assert_eq!(esd_errors(&pred, &gt, 1).unwrap().total, 0);
        let r = esd_errors(&pred, &gt, 2).unwrap();
        assert_eq!((r.false_positives, r.false_negatives), (1, 1));
    }

    #[test]
    fn no_ground_truth_lines() {
        let gt = BinaryMask::empty(4, 4);
        let pred = from_rows(&["#...", "....", "....", "...#"]);
        let r = esd_errors(&pred, &gt, 1).unwrap();
        assert!(r.has_no_gt_lines());
        assert_eq!(r.rate_percent, None);
        assert_eq!(r.false_positives, 2);
        assert_eq!(r.rate_display(), "n/a");
    }

    #[test]
    fn dimension_mismatch_is_error() {
        assert!(esd_errors(&BinaryMask::empty(3, 3), &BinaryMask::empty(3, 4), 1).is_err());
        assert!(pixel_metrics(&BinaryMask::empty(3, 3), &BinaryMask::empty(4, 3)).is_err());
    }

    #[test]
    fn reference_rates() {
        let fine_tuned = EsdReport::from_counts(27, 146, 59, 31, 36_413);
        assert_eq!(fine_tuned.total, 263);
        assert_eq!(fine_tuned.rate_display(), "0.72");
        let all_ics = EsdReport::from_counts(50, 22, 41, 6, 19_088);
        assert_eq!(all_ics.total, 119);
        assert_eq!(all_ics.rate_display(), "0.62");
    }

    #[test]
    fn pixel_metric_cases() {
        let gt = from_rows(&["####", "####", "....", "...."]);
        let m = pixel_metrics(&gt, &gt).unwrap();
        assert_eq!((m.pixel_accuracy, m.dice, m.iou), (1.0, 1.0, 1.0));

        let m = pixel_metrics(&gt.complement(), &gt).unwrap();
        assert_eq!((m.pixel_accuracy, m.dice, m.iou), (0.0, 0.0, 0.0));

        let half = from_rows(&["####", "....", "....", "...."]);
        let m = pixel_metrics(&half, &gt).unwrap();
        assert!((m.dice - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.iou - 0.5).abs() < 1e-15);

        let e = BinaryMask::empty(3, 3);
        let m = pixel_metrics(&e, &e).unwrap();
        assert_eq!((m.dice, m.iou), (1.0, 1.0));
    }
}
