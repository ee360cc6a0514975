//! COCO-style mask AP.
//!
//! Follows the COCO evaluation conventions: IoU thresholds 0.50:0.05:0.95,
//! 101-point interpolated precision, a per-image detection cap, and area
//! ranges for the small / medium breakdown (ground truth outside a range is
//! ignored, as are unmatched detections outside it). In class-sensitive mode
//! AP is averaged over categories that have ground truth; class-agnostic mode
//! pools everything into one category.

mod coco;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::PixelSet;
use crate::propagate::ObjectClass;

pub use coco::{coco_ap, evaluate, interpolated_precision, EvalSummary};

#[derive(Debug, Clone, PartialEq)]
pub struct GtInstance {
    pub image_id: u64,
    pub mask: PixelSet,
    pub category: ObjectClass,
}

impl GtInstance {
    pub fn area(&self) -> usize {
        self.mask.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredInstance {
    pub image_id: u64,
    pub mask: PixelSet,
    pub category: ObjectClass,
    pub score: f64,
}

impl PredInstance {
    pub fn area(&self) -> usize {
        self.mask.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Agnostic,
    #[default]
    Sensitive,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::Agnostic => "agnostic",
            EvalMode::Sensitive => "sensitive",
        })
    }
}

impl std::str::FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "agnostic" => Ok(EvalMode::Agnostic),
            "sensitive" => Ok(EvalMode::Sensitive),
            other => Err(format!("eval mode must be agnostic or sensitive, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub mode: EvalMode,
    pub iou_thresholds: Vec<f64>,
    pub recall_points: usize,
    /// Detections kept per image (per category in class-sensitive mode).
    pub max_dets: usize,
    /// Small: area < `small_area`; medium: `small_area <= area < medium_area`.
    pub small_area: f64,
    pub medium_area: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            mode: EvalMode::Sensitive,
            iou_thresholds: (0..10).map(|i| 0.5 + 0.05 * i as f64).collect(),
            recall_points: 101,
            max_dets: 50,
            small_area: 32.0 * 32.0,
            medium_area: 96.0 * 96.0,
        }
    }
}

impl EvalParams {
    pub fn with_mode(mode: EvalMode) -> Self {
        Self { mode, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iou_thresholds.is_empty() || self.iou_thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidParam("IoU thresholds must be non-empty and in [0, 1]".into()));
        }
        if self.recall_points < 2 {
            return Err(Error::InvalidParam("recall_points must be at least 2".into()));
        }
        if self.max_dets == 0 {
            return Err(Error::InvalidParam("max_dets must be at least 1".into()));
        }
        if !(self.small_area > 0.0 && self.medium_area > self.small_area) {
            return Err(Error::InvalidParam("area ranges must satisfy 0 < small < medium".into()));
        }
        Ok(())
    }

    pub(crate) fn threshold_index(&self, t: f64) -> Option<usize> {
        self.iou_thresholds.iter().position(|&x| (x - t).abs() < 1e-9)
    }
}

/// Percentages in `[0, 100]`. Scale-restricted entries are `None` when no
/// ground truth falls in that range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    #[serde(rename = "AP")]
    pub ap: f64,
    #[serde(rename = "AP50")]
    pub ap50: Option<f64>,
    #[serde(rename = "AP75")]
    pub ap75: Option<f64>,
    #[serde(rename = "AP_S")]
    pub ap_s: Option<f64>,
    #[serde(rename = "AP_M")]
    pub ap_m: Option<f64>,
}

impl ApReport {
    pub fn fields(&self) -> [(&'static str, Option<f64>); 5] {
        [("AP", Some(self.ap)), ("AP50", self.ap50), ("AP75", self.ap75), ("AP_S", self.ap_s), ("AP_M", self.ap_m)]
    }
}

impl fmt::Display for ApReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fields = self.fields();
        for (name, _) in &fields {
            write!(f, "{name:>8}")?;
        }
        writeln!(f)?;
        for (_, v) in &fields {
            match v {
                Some(v) => write!(f, "{v:>8.1}")?,
                None => write!(f, "{:>8}", "-")?,
            }
        }
        Ok(())
    }
}

/// `|a ∩ b| / |a ∪ b|`.
pub fn mask_iou(a: &PixelSet, b: &PixelSet) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMask);
    }
    let inter = a.intersection_len(b);
    Ok(inter as f64 / (a.len() + b.len() - inter) as f64)
}

/// One-to-one assignment of predictions to ground truth for a single image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    /// For each prediction (input order), the matched ground-truth index.
    pub pred_to_gt: Vec<Option<usize>>,
    pub gt_to_pred: Vec<Option<usize>>,
}

impl Matching {
    pub fn true_positives(&self) -> usize {
        self.pred_to_gt.iter().flatten().count()
    }
}

/// Greedy matching: predictions in descending score order (stable on input
/// order) each take the still-unmatched ground truth with the highest IoU at
/// or above `iou_thresh`; among equal IoUs the later ground truth wins, as in
/// the COCO reference. With `class_sensitive`, only same-category pairs count.
pub fn match_instances(
    preds: &[PredInstance],
    gts: &[GtInstance],
    iou_thresh: f64,
    class_sensitive: bool,
) -> Result<Matching> {
    if let Some(id) = preds.first().map(|p| p.image_id).or(gts.first().map(|g| g.image_id)) {
        if preds.iter().any(|p| p.image_id != id) || gts.iter().any(|g| g.image_id != id) {
            return Err(Error::InvalidParam("match_instances expects a single image".into()));
        }
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score));

    let mut pred_to_gt = vec![None; preds.len()];
    let mut gt_to_pred = vec![None; gts.len()];
    for &d in &order {
        let mut best_iou = iou_thresh.min(1.0 - 1e-10);
        let mut best = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt_to_pred[g].is_some() || (class_sensitive && gt.category != preds[d].category) {
                continue;
            }
            let iou = mask_iou(&preds[d].mask, &gt.mask)?;
            if iou < best_iou {
                continue;
            }
            best_iou = iou;
            best = Some(g);
        }
        if let Some(g) = best {
            pred_to_gt[d] = Some(g);
            gt_to_pred[g] = Some(d);
        }
    }
    Ok(Matching { pred_to_gt, gt_to_pred })
}

/// 101-point interpolated AP (as a fraction) for detections pooled over a
/// dataset, given as `(score, is_true_positive)` pairs. Input order breaks
/// score ties.
pub fn average_precision(detections: &[(f64, bool)], num_gt: usize, recall_points: usize) -> Result<f64> {
    if num_gt == 0 {
        return Err(Error::NoGroundTruth);
    }
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].0.total_cmp(&detections[a].0));
    let hits: Vec<bool> = order.iter().map(|&i| detections[i].1).collect();
    let q = interpolated_precision(&hits, num_gt, recall_points);
    Ok(q.iter().sum::<f64>() / q.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::Pixel;

    fn square(row: u32, col: u32, side: u32) -> PixelSet {
        (row..row + side).flat_map(|r| (col..col + side).map(move |c| Pixel::new(r, c))).collect()
    }

    fn gt(mask: PixelSet, category: ObjectClass) -> GtInstance {
        GtInstance { image_id: 1, mask, category }
    }

    fn pred(mask: PixelSet, category: ObjectClass, score: f64) -> PredInstance {
        PredInstance { image_id: 1, mask, category, score }
    }

    #[test]
    fn iou_examples() {
        let a = square(0, 0, 10);
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(mask_iou(&a, &square(20, 20, 4)).unwrap(), 0.0);
        // 10x10 squares overlapping in a 10x5 strip
        let b = square(0, 5, 10);
        assert_eq!(a.intersection_len(&b), 50);
        assert_eq!(mask_iou(&a, &b).unwrap(), 1.0 / 3.0);
        assert_eq!(mask_iou(&b, &a).unwrap(), mask_iou(&a, &b).unwrap());
        assert!(mask_iou(&a, &PixelSet::new()).is_err());
    }

    #[test]
    fn matching_examples() {
        let m = square(0, 0, 10);
        let g = [gt(m.clone(), ObjectClass::Drink)];
        let one = match_instances(&[pred(m.clone(), ObjectClass::Drink, 0.3)], &g, 0.95, true).unwrap();
        assert_eq!(one.pred_to_gt, vec![Some(0)]);

        let two = match_instances(
            &[pred(m.clone(), ObjectClass::Drink, 0.4), pred(m.clone(), ObjectClass::Drink, 0.9)],
            &g,
            0.5,
            true,
        )
        .unwrap();
        assert_eq!(two.pred_to_gt, vec![None, Some(0)]);
        assert_eq!(two.true_positives(), 1);

        let wrong_class = [pred(m.clone(), ObjectClass::Smartphone, 1.0)];
        assert_eq!(match_instances(&wrong_class, &g, 0.5, false).unwrap().true_positives(), 1);
        assert_eq!(match_instances(&wrong_class, &g, 0.5, true).unwrap().true_positives(), 0);

        let other_image = PredInstance { image_id: 2, ..wrong_class[0].clone() };
        assert!(match_instances(&[other_image], &g, 0.5, false).is_err());
    }

    #[test]
    fn matching_prefers_higher_iou() {
        let g = [gt(square(0, 0, 10), ObjectClass::Book), gt(square(0, 4, 10), ObjectClass::Book)];
        let p = [pred(square(0, 3, 10), ObjectClass::Book, 1.0)];
        assert_eq!(match_instances(&p, &g, 0.3, true).unwrap().pred_to_gt, vec![Some(1)]);
    }

    #[test]
    fn ap_examples() {
        // all matched, no false positives
        assert_eq!(average_precision(&[(0.9, true), (0.5, true), (0.1, true)], 3, 101).unwrap(), 1.0);
        assert_eq!(average_precision(&[], 3, 101).unwrap(), 0.0);
        assert!(average_precision(&[(0.5, true)], 0, 101).is_err());

        // one gt, two preds, the lower-scored one is the hit: PR points are
        // (recall 0, precision 0) then (recall 1, precision 1/2); the
        // interpolated precision is 1/2 at every one of the 101 recall levels
        let ap = average_precision(&[(0.9, false), (0.6, true)], 1, 101).unwrap();
        assert_eq!(ap, 0.5);
    }

    #[test]
    fn report_display_marks_missing_ranges() {
        let r = ApReport { ap: 50.0, ap50: Some(75.0), ap75: Some(50.0), ap_s: None, ap_m: Some(12.5) };
        let text = r.to_string();
        assert!(text.contains("AP_S") && text.contains(" -") && text.contains("12.5"));
        let json = serde_json::to_value(r).unwrap();
        assert_eq!(json["AP50"], 75.0);
        assert!(json["AP_S"].is_null());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("agnostic".parse::<EvalMode>().unwrap(), EvalMode::Agnostic);
        assert!("both".parse::<EvalMode>().is_err());
    }
}
