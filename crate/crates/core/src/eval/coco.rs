use std::collections::BTreeMap;

use super::{mask_iou, ApReport, EvalMode, EvalParams, GtInstance, PredInstance};
use crate::error::{Error, Result};
use crate::par;

/// Area ranges, in order: all, small, medium. Half-open `[lo, hi)`.
fn area_ranges(params: &EvalParams) -> [(f64, f64); 3] {
    [(0.0, f64::INFINITY), (0.0, params.small_area), (params.small_area, params.medium_area)]
}

/// Matching outcome of one image for one category bucket and area range.
struct ImageEval {
    /// Kept detections in descending score order.
    scores: Vec<f64>,
    /// `[threshold][detection]`
    matched: Vec<Vec<bool>>,
    ignored: Vec<Vec<bool>>,
    num_gt: usize,
}

fn evaluate_image(
    gts: &[&GtInstance],
    dts: &[&PredInstance],
    ious: &[Vec<f64>],
    range: (f64, f64),
    params: &EvalParams,
) -> ImageEval {
    let in_range = |area: usize| (area as f64) >= range.0 && (area as f64) < range.1;

    // ground truth: non-ignored first, stable
    let mut gt_order: Vec<usize> = (0..gts.len()).collect();
    gt_order.sort_by_key(|&g| !in_range(gts[g].area()));
    let gt_ignore: Vec<bool> = gt_order.iter().map(|&g| !in_range(gts[g].area())).collect();

    let t_count = params.iou_thresholds.len();
    let mut matched = vec![vec![false; dts.len()]; t_count];
    let mut ignored = vec![vec![false; dts.len()]; t_count];
    for (t, &thr) in params.iou_thresholds.iter().enumerate() {
        let mut gt_taken = vec![false; gt_order.len()];
        for d in 0..dts.len() {
            let mut best_iou = thr.min(1.0 - 1e-10);
            let mut best: Option<usize> = None;
            for (gi, &g) in gt_order.iter().enumerate() {
                if gt_taken[gi] {
                    continue;
                }
                // once matched to a regular gt, never trade down to an ignored one
                if let Some(b) = best {
                    if !gt_ignore[b] && gt_ignore[gi] {
                        break;
                    }
                }
                if ious[d][g] < best_iou {
                    continue;
                }
                best_iou = ious[d][g];
                best = Some(gi);
            }
            if let Some(gi) = best {
                gt_taken[gi] = true;
                matched[t][d] = true;
                ignored[t][d] = gt_ignore[gi];
            } else {
                ignored[t][d] = !in_range(dts[d].area());
            }
        }
    }
    ImageEval {
        scores: dts.iter().map(|d| d.score).collect(),
        matched,
        ignored,
        num_gt: gt_ignore.iter().filter(|&&i| !i).count(),
    }
}

/// Interpolated precision at `recall_points` evenly spaced recall levels in
/// `[0, 1]`, from hit flags sorted by descending score. Precision is first
/// made monotone (running max from the right), then sampled at the first
/// detection whose recall reaches each level; levels beyond the final recall
/// get 0.
pub fn interpolated_precision(hits: &[bool], num_gt: usize, recall_points: usize) -> Vec<f64> {
    let n = hits.len();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut recall = Vec::with_capacity(n);
    let mut precision = Vec::with_capacity(n);
    for &h in hits {
        if h {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (1..n).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    (0..recall_points)
        .map(|r| {
            let level = r as f64 / (recall_points - 1) as f64;
            let idx = recall.partition_point(|&x| x < level);
            if idx < n {
                precision[idx]
            } else {
                0.0
            }
        })
        .collect()
}

/// Full evaluation table: `ap[area][threshold][bucket]`, each `None` when
/// the bucket has no ground truth in that area range.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub buckets: Vec<u8>,
    pub ap: Vec<Vec<Vec<Option<f64>>>>,
}

impl EvalSummary {
    fn mean(&self, area: usize, threshold: Option<usize>) -> Option<f64> {
        let mut vals = Vec::new();
        for (t, row) in self.ap[area].iter().enumerate() {
            if threshold.is_some_and(|only| only != t) {
                continue;
            }
            vals.extend(row.iter().flatten());
        }
        (!vals.is_empty()).then(|| 100.0 * vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn validate_inputs(preds: &[PredInstance], gts: &[GtInstance]) -> Result<()> {
    for p in preds {
        if !(0.0..=1.0).contains(&p.score) {
            return Err(Error::InvalidParam(format!("prediction score {} outside [0, 1]", p.score)));
        }
        if p.mask.is_empty() {
            return Err(Error::EmptyMask);
        }
    }
    if gts.iter().any(|g| g.mask.is_empty()) {
        return Err(Error::EmptyMask);
    }
    Ok(())
}

/// Runs matching for every image, bucket, area range and threshold, and
/// reduces to per-bucket AP.
pub fn evaluate(preds: &[PredInstance], gts: &[GtInstance], params: &EvalParams) -> Result<EvalSummary> {
    params.validate()?;
    validate_inputs(preds, gts)?;
    if gts.is_empty() {
        return Err(Error::NoGroundTruth);
    }

    let bucket_of = |c: crate::propagate::ObjectClass| match params.mode {
        EvalMode::Agnostic => 0u8,
        EvalMode::Sensitive => c.id(),
    };
    let buckets: Vec<u8> = match params.mode {
        EvalMode::Agnostic => vec![0],
        EvalMode::Sensitive => crate::propagate::ObjectClass::ALL.iter().map(|c| c.id()).collect(),
    };

    // (bucket, image) -> (gts, dts); BTreeMap iteration gives image order per bucket
    type Group<'a> = (Vec<&'a GtInstance>, Vec<&'a PredInstance>);
    let mut groups: BTreeMap<(u8, u64), Group> = BTreeMap::new();
    for g in gts {
        groups.entry((bucket_of(g.category), g.image_id)).or_default().0.push(g);
    }
    for p in preds {
        groups.entry((bucket_of(p.category), p.image_id)).or_default().1.push(p);
    }
    let groups: Vec<((u8, u64), Group)> = groups.into_iter().collect();

    let ranges = area_ranges(params);
    let per_group: Vec<[ImageEval; 3]> = par::map(&groups, |(_, (g, d))| {
        let mut dts = d.clone();
        dts.sort_by(|a, b| b.score.total_cmp(&a.score));
        dts.truncate(params.max_dets);
        let ious: Vec<Vec<f64>> = dts
            .iter()
            .map(|p| g.iter().map(|gt| mask_iou(&p.mask, &gt.mask).expect("validated non-empty")).collect())
            .collect();
        ranges.map(|r| evaluate_image(g, &dts, &ious, r, params))
    });

    let t_count = params.iou_thresholds.len();
    let mut ap = vec![vec![vec![None; buckets.len()]; t_count]; 3];
    for (bi, &bucket) in buckets.iter().enumerate() {
        for (a, area_ap) in ap.iter_mut().enumerate() {
            let evals: Vec<&ImageEval> = groups
                .iter()
                .zip(&per_group)
                .filter(|(((b, _), _), _)| *b == bucket)
                .map(|(_, e)| &e[a])
                .collect();
            let num_gt: usize = evals.iter().map(|e| e.num_gt).sum();
            if num_gt == 0 {
                continue;
            }
            // pooled detections in image order, then a stable sort by score
            let pooled: Vec<(usize, usize)> =
                evals.iter().enumerate().flat_map(|(i, e)| (0..e.scores.len()).map(move |d| (i, d))).collect();
            let mut order: Vec<usize> = (0..pooled.len()).collect();
            order.sort_by(|&x, &y| {
                let (sx, sy) = (evals[pooled[x].0].scores[pooled[x].1], evals[pooled[y].0].scores[pooled[y].1]);
                sy.total_cmp(&sx)
            });
            for (t, row) in area_ap.iter_mut().enumerate() {
                let hits: Vec<bool> = order
                    .iter()
                    .map(|&k| pooled[k])
                    .filter(|&(i, d)| !evals[i].ignored[t][d])
                    .map(|(i, d)| evals[i].matched[t][d])
                    .collect();
                let q = interpolated_precision(&hits, num_gt, params.recall_points);
                row[bi] = Some(q.iter().sum::<f64>() / q.len() as f64);
            }
        }
    }
    Ok(EvalSummary { buckets, ap })
}

/// AP, AP50, AP75, AP_S and AP_M in percent.
pub fn coco_ap(preds: &[PredInstance], gts: &[GtInstance], params: &EvalParams) -> Result<ApReport> {
    let summary = evaluate(preds, gts, params)?;
    let ap = summary.mean(0, None).ok_or(Error::NoGroundTruth)?;
    Ok(ApReport {
        ap,
        ap50: params.threshold_index(0.5).and_then(|t| summary.mean(0, Some(t))),
        ap75: params.threshold_index(0.75).and_then(|t| summary.mean(0, Some(t))),
        ap_s: summary.mean(1, None),
        ap_m: summary.mean(2, None),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{Pixel, PixelSet};
    use crate::propagate::ObjectClass;

    fn square(row: u32, col: u32, side: u32) -> PixelSet {
        (row..row + side).flat_map(|r| (col..col + side).map(move |c| Pixel::new(r, c))).collect()
    }

    fn gt(image_id: u64, mask: PixelSet) -> GtInstance {
        GtInstance { image_id, mask, category: ObjectClass::Drink }
    }

    fn pred(image_id: u64, mask: PixelSet, score: f64) -> PredInstance {
        PredInstance { image_id, mask, category: ObjectClass::Drink, score }
    }

    #[test]
    fn perfect_and_empty_predictions() {
        // one small (20x20) and one medium (40x40) instance
        let gts = vec![gt(1, square(0, 0, 20)), gt(2, square(0, 0, 40))];
        let perfect: Vec<_> = gts.iter().map(|g| pred(g.image_id, g.mask.clone(), 1.0)).collect();
        for mode in [EvalMode::Agnostic, EvalMode::Sensitive] {
            let r = coco_ap(&perfect, &gts, &EvalParams::with_mode(mode)).unwrap();
            assert_eq!(r.fields().map(|f| f.1), [Some(100.0); 5]);
            let r = coco_ap(&[], &gts, &EvalParams::with_mode(mode)).unwrap();
            assert_eq!(r.fields().map(|f| f.1), [Some(0.0); 5]);
        }
    }

    #[test]
    fn missing_scale_is_none() {
        let gts = vec![gt(1, square(0, 0, 20))];
        let r = coco_ap(&[pred(1, square(0, 0, 20), 0.7)], &gts, &EvalParams::default()).unwrap();
        assert_eq!(r.ap_s, Some(100.0));
        assert_eq!(r.ap_m, None);
    }

    #[test]
    fn no_ground_truth_is_an_error() {
        assert!(matches!(
            coco_ap(&[pred(1, square(0, 0, 4), 0.5)], &[], &EvalParams::default()),
            Err(Error::NoGroundTruth)
        ));
    }

    #[test]
    fn invalid_scores_are_rejected() {
        let gts = vec![gt(1, square(0, 0, 4))];
        assert!(coco_ap(&[pred(1, square(0, 0, 4), 1.5)], &gts, &EvalParams::default()).is_err());
    }

    #[test]
    fn max_dets_caps_per_image() {
        let gts: Vec<_> = (0..3).map(|i| gt(1, square(0, 10 * i, 5))).collect();
        let preds: Vec<_> = gts.iter().map(|g| pred(1, g.mask.clone(), 0.5)).collect();
        let params = EvalParams { max_dets: 2, ..Default::default() };
        let r = coco_ap(&preds, &gts, &params).unwrap();
        // recall tops out at 2/3: 67 of 101 recall levels have precision 1
        assert!((r.ap - 100.0 * 67.0 / 101.0).abs() < 1e-9);
    }

    #[test]
    fn interpolation_matches_hand_computation() {
        // hits: F T F T with 2 gts -> recall .0 .5 .5 1, precision 0 .5 .33 .5
        // envelope: .5 .5 .5 .5 -> every level maps to 0.5
        let q = interpolated_precision(&[false, true, false, true], 2, 101);
        assert!(q.iter().all(|&p| p == 0.5));
        // T F with 2 gts: recall .5 .5, precision 1 .5 -> envelope 1 .5;
        // levels <= .5 read 1, above .5 read 0
        let q = interpolated_precision(&[true, false], 2, 101);
        assert_eq!(q.iter().filter(|&&p| p == 1.0).count(), 51);
        assert_eq!(q.iter().filter(|&&p| p == 0.0).count(), 50);
    }
}
