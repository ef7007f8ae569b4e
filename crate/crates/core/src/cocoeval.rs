//! COCO-protocol mean average precision.
//!
//! Per IoU threshold and class, predictions are greedily matched to ground
//! truth in score order, pooled across images, and summarised with
//! interpolated average precision over evenly spaced recall points. Crowd
//! boxes act as ignore regions. Only the "all areas" range is evaluated.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, sort_by_score};
use crate::model::{Detection, GroundTruthBox, ImageRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    pub recall_points: usize,
    pub max_dets: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect(),
            recall_points: 101,
            max_dets: 100,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iou_thresholds.is_empty() {
            return Err(Error::InvalidConfig("no IoU thresholds".into()));
        }
        if self.iou_thresholds.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return Err(Error::InvalidConfig("IoU thresholds must lie in (0, 1]".into()));
        }
        if self.iou_thresholds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("IoU thresholds must be strictly increasing".into()));
        }
        if self.recall_points < 2 {
            return Err(Error::InvalidConfig("need at least 2 recall points".into()));
        }
        if self.max_dets == 0 {
            return Err(Error::InvalidConfig("max_dets must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchLabel {
    TruePositive,
    FalsePositive,
    /// Matched only a crowd region; excluded from precision.
    Ignored,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageMatch {
    /// One label per prediction, in the caller's order.
    pub labels: Vec<MatchLabel>,
    /// One flag per ground-truth box, in the caller's order. Crowd boxes stay false.
    pub gt_matched: Vec<bool>,
}

/// Greedy one-to-one matching of one image's predictions at a single IoU threshold.
///
/// Predictions are visited by descending score (stable). Each takes the
/// unmatched non-crowd box of its class with the highest IoU at or above
/// `iou_t`; IoU ties go to the earlier box.
pub fn match_image(preds: &[Detection], gts: &[GroundTruthBox], iou_t: f64) -> ImageMatch {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score().total_cmp(&preds[a].score()));

    let mut labels = vec![MatchLabel::FalsePositive; preds.len()];
    let mut gt_matched = vec![false; gts.len()];

    for i in order {
        let pred = &preds[i];
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt.iscrowd || gt_matched[g] || gt.category_id != pred.category_id {
                continue;
            }
            let v = iou(&pred.bbox, &gt.bbox);
            if v >= iou_t && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((g, v));
            }
        }
        labels[i] = if let Some((g, _)) = best {
            gt_matched[g] = true;
            MatchLabel::TruePositive
        } else if gts
            .iter()
            .any(|gt| gt.iscrowd && gt.category_id == pred.category_id && iou(&pred.bbox, &gt.bbox) >= iou_t)
        {
            MatchLabel::Ignored
        } else {
            MatchLabel::FalsePositive
        };
    }
    ImageMatch { labels, gt_matched }
}

/// Interpolated AP over `recall_points` evenly spaced recall levels.
///
/// `ranked` holds the TP/FP labels in descending score order; ignored
/// predictions are skipped. Returns `None` when `num_gt` is zero, since such
/// a class does not take part in the mean.
pub fn average_precision(ranked: &[MatchLabel], num_gt: usize, recall_points: usize) -> Option<f64> {
    if num_gt == 0 {
        return None;
    }
    let mut precision = Vec::with_capacity(ranked.len());
    let mut recall = Vec::with_capacity(ranked.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for label in ranked {
        match label {
            MatchLabel::TruePositive => tp += 1,
            MatchLabel::FalsePositive => fp += 1,
            MatchLabel::Ignored => continue,
        }
        precision.push(tp as f64 / (tp + fp) as f64);
        recall.push(tp as f64 / num_gt as f64);
    }
    // Precision envelope: best precision at this recall or beyond.
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }

    let steps = (recall_points - 1) as f64;
    let total: f64 = (0..recall_points)
        .map(|k| {
            let r = k as f64 / steps;
            let idx = recall.partition_point(|&x| x < r);
            precision.get(idx).copied().unwrap_or(0.0)
        })
        .sum();
    Some(total / recall_points as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub iou_threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub map_50_95: f64,
    pub map_50: f64,
    /// Mean over IoU thresholds, for classes with at least one non-crowd box.
    pub per_class_ap: BTreeMap<u32, f64>,
    pub matched_counts: Vec<MatchCounts>,
}

struct Pooled {
    score: f64,
    label: MatchLabel,
}

/// Per-class AP at one IoU threshold, plus TP/FP totals.
fn evaluate_threshold(
    preds: &[(&ImageRecord, Vec<Detection>)],
    num_gt: &BTreeMap<u32, usize>,
    iou_t: f64,
    recall_points: usize,
) -> (BTreeMap<u32, f64>, usize, usize) {
    let mut pooled: BTreeMap<u32, Vec<Pooled>> = BTreeMap::new();
    let (mut tp, mut fp) = (0, 0);
    // Images arrive in ascending id order and predictions in input order, so a
    // stable score sort gives the (image_id, input order) tie-break.
    for (record, dets) in preds {
        let m = match_image(dets, &record.ground_truth, iou_t);
        for (det, label) in dets.iter().zip(m.labels) {
            match label {
                MatchLabel::TruePositive => tp += 1,
                MatchLabel::FalsePositive => fp += 1,
                MatchLabel::Ignored => continue,
            }
            pooled.entry(det.category_id).or_default().push(Pooled {
                score: det.score(),
                label,
            });
        }
    }

    let mut aps = BTreeMap::new();
    for (&class, &n) in num_gt {
        let mut entries = pooled.remove(&class).unwrap_or_default();
        entries.sort_by(|a, b| b.score.total_cmp(&a.score));
        let ranked: Vec<MatchLabel> = entries.iter().map(|e| e.label).collect();
        if let Some(ap) = average_precision(&ranked, n, recall_points) {
            aps.insert(class, ap);
        }
    }
    (aps, tp, fp)
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Evaluates per-image predictions against a dataset.
///
/// Images without an entry in `predictions` contribute only missed ground
/// truth. Each image keeps at most `max_dets` predictions by score. A dataset
/// with no non-crowd ground truth at all scores 0.
pub fn evaluate(
    predictions: &BTreeMap<u64, Vec<Detection>>,
    dataset: &[ImageRecord],
    cfg: &EvalConfig,
) -> Result<EvalResult> {
    cfg.validate()?;
    let index: HashMap<u64, &ImageRecord> = dataset.iter().map(|r| (r.image_id, r)).collect();

    let mut preds = Vec::with_capacity(predictions.len());
    for (&image_id, dets) in predictions {
        let record = index.get(&image_id).ok_or(Error::UnknownImage(image_id))?;
        let mut dets = dets.clone();
        sort_by_score(&mut dets);
        dets.truncate(cfg.max_dets);
        preds.push((*record, dets));
    }

    let mut num_gt: BTreeMap<u32, usize> = BTreeMap::new();
    for gt in dataset.iter().flat_map(|r| &r.ground_truth).filter(|g| !g.iscrowd) {
        *num_gt.entry(gt.category_id).or_default() += 1;
    }
    let total_gt: usize = num_gt.values().sum();

    let mut per_threshold = Vec::with_capacity(cfg.iou_thresholds.len());
    let mut matched_counts = Vec::with_capacity(cfg.iou_thresholds.len());
    for &t in &cfg.iou_thresholds {
        let (aps, tp, fp) = evaluate_threshold(&preds, &num_gt, t, cfg.recall_points);
        matched_counts.push(MatchCounts {
            iou_threshold: t,
            tp,
            fp,
            fn_: total_gt - tp,
        });
        per_threshold.push(aps);
    }

    let per_class_ap: BTreeMap<u32, f64> = num_gt
        .keys()
        .map(|&c| (c, mean(per_threshold.iter().map(|aps| aps[&c]))))
        .collect();
    let map_50_95 = mean(per_class_ap.values().copied());

    let map_50 = match cfg.iou_thresholds.iter().position(|&t| (t - 0.5).abs() < 1e-9) {
        Some(i) => mean(per_threshold[i].values().copied()),
        None => mean(evaluate_threshold(&preds, &num_gt, 0.5, cfg.recall_points).0.into_values()),
    };

    Ok(EvalResult {
        map_50_95,
        map_50,
        per_class_ap,
        matched_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BBox;
    use MatchLabel::*;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    fn gt(b: BBox, cat: u32, crowd: bool) -> GroundTruthBox {
        GroundTruthBox {
            bbox: b,
            category_id: cat,
            iscrowd: crowd,
        }
    }

    fn det(b: BBox, score: f64, cat: u32) -> Detection {
        Detection::new(b, score, cat).unwrap()
    }

    #[test]
    fn exact_copy_is_tp() {
        let b = bx(10.0, 10.0, 20.0, 20.0);
        let m = match_image(&[det(b, 0.9, 1)], &[gt(b, 1, false)], 0.5);
        assert_eq!(m.labels, vec![TruePositive]);
        assert_eq!(m.gt_matched, vec![true]);
    }

    #[test]
    fn one_gt_matches_once() {
        let b = bx(10.0, 10.0, 20.0, 20.0);
        // lower-score prediction listed first: sorting happens inside
        let preds = [det(bx(11.0, 10.0, 20.0, 20.0), 0.8, 1), det(b, 0.9, 1)];
        let m = match_image(&preds, &[gt(b, 1, false)], 0.5);
        assert_eq!(m.labels, vec![FalsePositive, TruePositive]);
    }

    #[test]
    fn crowd_overlap_is_ignored() {
        let g = bx(0.0, 0.0, 100.0, 100.0);
        // 80x100 inside 100x100 -> IoU 0.8
        let m = match_image(&[det(bx(0.0, 0.0, 80.0, 100.0), 0.7, 2)], &[gt(g, 2, true)], 0.5);
        assert_eq!(m.labels, vec![Ignored]);
        assert_eq!(m.gt_matched, vec![false]);
    }

    #[test]
    fn class_mismatch_is_fp() {
        let b = bx(10.0, 10.0, 20.0, 20.0);
        let m = match_image(&[det(b, 0.9, 2)], &[gt(b, 1, false)], 0.5);
        assert_eq!(m.labels, vec![FalsePositive]);
    }

    #[test]
    fn prefers_highest_iou_gt() {
        let p = bx(0.0, 0.0, 10.0, 10.0);
        let gts = [gt(bx(2.0, 0.0, 10.0, 10.0), 0, false), gt(bx(1.0, 0.0, 10.0, 10.0), 0, false)];
        let m = match_image(&[det(p, 0.5, 0)], &gts, 0.5);
        assert_eq!(m.gt_matched, vec![false, true]);
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[TruePositive, TruePositive], 2, 101), Some(1.0));
        assert_eq!(average_precision(&[], 3, 101), Some(0.0));
        assert_eq!(average_precision(&[FalsePositive], 0, 101), None);
        // recall levels 0..=0.5 see precision 1, the rest nothing
        let ap = average_precision(&[TruePositive, FalsePositive], 2, 101).unwrap();
        assert!((ap - 51.0 / 101.0).abs() < 1e-15);
    }

    #[test]
    fn ap_skips_ignored() {
        let a = average_precision(&[TruePositive, Ignored, FalsePositive, TruePositive], 2, 101);
        let b = average_precision(&[TruePositive, FalsePositive, TruePositive], 2, 101);
        assert_eq!(a, b);
    }

    fn scene(n: u64) -> Vec<ImageRecord> {
        (0..n)
            .map(|i| {
                let gts = vec![
                    gt(bx(10.0, 10.0, 30.0, 30.0), (i % 3) as u32, false),
                    gt(bx(50.0, 40.0, 20.0, 35.0), 1, false),
                ];
                ImageRecord::new(i, 100, 100, gts).unwrap()
            })
            .collect()
    }

    #[test]
    fn perfect_predictions_score_one() {
        let ds = scene(5);
        let preds = ds
            .iter()
            .map(|r| (r.image_id, r.ground_truth.iter().map(|g| det(g.bbox, 1.0, g.category_id)).collect()))
            .collect();
        let res = evaluate(&preds, &ds, &EvalConfig::default()).unwrap();
        assert_eq!(res.map_50_95, 1.0);
        assert_eq!(res.map_50, 1.0);
        assert_eq!(res.matched_counts[0].tp, 10);
        assert_eq!(res.matched_counts[9].fn_, 0);
    }

    #[test]
    fn empty_predictions_score_zero() {
        let ds = scene(5);
        let res = evaluate(&BTreeMap::new(), &ds, &EvalConfig::default()).unwrap();
        assert_eq!(res.map_50_95, 0.0);
        assert_eq!(res.per_class_ap.len(), 3);
    }

    #[test]
    fn unknown_image_is_an_error() {
        let ds = scene(2);
        let preds = BTreeMap::from([(42u64, vec![])]);
        let err = evaluate(&preds, &ds, &EvalConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownImage(42)));
    }

    #[test]
    fn max_dets_truncates_low_scores() {
        let ds = scene(1);
        let g = ds[0].ground_truth[0];
        // the true positive has the lowest score and gets cut
        let mut dets: Vec<_> = (0..3).map(|k| det(bx(70.0 + k as f64, 0.0, 5.0, 5.0), 0.9, g.category_id)).collect();
        dets.push(det(g.bbox, 0.1, g.category_id));
        let preds = BTreeMap::from([(0u64, dets)]);
        let cfg = EvalConfig {
            max_dets: 3,
            ..EvalConfig::default()
        };
        let res = evaluate(&preds, &ds, &cfg).unwrap();
        assert_eq!(res.matched_counts[0].tp, 0);
    }

    #[test]
    fn map_50_without_half_threshold() {
        let ds = scene(2);
        let preds = ds
            .iter()
            .map(|r| (r.image_id, r.ground_truth.iter().map(|g| det(g.bbox, 0.8, g.category_id)).collect()))
            .collect();
        let cfg = EvalConfig {
            iou_thresholds: vec![0.75],
            ..EvalConfig::default()
        };
        let res = evaluate(&preds, &ds, &cfg).unwrap();
        assert_eq!(res.map_50, 1.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = EvalConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.iou_thresholds = vec![0.6, 0.5];
        assert!(cfg.validate().is_err());
        cfg = EvalConfig {
            recall_points: 1,
            ..EvalConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
